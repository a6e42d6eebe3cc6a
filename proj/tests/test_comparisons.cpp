#include <doctest.h>

#include <memory>
#include <random>

#include "bstack/comparisons.hpp"
#include "bstack/error.hpp"
#include "oracles.hpp"

using namespace bstack;

namespace {

Dataset mixed_data(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> a(0, 1), b(1, 4);
  std::normal_distribution<double> z;
  std::string csv = "y,A,B,x,c\n";
  for (int i = 0; i < n; ++i)
    csv += std::to_string(a(rng) ^ (i % 3 == 0)) + "," + std::to_string(a(rng)) + "," + std::to_string(b(rng)) + "," +
           format_double(z(rng)) + "," + (i % 10 < 7 ? "1" : "0") + "\n";
  return parse_csv(csv, parse_schema(R"({"y": "outcome", "A": {"role": "focal", "levels": ["0", "1"]},
      "B": {"role": "focal", "levels": ["1", "2", "3", "4"]}, "x": "nonfocal",
      "c": {"role": "nonfocal", "levels": ["0", "1"]}})"));
}

StackedDraws single_model(const Eigen::MatrixXd& betas) {
  auto d = std::make_shared<PosteriorDraws>();
  d->draws = betas;
  d->chain.assign(static_cast<std::size_t>(betas.rows()), 0);
  return stack_draws(Eigen::VectorXd::Ones(1), {d});
}

CellPosterior cell_with(const Eigen::VectorXd& draws, const std::string& label) {
  CellPosterior c;
  c.label = label;
  c.draws = draws;
  return c;
}

}  // namespace

TEST_SUITE("comparisons") {
  TEST_CASE("focal grid crosses levels and partitions the rows") {
    const Dataset data = mixed_data(1, 300);
    const FocalGrid grid = focal_grid(data, {"A", "B"});
    REQUIRE(grid.cells.size() == 8);
    CHECK(grid.cells[0].label == "A=0, B=1");
    CHECK(grid.cells[7].label == "A=1, B=4");
    std::size_t n = 0;
    double ones = 0.0;
    for (const auto& c : grid.cells) {
      n += c.size;
      if (c.defined()) ones += c.fraction * static_cast<double>(c.size);
    }
    CHECK(n == 300);
    CHECK(ones == doctest::Approx(data.outcome_vector().sum()));
    CHECK_THROWS_AS(focal_grid(data, {"x"}), ConfigError);
  }

  TEST_CASE("profiles: numeric quantiles") {
    std::string csv = "y,x\n";
    for (int i = 1; i <= 100; ++i) csv += std::to_string(i % 2) + "," + std::to_string(i) + "\n";
    const Dataset d = parse_csv(csv, parse_schema(R"({"y": "outcome", "x": "nonfocal"})"));
    const auto p = build_profiles(d, {"x"});
    REQUIRE(p.size() == 3);
    CHECK(p[0].find("x")->value == doctest::Approx(25.75));
    CHECK(p[1].find("x")->value == doctest::Approx(50.5));
    CHECK(p[2].find("x")->value == doctest::Approx(75.25));
    CHECK_THROWS_AS(build_profiles(d, {"x"}, {1.5}), ConfigError);
  }

  TEST_CASE("profiles: categorical variables") {
    const Dataset d = mixed_data(2, 100);
    const auto p = build_profiles(d, {"c"});
    CHECK(p[0].find("c")->level == "0");
    CHECK(p[1].find("c")->level == "1");
    CHECK(p[2].find("c")->level == "1");
    CHECK(p[0].find("missing") == nullptr);
  }

  TEST_CASE("cell posteriors at zero coefficients are one half") {
    const Dataset data = mixed_data(3, 120);
    const ModelSpec m = parse_formula("y ~ A + B + x");
    const FocalGrid grid = focal_grid(data, {"A", "B"});
    const auto profiles = build_profiles(data, {"x"});
    const auto cells = predict_cells(single_model(Eigen::MatrixXd::Zero(50, 6)), {m}, data, grid, profiles);
    CHECK(cells.cells.size() == 24);
    for (const auto& c : cells.cells) {
      CHECK((c.draws.array() == 0.5).all());
      CHECK(c.summary.median == 0.5);
    }
    CHECK(&cells.at(3, 0.75) == &cells.cells[3 * 3 + 2]);
    CHECK_THROWS(cells.at(3, 0.6));
  }

  TEST_CASE("cell summaries match a sort oracle") {
    const Dataset data = mixed_data(4, 200);
    const ModelSpec m = parse_formula("y ~ A + B + x");
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    Eigen::MatrixXd betas(301, 6);
    for (Eigen::Index s = 0; s < betas.rows(); ++s)
      for (Eigen::Index j = 0; j < 6; ++j) betas(s, j) = 0.5 * z(rng);
    const auto cells =
        predict_cells(single_model(betas), {m}, data, focal_grid(data, {"A", "B"}), build_profiles(data, {"x"}));
    for (const auto& c : cells.cells) {
      const std::vector<double> v(c.draws.data(), c.draws.data() + c.draws.size());
      CHECK(c.summary.median == oracle::quantile7(v, 0.5));
      CHECK(c.summary.q05 == oracle::quantile7(v, 0.05));
      CHECK(c.summary.q95 == oracle::quantile7(v, 0.95));
      CHECK(c.summary.q05 <= c.summary.median);
      CHECK(c.summary.median <= c.summary.q95);
    }
  }

  TEST_CASE("profile must supply every model variable") {
    const Dataset data = mixed_data(6, 50);
    const ModelSpec m = parse_formula("y ~ A + x + c");
    const FocalGrid grid = focal_grid(data, {"A"});
    CHECK_THROWS_AS(profile_dataset(data, {m}, grid, build_profiles(data, {"x"})), ConfigError);
    CHECK(profile_dataset(data, {m}, grid, build_profiles(data, {"x", "c"})).rows() == 6);
  }

  TEST_CASE("gaps") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u;
    Eigen::VectorXd d(100);
    for (auto& v : d) v = u(rng);
    const GapPosterior self = gap_posterior(cell_with(d, "a"), cell_with(d, "a"));
    CHECK((self.draws.array() == 0.0).all());

    const GapPosterior g =
        gap_posterior(cell_with(Eigen::VectorXd::Constant(10, 0.6), "r"), cell_with(Eigen::VectorXd::Constant(10, 0.45), "c"));
    CHECK(g.summary.median == doctest::Approx(0.15));
    CHECK(g.summary.q05 == doctest::Approx(0.15));
    CHECK_THROWS(gap_posterior(cell_with(d, "a"), cell_with(Eigen::VectorXd::Zero(3), "b")));
  }

  TEST_CASE("gap table orientation") {
    const Dataset data = mixed_data(8, 200);
    const ModelSpec m = parse_formula("y ~ A + B + x");
    Eigen::MatrixXd betas = Eigen::MatrixXd::Zero(40, 6);
    betas.col(1).setConstant(1.0);  // A1 raises the risk
    const auto cells =
        predict_cells(single_model(betas), {m}, data, focal_grid(data, {"A", "B"}), build_profiles(data, {"x"}));
    const auto gaps = gap_table(cells, "A", "0", "1");
    CHECK(gaps.size() == 12);
    for (const auto& g : gaps) CHECK(g.summary.median < 0.0);
    const auto flipped = gap_table(cells, "A", "0", "1", GapConvention::comparison_minus_reference);
    for (std::size_t i = 0; i < gaps.size(); ++i) CHECK(flipped[i].summary.median == -gaps[i].summary.median);
    CHECK_THROWS_AS(gap_table(cells, "x", "0", "1"), ConfigError);
  }
}
