#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "bstack/dataset.hpp"
#include "bstack/design.hpp"
#include "bstack/error.hpp"
#include "bstack/synthetic.hpp"
#include "oracles.hpp"

using namespace bstack;

namespace {

Schema ld_schema() { return parse_schema(R"({"LD": "outcome", "ESCS": "nonfocal"})"); }

std::vector<std::string> labels_of(const Dataset& d, const std::string& name) {
  const Column& c = d.column(name);
  std::vector<std::string> out;
  for (int code : c.codes) out.push_back(c.levels[static_cast<std::size_t>(code)]);
  return out;
}

Dataset numeric_dataset(const std::vector<double>& x) {
  Column y{"y", VariableRole::outcome, false, std::vector<double>(x.size(), 0.0), {}, {}};
  Column c{"x", VariableRole::nonfocal, false, x, {}, {}};
  return Dataset({y, c});
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("three-row CSV parses with roles") {
    const Dataset d = parse_csv("LD,ESCS\n1,-0.5\n0,0.25\n1,1.5\n", ld_schema());
    CHECK(d.rows() == 3);
    CHECK(d.outcome().name == "LD");
    CHECK(d.column("ESCS").values[2] == 1.5);
    CHECK(d.column("ESCS").role == VariableRole::nonfocal);
  }

  TEST_CASE("empty cell is rejected with its position") {
    try {
      parse_csv("LD,ESCS\n1,-0.5\n0,\n", ld_schema());
      FAIL("expected an error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("missing value at row 2, column ESCS") != std::string::npos);
    }
  }

  TEST_CASE("non-binary outcome is rejected") {
    CHECK_THROWS_AS(parse_csv("LD,ESCS\n0,1\n1,2\n2,3\n", ld_schema()), ConfigError);
  }

  TEST_CASE("schema column missing from header is rejected") {
    CHECK_THROWS_AS(parse_csv("LD\n0\n1\n", ld_schema()), ConfigError);
  }

  TEST_CASE("missing file is an error") {
    CHECK_THROWS_AS(load_csv("/nonexistent/data.csv", ld_schema()), ConfigError);
  }

  TEST_CASE("schema needs exactly one outcome") {
    CHECK_THROWS_AS(parse_schema(R"({"a": "focal"})"), ConfigError);
    CHECK_THROWS_AS(parse_schema(R"({"a": "outcome", "b": "outcome"})"), ConfigError);
  }

  TEST_CASE("weight columns are parsed with a warning") {
    const Schema s = parse_schema(R"({"y": "outcome", "w": "weight"})");
    CHECK(s.find("w")->role == VariableRole::ignore);
    CHECK(s.warnings.size() == 1);
  }

  TEST_CASE("schema levels fix level order") {
    const Schema s = parse_schema(R"({"y": "outcome", "g": {"role": "focal", "levels": ["b", "a"]}})");
    const Dataset d = parse_csv("y,g\n0,a\n1,b\n", s);
    CHECK(d.column("g").levels == std::vector<std::string>{"b", "a"});
    CHECK(d.column("g").codes == std::vector<int>{1, 0});
  }

  TEST_CASE("quoted fields follow RFC 4180") {
    const auto rec = parse_csv_records("a,b\n\"x, \"\"y\"\"\",2\n");
    REQUIRE(rec.size() == 2);
    CHECK(rec[1][0] == "x, \"y\"");
  }

  TEST_CASE("CSV round trip is bit exact") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    std::vector<double> x;
    for (int i = 0; i < 200; ++i) x.push_back(z(rng) * std::pow(10.0, i % 7 - 3));
    Dataset d = numeric_dataset(x);
    const Dataset back = parse_csv(to_csv(d), parse_schema(R"({"y": "outcome", "x": "nonfocal"})"));
    CHECK(back.column("x").values == x);
  }

  TEST_CASE("quartile bins of 1..4 and 0..7") {
    CHECK(labels_of(quartile_bin(numeric_dataset({1, 2, 3, 4}), "x", "q"), "q") ==
          std::vector<std::string>{"1", "2", "3", "4"});
    CHECK(labels_of(quartile_bin(numeric_dataset({0, 1, 2, 3, 4, 5, 6, 7}), "x", "q"), "q") ==
          std::vector<std::string>{"1", "1", "2", "2", "3", "3", "4", "4"});
  }

  TEST_CASE("quartile binning rejects degenerate input") {
    CHECK_THROWS_AS(quartile_bin(numeric_dataset({10, 10, 10, 10}), "x"), ConfigError);
  }

  TEST_CASE("quartile cuts are type-7 and counts balance without ties") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z;
    for (int n : {101, 400, 999}) {
      std::vector<double> x;
      for (int i = 0; i < n; ++i) x.push_back(z(rng));
      QuartileBinning b;
      const Dataset d = quartile_bin(numeric_dataset(x), "x", "q", std::nullopt, &b);
      CHECK(b.cuts[0] == oracle::quantile7(x, 0.25));
      CHECK(b.cuts[1] == oracle::quantile7(x, 0.5));
      CHECK(b.cuts[2] == oracle::quantile7(x, 0.75));
      std::vector<int> counts(4, 0);
      for (int c : d.column("q").codes) ++counts[static_cast<std::size_t>(c)];
      for (int c : counts) CHECK(std::abs(c - n / 4.0) <= 1.0);
    }
  }

  TEST_CASE("design columns: intercept, dummies, interactions") {
    const Schema s = parse_schema(R"({"y": "outcome", "A": {"role": "focal", "levels": ["0", "1"]},
                                     "B": {"role": "focal", "levels": ["0", "1"]}})");
    const Dataset d = parse_csv("y,A,B\n0,0,0\n1,0,1\n0,1,0\n1,1,1\n", s);
    const DesignMatrix dm = build_design(parse_formula("y ~ A + B + A:B"), d);
    REQUIRE(dm.cols() == 4);
    CHECK(dm.X.col(0).isOnes());
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(dm.X(i, 3) == dm.X(i, 1) * dm.X(i, 2));
    CHECK(dm.labels[3] == "A1:B1");
  }

  TEST_CASE("core model with a 4-level SES has 5 columns") {
    const Schema s = parse_schema(R"({"y": "outcome", "FEM": {"role": "focal", "levels": ["0", "1"]},
                                     "SES": {"role": "focal", "levels": ["1", "2", "3", "4"]}})");
    const Dataset d = parse_csv("y,FEM,SES\n0,0,1\n1,1,2\n0,0,3\n1,1,4\n0,1,1\n", s);
    const DesignMatrix dm = build_design(parse_formula("y ~ FEM + SES"), d);
    CHECK(dm.labels == std::vector<std::string>{"(Intercept)", "FEM1", "SES2", "SES3", "SES4"});
    CHECK(build_design(parse_formula("y ~ FEM"), d).cols() == 2);
  }

  TEST_CASE("holdout and unknown terms are rejected; rank deficiency only warns") {
    const Schema s = parse_schema(R"({"y": "outcome", "x": "nonfocal", "h": "holdout"})");
    const Dataset d = parse_csv("y,x,h\n0,1,1\n1,2,0\n0,3,1\n", s);
    CHECK_THROWS_AS(build_design(parse_formula("y ~ x + h"), d), ConfigError);
    CHECK_THROWS_AS(build_design(parse_formula("y ~ z"), d), ConfigError);
    const Dataset dup = d.with_column(Column{"x2", VariableRole::nonfocal, false, {2, 4, 6}, {}, {}});
    const DesignMatrix dm = build_design(parse_formula("y ~ x + x2"), dup);
    CHECK_FALSE(dm.warnings.empty());
  }

  TEST_CASE("design is deterministic") {
    const Schema s = parse_schema(R"({"y": "outcome", "x": "nonfocal", "g": {"role": "focal", "type": "categorical"}})");
    const Dataset d = parse_csv("y,x,g\n0,1,a\n1,2,b\n0,3,c\n1,4,a\n", s);
    const auto a = build_design(parse_formula("y ~ x + g + x:g"), d);
    const auto b = build_design(parse_formula("y ~ x + g + x:g"), d);
    CHECK(a.X == b.X);
    CHECK(a.labels == b.labels);
  }

  TEST_CASE("synthetic: zero coefficients give a balanced outcome") {
    const auto s = generate_synthetic(nlohmann::json::parse(R"({"n": 10000, "predictors": [
        {"name": "x", "dist": "normal", "coef": 0}]})"),
                                      5);
    const double mean = s.data.outcome_vector().mean();
    CHECK(mean >= 0.48);
    CHECK(mean <= 0.52);
  }

  TEST_CASE("synthetic: same seed, same data") {
    const auto cfg = nlohmann::json::parse(R"({"n": 50, "predictors": [{"name": "x", "dist": "normal", "coef": 1},
        {"name": "g", "dist": "categorical", "probs": [0.2, 0.3, 0.5], "coef": [0.5, -0.5]}]})");
    CHECK(to_csv(generate_synthetic(cfg, 9).data) == to_csv(generate_synthetic(cfg, 9).data));
    CHECK(to_csv(generate_synthetic(cfg, 9).data) != to_csv(generate_synthetic(cfg, 10).data));
  }

  TEST_CASE("synthetic: P(y=1 | x>1) matches quadrature") {
    const auto s = generate_synthetic(nlohmann::json::parse(R"({"n": 100000, "predictors": [
        {"name": "x", "dist": "normal", "coef": 2}]})"),
                                      17);
    const auto& x = s.data.column("x").values;
    const Eigen::VectorXd y = s.data.outcome_vector();
    double hits = 0, total = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] > 1.0) {
        total += 1;
        hits += y[static_cast<Eigen::Index>(i)];
      }
    const double expected = oracle::truncated_logistic_mean(2.0);
    CHECK(expected > 1.0 / (1.0 + std::exp(-2.0)));
    CHECK(expected < 1.0);
    CHECK(std::abs(hits / total - expected) < 0.02);
  }

  TEST_CASE("synthetic: invalid configs") {
    CHECK_THROWS_AS(generate_synthetic(nlohmann::json::parse(R"({"n": 0, "predictors": []})"), 1), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(nlohmann::json::parse(R"({"n": 5, "predictors": [
        {"name": "g", "dist": "categorical", "probs": [0.5, 0.5], "coef": [1, 2, 3]}]})"),
                                       1),
                    ConfigError);
  }
}
