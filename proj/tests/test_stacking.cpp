#include <doctest.h>

#include <random>

#include "bstack/error.hpp"
#include "bstack/stacking.hpp"
#include "oracles.hpp"

using namespace bstack;

namespace {

Eigen::MatrixXd random_density(std::mt19937_64& rng, Eigen::Index n, Eigen::Index k) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Eigen::MatrixXd P(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) P(i, j) = u(rng);
  return P;
}

LpdMatrix lpd(const Eigen::MatrixXd& P) {
  LpdMatrix m;
  m.density = P;
  for (Eigen::Index k = 0; k < P.cols(); ++k) m.models.push_back("m" + std::to_string(k));
  return m;
}

void check_simplex(const Eigen::VectorXd& w) {
  CHECK(w.minCoeff() >= -1e-10);
  CHECK(std::abs(w.sum() - 1.0) <= 1e-10);
}

std::shared_ptr<const PosteriorDraws> constant_draws(Eigen::Index S, double value) {
  auto d = std::make_shared<PosteriorDraws>();
  d->draws = Eigen::MatrixXd::Constant(S, 1, value);
  for (Eigen::Index s = 0; s < S; ++s) d->draws(s, 0) += 1e-3 * static_cast<double>(s);
  d->chain.assign(static_cast<std::size_t>(S), 0);
  d->step_size = {1.0};
  return d;
}

}  // namespace

TEST_SUITE("stacking") {
  TEST_CASE("log-score weights: trivial cases") {
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd one = random_density(rng, 20, 1);
    CHECK(stack_weights_logscore(lpd(one)).weights[0] == 1.0);

    Eigen::MatrixXd twin(20, 2);
    twin.col(0) = one.col(0);
    twin.col(1) = one.col(0);
    const auto tw = stack_weights_logscore(lpd(twin)).weights;
    CHECK(tw[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(tw[1] == doctest::Approx(0.5).epsilon(1e-12));

    Eigen::MatrixXd dom(20, 2);
    dom.col(1) = one.col(0) * 0.5;
    dom.col(0) = one.col(0);
    const auto dw = stack_weights_logscore(lpd(dom)).weights;
    CHECK(std::abs(dw[0] - 1.0) < 1e-6);
    CHECK(std::abs(dw[1]) < 1e-6);
  }

  TEST_CASE("log-score weights match a simplex grid search") {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 10; ++rep) {
      const Eigen::MatrixXd P = random_density(rng, 40, 3);
      const StackingWeights sw = stack_weights_logscore(lpd(P));
      check_simplex(sw.weights);
      const auto grid = oracle::simplex_grid_max([&](const Eigen::VectorXd& w) { return log_score_objective(P, w); });
      CHECK(sw.objective >= grid.value - 1e-4);
      CHECK(sw.objective == doctest::Approx(log_score_objective(P, sw.weights)).epsilon(1e-14));
      for (Eigen::Index k = 0; k < 3; ++k)
        CHECK(sw.objective >= log_score_objective(P, Eigen::VectorXd::Unit(3, k)) - 1e-9);
    }
  }

  TEST_CASE("log-score argmax is invariant to a global log shift") {
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd P = random_density(rng, 40, 3);
    const auto a = stack_weights_logscore(lpd(P));
    const auto b = stack_weights_logscore(lpd(P * std::exp(-2.0)));
    CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(b.objective == doctest::Approx(a.objective - 2.0).epsilon(1e-9));
  }

  TEST_CASE("least-squares weights") {
    std::mt19937_64 rng(4);
    const Eigen::MatrixXd F1 = random_density(rng, 30, 1);
    std::bernoulli_distribution coin(0.4);
    Eigen::VectorXd y(30);
    for (Eigen::Index i = 0; i < 30; ++i) y[i] = coin(rng) ? 1.0 : 0.0;
    CHECK(stack_weights_lsq(F1, y).weights[0] == 1.0);

    const Eigen::MatrixXd F = random_density(rng, 30, 3);
    const Eigen::VectorXd exact = F.col(1);
    const auto w = stack_weights_lsq(F, exact).weights;
    CHECK(std::abs(w[1] - 1.0) < 1e-10);

    for (int rep = 0; rep < 10; ++rep) {
      const Eigen::MatrixXd G = random_density(rng, 30, 3);
      const StackingWeights sw = stack_weights_lsq(G, y);
      check_simplex(sw.weights);
      const auto grid =
          oracle::simplex_grid_max([&](const Eigen::VectorXd& v) { return -squared_error_objective(G, y, v); });
      CHECK(sw.objective <= -grid.value + 1e-6);
    }
  }

  TEST_CASE("objective tags round trip") {
    CHECK(parse_objective("logscore") == StackingObjective::log_score);
    CHECK(parse_objective("lsq") == StackingObjective::squared_error);
    CHECK(to_string(StackingObjective::squared_error) == "lsq");
    CHECK_THROWS_AS(parse_objective("bma"), ConfigError);
  }

  TEST_CASE("slot allocation") {
    const Eigen::VectorXd reported = (Eigen::VectorXd(4) << 0.533, 0.100, 0.172, 0.195).finished();
    CHECK(allocate_slots(reported, 4000) == std::vector<int>{2132, 400, 688, 780});
    CHECK(allocate_slots(Eigen::Vector2d(0.5, 0.5), 4000) == std::vector<int>{2000, 2000});

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u;
    for (int rep = 0; rep < 50; ++rep) {
      Eigen::VectorXd w(5);
      for (Eigen::Index k = 0; k < 5; ++k) w[k] = u(rng);
      w /= w.sum();
      const auto counts = allocate_slots(w, 1000);
      int total = 0;
      for (Eigen::Index k = 0; k < 5; ++k) {
        const int c = counts[static_cast<std::size_t>(k)];
        CHECK(c >= static_cast<int>(std::floor(1000 * w[k])));
        CHECK(c <= static_cast<int>(std::ceil(1000 * w[k])));
        total += c;
      }
      CHECK(total == 1000);
    }
  }

  TEST_CASE("stacked draws route slots to model draws") {
    const auto a = constant_draws(400, 1.0), b = constant_draws(400, -1.0);
    const StackedDraws only_a = stack_draws(Eigen::Vector2d(1.0, 0.0), {a, b});
    for (int s = 0; s < only_a.slots(); ++s) CHECK(only_a.coefficients(s)[0] == a->draws(s, 0));

    const Eigen::Vector2d w(0.3, 0.7);
    const StackedDraws mix = stack_draws(w, {a, b});
    CHECK(mix.counts == std::vector<int>{120, 280});
    for (int s = 0; s < mix.slots(); ++s) {
      const auto& src = mix.model_of_slot[static_cast<std::size_t>(s)] == 0 ? a : b;
      CHECK(mix.coefficients(s)[0] == src->draws(s, 0));
    }

    const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 1);
    const StackedPrediction pred = stacked_predictive(mix, {X, X});
    const double expected = w[0] * posterior_mean_prob(*a, X)[0] + w[1] * posterior_mean_prob(*b, X)[0];
    CHECK(std::abs(pred.mean[0] - expected) <= 1.0 / 400.0);
    CHECK_THROWS(stack_draws(Eigen::Vector3d(0.2, 0.3, 0.5), {a, b}));
  }

  TEST_CASE("Brier score") {
    CHECK(brier(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)) == 0.0);
    const Eigen::VectorXd y = (Eigen::VectorXd(4) << 1, 0, 0, 1).finished();
    CHECK(brier(Eigen::VectorXd::Constant(4, 0.5), y) == 0.25);
    const Eigen::Vector2d p(0.7, 0.2), yy(1, 0);
    CHECK(brier(p, yy) == doctest::Approx(0.065).epsilon(1e-14));
    CHECK(brier(p, yy, BrierOrientation::signed_vector) == doctest::Approx(-0.13).epsilon(1e-14));
    CHECK_THROWS_AS(brier(Eigen::Vector2d(1.2, 0.1), yy), Error);
  }

  TEST_CASE("Brier score is permutation invariant and convex") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u;
    for (int rep = 0; rep < 50; ++rep) {
      Eigen::VectorXd p(10), q(10), y(10);
      for (Eigen::Index i = 0; i < 10; ++i) {
        p[i] = u(rng);
        q[i] = u(rng);
        y[i] = u(rng) < 0.5 ? 1.0 : 0.0;
      }
      CHECK(brier(p.reverse(), y.reverse()) == doctest::Approx(brier(p, y)).epsilon(1e-14));
      CHECK(brier(0.5 * (p + q), y) <= 0.5 * (brier(p, y) + brier(q, y)) + 1e-15);
    }
  }
}
