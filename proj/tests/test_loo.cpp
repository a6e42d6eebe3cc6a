#include <doctest.h>

#include <random>

#include "bstack/error.hpp"
#include "bstack/loo.hpp"
#include "bstack/synthetic.hpp"
#include "oracles.hpp"

using namespace bstack;

namespace {

PosteriorDraws fake_draws(const Eigen::MatrixXd& values) {
  PosteriorDraws d;
  d.draws = values;
  d.chain.assign(static_cast<std::size_t>(values.rows()), 0);
  d.step_size = {1.0};
  return d;
}

DesignMatrix small_design(std::uint64_t seed, int n) {
  const auto synth = generate_synthetic(nlohmann::json::parse(R"({"n": )" + std::to_string(n) + R"(, "predictors": [
      {"name": "a", "dist": "normal", "coef": 0.8}]})"),
                                        seed);
  return build_design(synth.truth, synth.data);
}

std::vector<double> gpd_sample(double k, double sigma, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u;
  std::vector<double> x;
  for (int i = 0; i < n; ++i) x.push_back(sigma * (std::pow(1.0 - u(rng), -k) - 1.0) / k);
  std::sort(x.begin(), x.end());
  return x;
}

}  // namespace

TEST_SUITE("loo") {
  TEST_CASE("log-likelihood matrix") {
    const DesignMatrix dm = small_design(1, 50);
    const LogLikMatrix zero = loglik_matrix(fake_draws(Eigen::MatrixXd::Zero(1, 2)), dm);
    CHECK((zero.values.array() == std::log(0.5)).all());

    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    Eigen::MatrixXd betas(100, 2);
    for (Eigen::Index s = 0; s < 100; ++s) betas.row(s) << z(rng), z(rng);
    const LogLikMatrix L = loglik_matrix(fake_draws(betas), dm);
    REQUIRE(L.values.rows() == 100);
    REQUIRE(L.values.cols() == 50);
    for (Eigen::Index s = 0; s < 100; ++s) {
      const Eigen::VectorXd b = betas.row(s).transpose();
      CHECK(L.values.row(s).sum() == doctest::Approx(oracle::log_lik(b, dm.X, dm.y)).epsilon(1e-12));
      CHECK(L.values.row(s).transpose() == pointwise_log_lik(b, dm.X, dm.y));
    }
    CHECK((L.values.array() <= 0.0).all());
  }

  TEST_CASE("GPD fit recovers known shapes") {
    for (double k : {0.2, 0.5, 0.9}) {
      const auto x = gpd_sample(k, 1.0, 2000, 7);
      const GpdFit fit = gpd_fit(x);
      CHECK(std::abs(fit.k - k) < 0.1);
      CHECK(std::abs(fit.sigma - 1.0) < 0.15);
    }
    CHECK(gpd_quantile(0.5, 0.0, 2.0) == doctest::Approx(2.0 * std::log(2.0)));
    CHECK(gpd_quantile(0.75, 0.5, 1.0) == doctest::Approx((std::pow(0.25, -0.5) - 1.0) / 0.5));
  }

  TEST_CASE("smoothed weights are a distribution and respect truncation") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    for (double spread : {0.1, 1.0, 3.0}) {
      Eigen::VectorXd lr(4000);
      for (Eigen::Index s = 0; s < lr.size(); ++s) lr[s] = spread * z(rng);
      const SmoothedWeights w = psis_smooth(lr);
      const Eigen::ArrayXd weights = w.log_weights.array().exp();
      CHECK((weights >= 0.0).all());
      CHECK(std::abs(weights.sum() - 1.0) < 1e-12);
      Eigen::Index low = 0;
      lr.minCoeff(&low);
      const Eigen::VectorXd rel = w.log_weights.array() - w.log_weights[low];
      CHECK(rel.maxCoeff() <= lr.maxCoeff() - lr[low] + 1e-9);
    }
  }

  TEST_CASE("constant log-likelihood needs no smoothing") {
    const LogLikMatrix L{Eigen::MatrixXd::Constant(200, 5, -0.4), "m"};
    const LooResult r = psis_loo(L);
    for (Eigen::Index i = 0; i < 5; ++i) {
      CHECK(r.pointwise[i] == doctest::Approx(-0.4).epsilon(1e-14));
      CHECK(std::isinf(r.khat[i]));
      CHECK(r.khat[i] < 0.0);
    }
    CHECK(r.high_khat.empty());
    CHECK(r.total() == doctest::Approx(-2.0));
  }

  TEST_CASE("heavy-tailed ratios are flagged") {
    const Eigen::Index S = 4000;
    Eigen::MatrixXd L(S, 2);
    for (Eigen::Index s = 0; s < S; ++s) {
      const double u = (static_cast<double>(s) + 0.5) / static_cast<double>(S);
      L(s, 0) = -2.5 * -std::log1p(-u) - 0.01;  // ratios (1-u)^-2.5
      L(s, 1) = s == 17 ? -40.0 : -0.5 - 1e-4 * static_cast<double>(s % 13);
    }
    const LooResult r = psis_loo(LogLikMatrix{L, "heavy"});
    CHECK(r.khat[0] > 0.7);
    CHECK(r.khat[1] > 0.7);
    CHECK(r.high_khat == std::vector<std::size_t>{0, 1});
  }

  TEST_CASE("well-behaved ratios are not flagged and match the plain estimate") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    Eigen::MatrixXd L(4000, 3);
    for (Eigen::Index s = 0; s < L.rows(); ++s)
      for (Eigen::Index i = 0; i < 3; ++i) L(s, i) = -0.7 + 0.05 * z(rng);
    const LooResult r = psis_loo(LogLikMatrix{L, "m"});
    for (Eigen::Index i = 0; i < 3; ++i) {
      CHECK(r.khat[i] < 0.5);
      // Raw importance sampling: elpd_i = -log mean_s exp(-L[s,i]).
      const double raw = -oracle::log_mean_exp(-L.col(i));
      CHECK(std::abs(r.pointwise[i] - raw) < 1e-3);
    }
  }

  TEST_CASE("too few draws for PSIS") {
    CHECK_THROWS_AS(psis_loo(LogLikMatrix{Eigen::MatrixXd::Constant(50, 2, -0.5), "m"}), ConfigError);
  }

  TEST_CASE("total is permutation invariant") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    Eigen::MatrixXd L(400, 6);
    for (Eigen::Index s = 0; s < L.rows(); ++s)
      for (Eigen::Index i = 0; i < 6; ++i) L(s, i) = -std::abs(z(rng)) - 0.1 * static_cast<double>(i);
    Eigen::MatrixXd Lp = L;
    Lp.col(0).swap(Lp.col(5));
    Lp.col(2).swap(Lp.col(3));
    CHECK(psis_loo(LogLikMatrix{L, ""}).total() == doctest::Approx(psis_loo(LogLikMatrix{Lp, ""}).total()).epsilon(1e-13));
  }

  TEST_CASE("exact LOO: degenerate and symmetric cases") {
    SamplerConfig cfg;
    cfg.warmup = 300;
    cfg.draws = 500;
    cfg.seed = 9;
    DesignMatrix one;
    one.X = Eigen::MatrixXd::Ones(1, 1);
    one.y = Eigen::VectorXd::Ones(1);
    one.intercept = true;
    one.labels = {"(Intercept)"};
    CHECK_THROWS(exact_loo(one, PriorConfig{}, cfg));

    DesignMatrix ten;
    ten.X = Eigen::MatrixXd::Ones(10, 1);
    ten.y = (Eigen::VectorXd(10) << 1, 1, 1, 1, 1, 0, 0, 0, 0, 0).finished();
    ten.intercept = true;
    ten.labels = {"(Intercept)"};
    const LooResult r = exact_loo(ten, PriorConfig{}, cfg);
    CHECK(r.method == LooMethod::exact);
    CHECK(r.pointwise.maxCoeff() - r.pointwise.minCoeff() < 0.05);
    // Out-of-sample probability of the held-out class is about 4/9 shrunk toward 1/2.
    CHECK(std::exp(r.pointwise.mean()) == doctest::Approx(0.45).epsilon(0.1));
  }

  TEST_CASE("LOO probabilities recover P(y = 1)") {
    LooResult r;
    r.pointwise = (Eigen::VectorXd(2) << std::log(0.8), std::log(0.3)).finished();
    const Eigen::VectorXd y = (Eigen::VectorXd(2) << 1, 0).finished();
    const Eigen::VectorXd p = loo_probability(r, y);
    CHECK(p[0] == doctest::Approx(0.8));
    CHECK(p[1] == doctest::Approx(0.7));
  }
}
