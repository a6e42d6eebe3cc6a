#include <doctest.h>

#include <random>

#include "bstack/error.hpp"
#include "bstack/logistic.hpp"
#include "bstack/model_spec.hpp"
#include "oracles.hpp"

using namespace bstack;

namespace {

struct Problem {
  Eigen::MatrixXd X;
  Eigen::VectorXd y, beta;
};

Problem random_problem(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  Problem pr;
  pr.X.resize(n, p);
  pr.y.resize(n);
  pr.beta.resize(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    pr.X(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < p; ++j) pr.X(i, j) = z(rng);
    pr.y[i] = u(rng) < 0.4 ? 1.0 : 0.0;
  }
  for (Eigen::Index j = 0; j < p; ++j) pr.beta[j] = 0.5 * z(rng);
  return pr;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("log-likelihood closed forms") {
    const Eigen::MatrixXd X4 = Eigen::MatrixXd::Ones(4, 1);
    const Eigen::VectorXd y4 = (Eigen::VectorXd(4) << 1, 0, 1, 0).finished();
    CHECK(log_likelihood(Eigen::VectorXd::Zero(1), X4, y4) == doctest::Approx(4.0 * std::log(0.5)).epsilon(1e-14));
    CHECK(log_likelihood(Eigen::VectorXd::Zero(1), X4, y4) == doctest::Approx(-2.772588722239781));

    const Eigen::MatrixXd X3 = Eigen::MatrixXd::Ones(3, 1);
    const Eigen::VectorXd y3 = (Eigen::VectorXd(3) << 1, 0, 1).finished();
    const Eigen::VectorXd b = Eigen::VectorXd::Constant(1, 0.5);
    CHECK(log_likelihood(b, X3, y3) == doctest::Approx(-1.92223095254032).epsilon(1e-12));
    CHECK(log_likelihood(b, X3, y3) == doctest::Approx(oracle::log_lik(b, X3, y3)).epsilon(1e-14));

    // Saturation: y = 1 with a huge linear predictor.
    CHECK(bernoulli_logit_lpmf(1.0, 800.0) == 0.0);
    CHECK(bernoulli_logit_lpmf(0.0, -800.0) == 0.0);
    CHECK(std::isfinite(bernoulli_logit_lpmf(0.0, 800.0)));
  }

  TEST_CASE("pointwise terms") {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(5, 1);
    const Eigen::VectorXd y = (Eigen::VectorXd(5) << 1, 0, 1, 1, 0).finished();
    CHECK((pointwise_log_lik(Eigen::VectorXd::Zero(1), X, y).array() == std::log(0.5)).all());
    const double eta = std::log(0.9 / 0.1);
    CHECK(bernoulli_logit_lpmf(1.0, eta) == doctest::Approx(-0.1053605156578263).epsilon(1e-12));

    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 20; ++rep) {
      const auto pr = random_problem(rng, 60, 4);
      const double total = log_likelihood(pr.beta, pr.X, pr.y);
      CHECK(std::abs(pointwise_log_lik(pr.beta, pr.X, pr.y).sum() - total) <= 1e-12 * std::abs(total));
      CHECK(total == doctest::Approx(oracle::log_lik(pr.beta, pr.X, pr.y)).epsilon(1e-12));
      CHECK(total <= 0.0);
    }
  }

  TEST_CASE("row permutation leaves the likelihood unchanged") {
    std::mt19937_64 rng(2);
    const auto pr = random_problem(rng, 40, 3);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(40);
    perm.setIdentity();
    std::shuffle(perm.indices().data(), perm.indices().data() + 40, rng);
    const Eigen::MatrixXd Xp = perm * pr.X;
    const Eigen::VectorXd yp = perm * pr.y;
    CHECK(log_likelihood(pr.beta, Xp, yp) == doctest::Approx(log_likelihood(pr.beta, pr.X, pr.y)).epsilon(1e-13));
  }

  TEST_CASE("gradient matches finite differences") {
    std::mt19937_64 rng(3);
    const PriorConfig prior;
    for (int rep = 0; rep < 10; ++rep) {
      const auto pr = random_problem(rng, 50, 5);
      const Eigen::VectorXd g = grad_log_posterior(pr.beta, pr.X, pr.y, true, prior);
      const Eigen::VectorXd fd = oracle::finite_gradient(
          [&](const Eigen::VectorXd& b) { return log_posterior(b, pr.X, pr.y, true, prior); }, pr.beta);
      CHECK(((g - fd).cwiseAbs().array() / fd.cwiseAbs().array().max(1.0)).maxCoeff() < 1e-6);
    }
  }

  TEST_CASE("intercept gradient vanishes by symmetry") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(4, 2);
    X.col(0).setOnes();
    const Eigen::VectorXd y = (Eigen::VectorXd(4) << 1, 0, 1, 0).finished();
    const Eigen::VectorXd g = grad_log_posterior(Eigen::VectorXd::Zero(2), X, y, true, PriorConfig{});
    CHECK(g[0] == 0.0);
  }

  TEST_CASE("prior dominates far from the origin") {
    std::mt19937_64 rng(4);
    const auto pr = random_problem(rng, 30, 3);
    double prev = log_posterior(pr.beta, pr.X, pr.y, true, PriorConfig{});
    for (double scale : {2.0, 4.0, 8.0, 16.0, 32.0}) {
      const double lp = log_posterior(Eigen::VectorXd(pr.beta * scale), pr.X, pr.y, true, PriorConfig{});
      CHECK(lp < prev);
      prev = lp;
    }
  }

  TEST_CASE("working parameterization agrees with the design scale") {
    std::mt19937_64 rng(5);
    auto pr = random_problem(rng, 80, 4);
    pr.X.col(2).array() += 3.0;
    const LogisticPosterior post(pr.X, pr.y, true, PriorConfig{});
    const Eigen::VectorXd q = post.from_original(pr.beta);
    CHECK((post.to_original(q) - pr.beta).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::VectorXd grad;
    const double lp = post(q, grad);
    // The likelihood part is invariant to centering.
    const double lik = log_likelihood(pr.beta, pr.X, pr.y);
    const double prior_part = -0.5 * q.cwiseQuotient(post.scales()).squaredNorm();
    CHECK(lp == doctest::Approx(lik + prior_part).epsilon(1e-12));
    const Eigen::VectorXd fd = oracle::finite_gradient(
        [&](const Eigen::VectorXd& x) {
          Eigen::VectorXd g;
          return post(x, g);
        },
        q);
    CHECK((grad - fd).cwiseAbs().maxCoeff() < 1e-5);
  }

  TEST_CASE("predictive probabilities") {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(1, 1);
    CHECK(predict_prob(Eigen::VectorXd::Zero(1), X)[0] == 0.5);
    CHECK(predict_prob(Eigen::VectorXd::Constant(1, 0.0820), X)[0] == doctest::Approx(0.5205).epsilon(1e-4));
    CHECK(inv_logit(-10.0) == doctest::Approx(4.5398e-5).epsilon(1e-4));
    CHECK(inv_logit(-800.0) >= 0.0);
    CHECK(inv_logit(-700.0) > 0.0);
    CHECK(inv_logit(800.0) == 1.0);
  }

  TEST_CASE("probabilities increase in a coefficient with a positive column") {
    Eigen::MatrixXd X(3, 2);
    X << 1, 0.5, 1, 2.0, 1, 0.1;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd prev = predict_prob(b, X);
    for (int step = 0; step < 10; ++step) {
      b[1] += 0.3;
      const Eigen::VectorXd p = predict_prob(b, X);
      CHECK((p.array() > prev.array()).all());
      prev = p;
    }
  }

  TEST_CASE("bad inputs are rejected") {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(2, 2);
    const Eigen::VectorXd y = Eigen::VectorXd::Ones(2);
    CHECK_THROWS(log_likelihood(Eigen::VectorXd::Zero(3), X, y));
    Eigen::VectorXd nan_beta = Eigen::VectorXd::Zero(2);
    nan_beta[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(log_likelihood(nan_beta, X, y));
    PriorConfig bad;
    bad.coef_scale = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS(log_posterior(Eigen::VectorXd::Zero(2), X, y, true, bad));
  }

  TEST_CASE("model spec JSON and formula round trip") {
    const ModelSpec f = parse_formula("LD ~ FEM + SES + books + FEM:SES", "cand");
    CHECK(f.outcome == "LD");
    CHECK(f.terms == std::vector<std::string>{"FEM", "SES", "books"});
    CHECK(f.interactions.size() == 1);
    const ModelSpec back = model_spec_from_json(to_json(f));
    CHECK(to_json(back) == to_json(f));
    CHECK_FALSE(parse_formula("y ~ x - 1").intercept);
  }

  TEST_CASE("ensemble structure: core shared, candidates disjoint") {
    const ModelSpec core = parse_formula("y ~ FEM + SES");
    CHECK_NOTHROW(validate_ensemble(core, {parse_formula("y ~ FEM + SES + a"), parse_formula("y ~ FEM + SES + b")}));
    CHECK_THROWS_AS(validate_ensemble(core, {parse_formula("y ~ FEM + a")}), ConfigError);
    CHECK_THROWS_AS(validate_ensemble(core, {parse_formula("y ~ FEM + SES + a"), parse_formula("y ~ FEM + SES + a")}),
                    ConfigError);
  }
}
