#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "bstack/design.hpp"
#include "bstack/model_spec.hpp"

namespace bstack {

/// log(1 + exp(x)) without overflow.
template <typename Scalar>
Scalar log1p_exp(Scalar x) {
  using std::exp;
  using std::log1p;
  return x > Scalar(0) ? x + log1p(exp(-x)) : log1p(exp(x));
}

template <typename Scalar>
Scalar inv_logit(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

/// log p(y | eta) for a Bernoulli outcome on the log-odds scale.
template <typename Scalar>
Scalar bernoulli_logit_lpmf(Scalar y, Scalar eta) {
  if (y == Scalar(1)) return -log1p_exp(-eta);
  if (y == Scalar(0)) return -log1p_exp(eta);
  return y * eta - log1p_exp(eta);
}

namespace detail {

template <typename DerivedB, typename DerivedX>
void check_dims(const Eigen::MatrixBase<DerivedB>& beta, const Eigen::MatrixBase<DerivedX>& X) {
  if (beta.size() != X.cols())
    throw std::invalid_argument("parameter dimension " + std::to_string(beta.size()) +
                                " does not match design width " + std::to_string(X.cols()));
  if (!beta.allFinite()) throw std::invalid_argument("non-finite parameter vector");
}

}  // namespace detail

template <typename DerivedB, typename DerivedX, typename DerivedY>
Eigen::Matrix<typename DerivedB::Scalar, Eigen::Dynamic, 1> pointwise_log_lik(
    const Eigen::MatrixBase<DerivedB>& beta, const Eigen::MatrixBase<DerivedX>& X,
    const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedB::Scalar;
  detail::check_dims(beta, X);
  if (y.size() != X.rows()) throw std::invalid_argument("outcome length does not match design rows");
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> eta = X * beta;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) out[i] = bernoulli_logit_lpmf<Scalar>(y[i], eta[i]);
  return out;
}

template <typename DerivedB, typename DerivedX, typename DerivedY>
typename DerivedB::Scalar log_likelihood(const Eigen::MatrixBase<DerivedB>& beta,
                                         const Eigen::MatrixBase<DerivedX>& X,
                                         const Eigen::MatrixBase<DerivedY>& y) {
  return pointwise_log_lik(beta, X, y).sum();
}

template <typename DerivedB, typename DerivedX>
Eigen::Matrix<typename DerivedB::Scalar, Eigen::Dynamic, 1> predict_prob(const Eigen::MatrixBase<DerivedB>& beta,
                                                                         const Eigen::MatrixBase<DerivedX>& X) {
  using Scalar = typename DerivedB::Scalar;
  detail::check_dims(beta, X);
  return (X * beta).unaryExpr([](Scalar eta) { return inv_logit(eta); });
}

/// Per-coefficient prior standard deviations for a design whose first column
/// is the intercept when `intercept` is set.
template <typename DerivedX>
Eigen::VectorXd prior_scales(const Eigen::MatrixBase<DerivedX>& X, bool intercept, const PriorConfig& prior) {
  prior.validate();
  Eigen::VectorXd scales(X.cols());
  const auto n = X.rows();
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (intercept && j == 0) {
      scales[j] = prior.intercept_scale;
      continue;
    }
    scales[j] = prior.coef_scale;
    if (prior.autoscale && n > 1) {
      const double mean = X.col(j).mean();
      const double sd = std::sqrt((X.col(j).array() - mean).square().sum() / static_cast<double>(n - 1));
      if (sd > 0.0) scales[j] = prior.coef_scale / sd;
    }
  }
  return scales;
}

/// Log posterior under independent Normal(0, scale_j) priors, including the
/// normalizing constants of the priors.
template <typename DerivedB, typename DerivedX, typename DerivedY>
typename DerivedB::Scalar log_posterior(const Eigen::MatrixBase<DerivedB>& beta,
                                        const Eigen::MatrixBase<DerivedX>& X,
                                        const Eigen::MatrixBase<DerivedY>& y, const Eigen::VectorXd& scales) {
  using Scalar = typename DerivedB::Scalar;
  if (scales.size() != beta.size()) throw std::invalid_argument("prior scale dimension mismatch");
  if ((scales.array() <= 0.0).any()) throw std::invalid_argument("non-positive prior scale");
  Scalar lp = log_likelihood(beta, X, y);
  const Scalar half_log_2pi = Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const Scalar z = beta[j] / scales[j];
    lp -= Scalar(0.5) * z * z + std::log(Scalar(scales[j])) + half_log_2pi;
  }
  return lp;
}

template <typename DerivedB, typename DerivedX, typename DerivedY>
Eigen::Matrix<typename DerivedB::Scalar, Eigen::Dynamic, 1> grad_log_posterior(
    const Eigen::MatrixBase<DerivedB>& beta, const Eigen::MatrixBase<DerivedX>& X,
    const Eigen::MatrixBase<DerivedY>& y, const Eigen::VectorXd& scales) {
  if (scales.size() != beta.size()) throw std::invalid_argument("prior scale dimension mismatch");
  if ((scales.array() <= 0.0).any()) throw std::invalid_argument("non-positive prior scale");
  const auto p = predict_prob(beta, X);
  return X.transpose() * (y - p) - beta.cwiseQuotient(scales.cwiseAbs2());
}

template <typename DerivedB, typename DerivedX, typename DerivedY>
typename DerivedB::Scalar log_posterior(const Eigen::MatrixBase<DerivedB>& beta,
                                        const Eigen::MatrixBase<DerivedX>& X,
                                        const Eigen::MatrixBase<DerivedY>& y, bool intercept,
                                        const PriorConfig& prior) {
  return log_posterior(beta, X, y, prior_scales(X, intercept, prior));
}

template <typename DerivedB, typename DerivedX, typename DerivedY>
Eigen::Matrix<typename DerivedB::Scalar, Eigen::Dynamic, 1> grad_log_posterior(
    const Eigen::MatrixBase<DerivedB>& beta, const Eigen::MatrixBase<DerivedX>& X,
    const Eigen::MatrixBase<DerivedY>& y, bool intercept, const PriorConfig& prior) {
  return grad_log_posterior(beta, X, y, prior_scales(X, intercept, prior));
}

/// A differentiable log density the sampler can explore.
class LogDensity {
 public:
  virtual ~LogDensity() = default;
  virtual Eigen::Index dim() const = 0;
  /// Returns log p(q) and writes its gradient into `grad`.
  virtual double operator()(const Eigen::VectorXd& q, Eigen::VectorXd& grad) const = 0;
};

/// Posterior of a logistic regression in the sampler's working
/// parameterization: non-intercept columns are centered so the intercept
/// decouples from the slopes. The intercept prior applies to the centered
/// intercept; `to_original` maps draws back to the design's coefficients.
class LogisticPosterior final : public LogDensity {
 public:
  LogisticPosterior(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, bool intercept, const PriorConfig& prior)
      : X_(X), y_(y), centers_(Eigen::VectorXd::Zero(X.cols())), intercept_(intercept && X.cols() > 0) {
    if (y.size() != X.rows()) throw std::invalid_argument("outcome length does not match design rows");
    if (intercept_ && X.rows() > 0) {
      for (Eigen::Index j = 1; j < X.cols(); ++j) {
        centers_[j] = X.col(j).mean();
        X_.col(j).array() -= centers_[j];
      }
    }
    scales_ = prior_scales(X_, intercept_, prior);
    inv_var_ = scales_.cwiseAbs2().cwiseInverse();
  }

  Eigen::Index dim() const override { return X_.cols(); }

  double operator()(const Eigen::VectorXd& q, Eigen::VectorXd& grad) const override {
    const Eigen::VectorXd eta = X_ * q;
    double lp = 0.0;
    Eigen::VectorXd resid(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      lp += bernoulli_logit_lpmf(y_[i], eta[i]);
      resid[i] = y_[i] - inv_logit(eta[i]);
    }
    lp -= 0.5 * q.cwiseAbs2().dot(inv_var_);
    grad.noalias() = X_.transpose() * resid;
    grad -= q.cwiseProduct(inv_var_);
    return lp;
  }

  Eigen::VectorXd to_original(const Eigen::VectorXd& q) const {
    Eigen::VectorXd beta = q;
    if (intercept_) beta[0] -= centers_.dot(q);
    return beta;
  }

  Eigen::VectorXd from_original(const Eigen::VectorXd& beta) const {
    Eigen::VectorXd q = beta;
    if (intercept_) q[0] += centers_.dot(beta);
    return q;
  }

  const Eigen::VectorXd& scales() const { return scales_; }

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  Eigen::VectorXd centers_;
  Eigen::VectorXd scales_;
  Eigen::VectorXd inv_var_;
  bool intercept_;
};

}  // namespace bstack
