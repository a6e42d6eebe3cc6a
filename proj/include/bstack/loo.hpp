#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bstack/design.hpp"
#include "bstack/sampler.hpp"

namespace bstack {

/// S x n pointwise log-likelihoods: entry (s, i) = log p(y_i | beta^(s)).
struct LogLikMatrix {
  Eigen::MatrixXd values;
  std::string model;
};

LogLikMatrix loglik_matrix(const PosteriorDraws& draws, const DesignMatrix& design, std::string model = {});

enum class LooMethod { psis, exact };

struct LooResult {
  Eigen::VectorXd pointwise;  // log LOO predictive density per observation
  Eigen::VectorXd khat;       // Pareto shape per observation (psis only)
  LooMethod method = LooMethod::psis;
  std::vector<std::size_t> high_khat;  // observations with khat > kKhatWarn
  std::string model;

  double total() const { return pointwise.sum(); }
};

inline constexpr double kKhatWarn = 0.7;

/// Generalized Pareto fit (shape k, scale sigma) to ascending exceedances,
/// using the profile-likelihood quadrature estimator with the weakly
/// informative shrinkage of k toward 0.5.
struct GpdFit {
  double k = 0.0;
  double sigma = 0.0;
};
GpdFit gpd_fit(std::span<const double> sorted_exceedances);
double gpd_quantile(double prob, double k, double sigma);

/// Pareto-smoothed log importance weights for one observation.
struct SmoothedWeights {
  Eigen::VectorXd log_weights;  // normalized: logsumexp == 0
  double khat = 0.0;            // -inf when the tail is constant (no smoothing)
};
SmoothedWeights psis_smooth(const Eigen::VectorXd& log_ratios);

/// Requires S >= 100; use exact_loo for smaller draw counts.
LooResult psis_loo(const LogLikMatrix& loglik);

struct ExactLooOptions {
  std::size_t max_rows = 2000;
  double max_rhat = 1.05;
};

/// Refits the model n times, each time without one observation, and
/// evaluates the held-out row under the refit's draws.
LooResult exact_loo(const DesignMatrix& design, const PriorConfig& prior, const SamplerConfig& config,
                    const ExactLooOptions& options = {});

/// LOO predictive probability that y_i = 1, recovered from the pointwise
/// density of the observed outcome.
Eigen::VectorXd loo_probability(const LooResult& loo, const Eigen::VectorXd& y);

std::string loo_to_csv(const LooResult& loo);
nlohmann::json loo_summary_json(const LooResult& loo);

}  // namespace bstack
