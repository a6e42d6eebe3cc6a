#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bstack/design.hpp"
#include "bstack/logistic.hpp"

namespace bstack {

enum class Trajectory { nuts, fixed };

struct SamplerConfig {
  int chains = 4;
  int warmup = 1000;
  int draws = 1000;  // retained per chain
  double target_accept = 0.8;
  int max_steps = 1024;  // leapfrog steps per iteration (tree depth = log2)
  std::uint64_t seed = 0;
  Trajectory trajectory = Trajectory::nuts;
  int fixed_steps = 16;  // only for Trajectory::fixed
  unsigned threads = 0;  // 0 = library default

  void validate() const;
  int total_draws() const { return chains * draws; }
};

nlohmann::json to_json(const SamplerConfig& config);
SamplerConfig sampler_config_from_json(const nlohmann::json& j, SamplerConfig defaults = {});

/// Retained draws of all chains, stacked chain-major: rows
/// [c * per_chain, (c + 1) * per_chain) belong to chain c.
struct PosteriorDraws {
  Eigen::MatrixXd draws;  // S x p
  std::vector<int> chain;
  std::vector<std::string> labels;
  std::vector<double> step_size;     // per chain, after adaptation
  Eigen::MatrixXd inv_metric;        // chains x p, diagonal of the inverse mass matrix
  std::vector<int> divergences;      // per chain, retained iterations
  std::vector<int> saturated;        // per chain, iterations that hit max_steps
  std::vector<double> mean_accept;   // per chain
  SamplerConfig config;

  Eigen::Index size() const { return draws.rows(); }
  Eigen::Index dim() const { return draws.cols(); }
  int chains() const { return static_cast<int>(step_size.size()); }
  Eigen::Index per_chain() const { return chains() ? size() / chains() : 0; }
  int total_divergences() const;
  int total_saturated() const;
};

/// Adaptive HMC on an arbitrary differentiable density. Warmup adapts the
/// step size by dual averaging toward `target_accept` and a diagonal inverse
/// metric from windowed draw variances. Chains run concurrently with
/// independent random streams derived from `config.seed`.
PosteriorDraws sample(const LogDensity& target, const SamplerConfig& config,
                      std::optional<Eigen::VectorXd> init = std::nullopt);

/// Samples a logistic-regression posterior and reports draws on the scale
/// of the design's coefficients (the working parameterization centers
/// the non-intercept columns).
PosteriorDraws sample_logistic(const DesignMatrix& design, const PriorConfig& prior, const SamplerConfig& config);

/// One leapfrog step with a diagonal inverse metric, exposed for testing.
void leapfrog(const LogDensity& target, const Eigen::VectorXd& inv_metric, double step, Eigen::VectorXd& q,
              Eigen::VectorXd& p, Eigen::VectorXd& grad, double& log_density);

struct Diagnostics {
  std::vector<std::string> labels;
  Eigen::VectorXd rhat;
  Eigen::VectorXd ess_bulk;
  Eigen::VectorXd ess_tail;
  int divergences = 0;
  int saturated = 0;

  double max_rhat() const { return rhat.size() ? rhat.maxCoeff() : 1.0; }
};

/// Rank-normalized split R-hat (maximum of the bulk and folded versions),
/// bulk ESS and tail ESS per parameter. Requires >= 2 chains with >= 4 draws.
Diagnostics diagnose(const PosteriorDraws& draws);
nlohmann::json to_json(const Diagnostics& diagnostics);

/// Lower-level pieces of diagnose(), on a draws x chains matrix.
double split_rhat(const Eigen::MatrixXd& chains);
double rank_normalized_rhat(const Eigen::MatrixXd& chains);
double ess(const Eigen::MatrixXd& chains);
double ess_bulk(const Eigen::MatrixXd& chains);
double ess_tail(const Eigen::MatrixXd& chains);

/// Draw-store CSV: columns chain, iteration, then one per parameter.
void write_draws_csv(const PosteriorDraws& draws, const std::filesystem::path& path);
std::string draws_to_csv(const PosteriorDraws& draws);
PosteriorDraws read_draws_csv(const std::filesystem::path& path);

}  // namespace bstack
