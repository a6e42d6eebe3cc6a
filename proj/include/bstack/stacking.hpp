#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bstack/loo.hpp"
#include "bstack/sampler.hpp"

namespace bstack {

/// n x K pointwise LOO predictive densities (not logs).
struct LpdMatrix {
  Eigen::MatrixXd density;
  std::vector<std::string> models;

  static LpdMatrix from_loo(const std::vector<LooResult>& results);
};

enum class StackingObjective { log_score, squared_error };

std::string_view to_string(StackingObjective objective);
StackingObjective parse_objective(std::string_view text);

struct StackingWeights {
  Eigen::VectorXd weights;
  double objective = 0.0;  // mean log score, or residual sum of squares
  StackingObjective tag = StackingObjective::log_score;
  std::vector<double> trace;  // objective after each iteration
  int iterations = 0;
  bool converged = false;
};

/// Mean log score (1/n) sum_i log(sum_k w_k P[i,k]).
double log_score_objective(const Eigen::MatrixXd& density, const Eigen::VectorXd& weights);
/// sum_i (y_i - sum_k w_k F[i,k])^2.
double squared_error_objective(const Eigen::MatrixXd& predictions, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& weights);

/// Maximizes the mean log score over the simplex: softmax parameters,
/// BFGS ascent from the uniform point, then a check against every vertex.
StackingWeights stack_weights_logscore(const LpdMatrix& lpd);

/// Minimizes the squared error of the stacked LOO point predictions over
/// the simplex with a primal active-set method.
StackingWeights stack_weights_lsq(const Eigen::MatrixXd& predictions, const Eigen::VectorXd& y);

/// Largest-remainder split of `slots` draws proportional to `weights`;
/// ties in the remainders go to the lower model index.
std::vector<int> allocate_slots(const Eigen::VectorXd& weights, int slots);

/// Slot-to-model assignment of a stacked predictive distribution. Slot s
/// takes draw s of model `model_of_slot[s]`; models are interleaved so
/// each one's slots spread evenly across the chain blocks.
struct StackedDraws {
  std::vector<int> model_of_slot;
  std::vector<int> counts;
  std::vector<std::shared_ptr<const PosteriorDraws>> sources;

  int slots() const { return static_cast<int>(model_of_slot.size()); }
  /// Coefficient vector used at slot s.
  Eigen::VectorXd coefficients(int slot) const;
};

StackedDraws stack_draws(const Eigen::VectorXd& weights, std::vector<std::shared_ptr<const PosteriorDraws>> sources);

/// Per-slot probabilities (S x rows) for rows described by one design per
/// model, and their per-row mean.
struct StackedPrediction {
  Eigen::MatrixXd prob;
  Eigen::VectorXd mean;
};

StackedPrediction stacked_predictive(const StackedDraws& stacked, const std::vector<Eigen::MatrixXd>& designs);

/// Posterior mean probability per row for one model.
Eigen::VectorXd posterior_mean_prob(const PosteriorDraws& draws, const Eigen::MatrixXd& X);

enum class BrierOrientation {
  positive,  // mean (y - p)^2, lower is better
  signed_vector  // mean of -||e_i - p_i||^2 over both outcome categories
};

double brier(const Eigen::VectorXd& prob, const Eigen::VectorXd& y,
             BrierOrientation orientation = BrierOrientation::positive);

}  // namespace bstack
