#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "bstack/dataset.hpp"
#include "bstack/model_spec.hpp"

namespace bstack {

/// A generated dataset together with the model that produced it: `beta` is
/// aligned with build_design(truth, data).
struct SyntheticData {
  Dataset data;
  ModelSpec truth;
  Eigen::VectorXd beta;
  std::vector<std::string> labels;

  nlohmann::json truth_json() const;
};

/// Draws predictors in declaration order, then y ~ Bernoulli(inv_logit(X beta)).
///
/// The configuration is a JSON object:
///   n            number of rows (> 0)
///   outcome      outcome column name (default "y")
///   intercept    true intercept (default 0)
///   predictors   array of {name, dist, coef, role, ...} where dist is one of
///                normal{mean,sd}, uniform{min,max}, bernoulli{p,categorical},
///                categorical{probs,levels}; numeric predictors may carry
///                depends{earlier_name: weight} which shifts the value (or the
///                log-odds, for bernoulli) by the weighted earlier predictors
///   interactions array of {terms:[a,b,...], coef}
/// Categorical coefficients are arrays over levels (L entries with the
/// first ignored as base, or L-1 entries).
SyntheticData generate_synthetic(const nlohmann::json& config, std::uint64_t seed);

}  // namespace bstack
