#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bstack/dataset.hpp"
#include "bstack/model_spec.hpp"
#include "bstack/sampler.hpp"
#include "bstack/stacking.hpp"

namespace bstack {

using BinaryMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// S x n replicated outcome sets, one per posterior (or stacked) draw.
struct ReplicatedOutcomes {
  BinaryMatrix y_rep;
  std::string source;
  std::uint64_t seed = 0;
};

/// Row s ~ Bernoulli(prob.row(s)); each row has its own random stream so
/// the result does not depend on the number of worker threads.
ReplicatedOutcomes replicate(const Eigen::MatrixXd& prob, std::uint64_t seed, std::string source = {});
ReplicatedOutcomes replicate(const PosteriorDraws& draws, const Eigen::MatrixXd& X, std::uint64_t seed,
                             std::string source = {});
ReplicatedOutcomes replicate(const StackedDraws& stacked, const std::vector<Eigen::MatrixXd>& designs,
                             std::uint64_t seed, std::string source = "stack");

/// Test statistic T applied to a group's outcomes.
struct TestStatistic {
  enum class Kind { mean, sd, quantile } kind = Kind::mean;
  double prob = 0.5;  // for Kind::quantile

  std::string name() const;
  double operator()(std::span<const double> values) const;
  static TestStatistic parse(std::string_view text);  // "mean", "sd", "q0.9"
};

struct GroupStat {
  std::string label;                // e.g. "FEM=0, SES=1"
  std::vector<std::string> levels;  // one per grouping column
  std::size_t size = 0;
  double observed = 0.0;
  Eigen::VectorXd replicated;  // S values
};

struct GroupedPpc {
  std::vector<std::string> grouping;
  std::string source;
  std::string statistic;
  std::vector<GroupStat> groups;
  std::vector<std::string> warnings;
};

/// Statistic per crossed level of the categorical `grouping` columns
/// (first column varies slowest). An empty grouping list means one group
/// of all rows. Empty crossed levels are dropped with a warning.
GroupedPpc grouped_stat(const ReplicatedOutcomes& rep, const Eigen::VectorXd& y, const Dataset& data,
                        const std::vector<std::string>& grouping, const TestStatistic& statistic = {});

/// P(T_rep > T_obs) with ties counted half.
double p_one_sided(std::span<const double> replicated, double observed);
/// P(T_rep < T_obs) with ties counted half; p_plus + p_minus == 1.
double p_minus(std::span<const double> replicated, double observed);
/// Two-sided posterior predictive p-value: min(1, 2 min(p_plus, p_minus)).
double tspppv(std::span<const double> replicated, double observed);

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
};

/// Freedman-Diaconis bin width with at least 10 bins; counts sum to the sample size.
Histogram histogram(std::span<const double> values);

struct GroupReport {
  std::string group;
  std::vector<std::string> levels;
  std::size_t size = 0;
  double observed = 0.0;
  double p_plus = 0.0;
  double p_minus = 0.0;
  double tspppv = 0.0;
  Histogram histogram;
};

struct PpcReport {
  std::string source;
  std::string statistic;
  std::vector<std::string> grouping;
  std::vector<GroupReport> groups;
  std::vector<std::string> warnings;
};

PpcReport make_report(const GroupedPpc& grouped);
nlohmann::json to_json(const PpcReport& report);

/// A predictive distribution to check: `probabilities` yields the S x n
/// matrix of per-draw success probabilities on the observed rows.
struct PpcSource {
  std::string name;
  std::function<Eigen::MatrixXd()> probabilities;
};

/// Grouped check by a column deliberately left out of every model. Fails
/// if any model spec uses the column.
std::vector<PpcReport> holdout_check(const std::vector<ModelSpec>& models, const std::vector<PpcSource>& sources,
                                     const Dataset& data, const std::string& holdout, std::uint64_t seed,
                                     const TestStatistic& statistic = {});

/// SVG histogram of the replicated statistic with a vertical line at the observed value.
std::string histogram_svg(const GroupReport& group, const std::string& title);

}  // namespace bstack
