#include <cmath>
#include <limits>

#include "bstack/dataset.hpp"
#include "bstack/error.hpp"
#include "bstack/logistic.hpp"
#include "bstack/loo.hpp"
#include "bstack/parallel.hpp"
#include "bstack/random.hpp"

namespace bstack {

LogLikMatrix loglik_matrix(const PosteriorDraws& draws, const DesignMatrix& design, std::string model) {
  if (draws.dim() != design.cols())
    throw Error("loglik_matrix: draws have " + std::to_string(draws.dim()) + " parameters, design has " +
                std::to_string(design.cols()) + " columns");
  if (design.y.size() != design.rows()) throw Error("loglik_matrix: design has no outcome vector");
  LogLikMatrix out;
  out.model = std::move(model);
  out.values.resize(draws.size(), design.rows());
  const Eigen::MatrixXd eta = draws.draws * design.X.transpose();  // S x n
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    const double yi = design.y[i];
    for (Eigen::Index s = 0; s < draws.size(); ++s) out.values(s, i) = bernoulli_logit_lpmf(yi, eta(s, i));
  }
  return out;
}

LooResult exact_loo(const DesignMatrix& design, const PriorConfig& prior, const SamplerConfig& config,
                    const ExactLooOptions& options) {
  const Eigen::Index n = design.rows();
  if (n < 2) throw ConfigError("exact_loo: need at least 2 observations (a fold would have no training rows)");
  if (static_cast<std::size_t>(n) > options.max_rows)
    throw ConfigError("exact_loo: " + std::to_string(n) + " rows exceeds the refit limit of " +
                      std::to_string(options.max_rows));

  LooResult out;
  out.method = LooMethod::exact;
  out.pointwise.resize(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t fold) {
    const auto i = static_cast<Eigen::Index>(fold);
    DesignMatrix train;
    train.intercept = design.intercept;
    train.labels = design.labels;
    train.X.resize(n - 1, design.cols());
    train.y.resize(n - 1);
    train.X.topRows(i) = design.X.topRows(i);
    train.X.bottomRows(n - 1 - i) = design.X.bottomRows(n - 1 - i);
    train.y.head(i) = design.y.head(i);
    train.y.tail(n - 1 - i) = design.y.tail(n - 1 - i);

    SamplerConfig fold_config = config;
    fold_config.seed = derive_seed(config.seed, static_cast<std::uint64_t>(fold) + 1);
    fold_config.threads = 1;
    const PosteriorDraws draws = sample_logistic(train, prior, fold_config);
    if (draws.chains() >= 2) {
      const Diagnostics diag = diagnose(draws);
      if (diag.max_rhat() > options.max_rhat)
        throw DiagnosticsError("exact_loo: refit without observation " + std::to_string(fold + 1) +
                               " did not converge (max R-hat " + std::to_string(diag.max_rhat()) + ")");
    }
    const Eigen::VectorXd eta = draws.draws * design.X.row(i).transpose();
    double m = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd ll(eta.size());
    for (Eigen::Index s = 0; s < eta.size(); ++s) {
      ll[s] = bernoulli_logit_lpmf(design.y[i], eta[s]);
      m = std::max(m, ll[s]);
    }
    out.pointwise[i] = m + std::log((ll.array() - m).exp().mean());
  });
  return out;
}

Eigen::VectorXd loo_probability(const LooResult& loo, const Eigen::VectorXd& y) {
  if (y.size() != loo.pointwise.size()) throw Error("loo_probability: outcome length mismatch");
  Eigen::VectorXd p(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double density = std::exp(loo.pointwise[i]);
    p[i] = y[i] == 1.0 ? density : 1.0 - density;
  }
  return p;
}

std::string loo_to_csv(const LooResult& loo) {
  std::string out = "observation,elpd,khat\n";
  for (Eigen::Index i = 0; i < loo.pointwise.size(); ++i) {
    out += std::to_string(i + 1) + "," + format_double(loo.pointwise[i]) + ",";
    if (loo.method == LooMethod::psis) {
      const double k = loo.khat[i];
      out += std::isfinite(k) ? format_double(k) : (k < 0 ? "-Inf" : "Inf");
    }
    out += '\n';
  }
  return out;
}

nlohmann::json loo_summary_json(const LooResult& loo) {
  nlohmann::json high = nlohmann::json::array();
  for (auto i : loo.high_khat) high.push_back(i + 1);
  double max_k = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < loo.khat.size(); ++i) max_k = std::max(max_k, loo.khat[i]);
  nlohmann::json j = {{"model", loo.model},
                      {"method", loo.method == LooMethod::psis ? "psis" : "exact"},
                      {"observations", loo.pointwise.size()},
                      {"elpd_loo", loo.total()},
                      {"khat_threshold", kKhatWarn},
                      {"high_khat_observations", high}};
  j["max_khat"] = std::isfinite(max_k) ? nlohmann::json(max_k) : nlohmann::json(nullptr);
  return j;
}

}  // namespace bstack
