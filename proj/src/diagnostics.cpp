#include <algorithm>
#include <cmath>
#include <numeric>

#include "bstack/error.hpp"
#include "bstack/quantile.hpp"
#include "bstack/sampler.hpp"

namespace bstack {

namespace {

// Inverse standard normal CDF: rational approximation refined by one Halley step.
double normal_quantile(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - p_low) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

// Halves each chain (dropping the middle draw of odd-length chains).
Eigen::MatrixXd split_chains(const Eigen::MatrixXd& chains) {
  const Eigen::Index n = chains.rows(), half = n / 2;
  Eigen::MatrixXd out(half, 2 * chains.cols());
  for (Eigen::Index c = 0; c < chains.cols(); ++c) {
    out.col(2 * c) = chains.col(c).head(half);
    out.col(2 * c + 1) = chains.col(c).tail(half);
  }
  return out;
}

Eigen::MatrixXd rank_normalize(const Eigen::MatrixXd& x) {
  const Eigen::Index size = x.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(size));
  std::iota(order.begin(), order.end(), 0);
  const double* data = x.data();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return data[a] < data[b]; });
  Eigen::MatrixXd z(x.rows(), x.cols());
  double* out = z.data();
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && data[order[j + 1]] == data[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based average rank of ties
    const double u = (avg_rank - 0.375) / (static_cast<double>(size) + 0.25);
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = normal_quantile(u);
    i = j + 1;
  }
  return z;
}

bool degenerate(const Eigen::MatrixXd& x) {
  if (!x.allFinite()) return true;
  return x.maxCoeff() == x.minCoeff();
}

double rhat_basic(const Eigen::MatrixXd& chains) {
  const double n = static_cast<double>(chains.rows());
  const Eigen::Index m = chains.cols();
  const Eigen::VectorXd means = chains.colwise().mean().transpose();
  Eigen::VectorXd vars(m);
  for (Eigen::Index c = 0; c < m; ++c)
    vars[c] = (chains.col(c).array() - means[c]).square().sum() / (n - 1.0);
  const double w = vars.mean();
  const double b = n * (means.array() - means.mean()).square().sum() / static_cast<double>(m - 1);
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

// ESS with Geyer's initial monotone sequence on the (already split) chains.
double ess_basic(const Eigen::MatrixXd& chains) {
  const Eigen::Index n = chains.rows(), m = chains.cols();
  const double total = static_cast<double>(n * m);
  if (n < 4 || degenerate(chains)) return total;

  const Eigen::VectorXd means = chains.colwise().mean().transpose();
  Eigen::MatrixXd centered = chains.rowwise() - means.transpose();
  auto mean_acov = [&](Eigen::Index lag) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < m; ++c)
      sum += centered.col(c).head(n - lag).dot(centered.col(c).tail(n - lag)) / static_cast<double>(n);
    return sum / static_cast<double>(m);
  };

  const double nd = static_cast<double>(n);
  const double mean_var = mean_acov(0) * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += (means.array() - means.mean()).square().sum() / static_cast<double>(m - 1);

  std::vector<double> rho(static_cast<std::size_t>(n), 0.0);
  auto rho_at = [&](Eigen::Index lag) { return 1.0 - (mean_var - mean_acov(lag)) / var_plus; };
  double rho_even = 1.0;
  double rho_odd = rho_at(1);
  rho[0] = rho_even;
  rho[1] = rho_odd;
  Eigen::Index t = 0;
  while (t < n - 5 && !std::isnan(rho_even + rho_odd) && rho_even + rho_odd > 0) {
    t += 2;
    rho_even = rho_at(t);
    rho_odd = rho_at(t + 1);
    if (rho_even + rho_odd >= 0) {
      rho[static_cast<std::size_t>(t)] = rho_even;
      rho[static_cast<std::size_t>(t + 1)] = rho_odd;
    }
  }
  const Eigen::Index max_t = t;
  if (rho_even > 0) rho[static_cast<std::size_t>(max_t)] = rho_even;

  // Geyer's initial monotone sequence.
  t = 0;
  while (t <= max_t - 4) {
    t += 2;
    const auto i = static_cast<std::size_t>(t);
    if (rho[i] + rho[i + 1] > rho[i - 2] + rho[i - 1]) {
      rho[i] = (rho[i - 2] + rho[i - 1]) / 2.0;
      rho[i + 1] = rho[i];
    }
  }
  double tau = -1.0;
  for (Eigen::Index lag = 0; lag < max_t; ++lag) tau += 2.0 * rho[static_cast<std::size_t>(lag)];
  tau += rho[static_cast<std::size_t>(max_t)];
  tau = std::max(tau, 1.0 / std::log10(total));
  return std::min(total / tau, total);
}

Eigen::MatrixXd reshape_chains(const PosteriorDraws& draws, Eigen::Index param) {
  const Eigen::Index per = draws.per_chain();
  Eigen::MatrixXd out(per, draws.chains());
  for (int c = 0; c < draws.chains(); ++c) out.col(c) = draws.draws.col(param).segment(c * per, per);
  return out;
}

}  // namespace

double split_rhat(const Eigen::MatrixXd& chains) { return rhat_basic(split_chains(chains)); }

double rank_normalized_rhat(const Eigen::MatrixXd& chains) {
  if (degenerate(chains)) return 1.0;
  const Eigen::MatrixXd split = split_chains(chains);
  const double bulk = rhat_basic(rank_normalize(split));
  std::vector<double> all(split.data(), split.data() + split.size());
  const double med = quantile<double>(all, 0.5);
  const Eigen::MatrixXd folded = (split.array() - med).abs().matrix();
  const double tail = degenerate(folded) ? 1.0 : rhat_basic(rank_normalize(folded));
  return std::max(bulk, tail);
}

double ess(const Eigen::MatrixXd& chains) { return ess_basic(split_chains(chains)); }

double ess_bulk(const Eigen::MatrixXd& chains) {
  const Eigen::MatrixXd split = split_chains(chains);
  if (degenerate(split)) return static_cast<double>(split.size());
  return ess_basic(rank_normalize(split));
}

double ess_tail(const Eigen::MatrixXd& chains) {
  const Eigen::MatrixXd split = split_chains(chains);
  std::vector<double> all(split.data(), split.data() + split.size());
  std::sort(all.begin(), all.end());
  double result = static_cast<double>(split.size());
  for (double prob : {0.05, 0.95}) {
    const double q = quantile_sorted<double>(all, prob);
    const Eigen::MatrixXd indicator = (split.array() <= q).cast<double>().matrix();
    result = std::min(result, ess_basic(indicator));
  }
  return result;
}

Diagnostics diagnose(const PosteriorDraws& draws) {
  if (draws.chains() < 2)
    throw ConfigError("diagnostics: split R-hat needs at least 2 chains; rerun the sampler with chains >= 2");
  if (draws.per_chain() < 4) throw ConfigError("diagnostics: need at least 4 draws per chain");
  Diagnostics d;
  d.labels = draws.labels;
  d.rhat.resize(draws.dim());
  d.ess_bulk.resize(draws.dim());
  d.ess_tail.resize(draws.dim());
  for (Eigen::Index j = 0; j < draws.dim(); ++j) {
    const Eigen::MatrixXd chains = reshape_chains(draws, j);
    d.rhat[j] = rank_normalized_rhat(chains);
    d.ess_bulk[j] = ess_bulk(chains);
    d.ess_tail[j] = ess_tail(chains);
  }
  d.divergences = draws.total_divergences();
  d.saturated = draws.total_saturated();
  return d;
}

nlohmann::json to_json(const Diagnostics& d) {
  nlohmann::json params = nlohmann::json::array();
  for (Eigen::Index j = 0; j < d.rhat.size(); ++j) {
    params.push_back({{"parameter", j < static_cast<Eigen::Index>(d.labels.size()) ? d.labels[static_cast<std::size_t>(j)]
                                                                                     : std::to_string(j)},
                      {"rhat", d.rhat[j]},
                      {"ess_bulk", d.ess_bulk[j]},
                      {"ess_tail", d.ess_tail[j]}});
  }
  return {{"parameters", params}, {"divergences", d.divergences}, {"max_steps_saturated", d.saturated},
          {"max_rhat", d.max_rhat()}};
}

}  // namespace bstack
