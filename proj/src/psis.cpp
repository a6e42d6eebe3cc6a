#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bstack/error.hpp"
#include "bstack/loo.hpp"

namespace bstack {

namespace {

double log_sum_exp(const Eigen::VectorXd& x) {
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x.array() - m).exp().sum());
}

}  // namespace

double gpd_quantile(double prob, double k, double sigma) {
  if (std::isnan(sigma) || sigma <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  if (k == 0.0) return -sigma * std::log1p(-prob);
  return sigma * std::expm1(-k * std::log1p(-prob)) / k;
}

GpdFit gpd_fit(std::span<const double> x) {
  const auto n = static_cast<Eigen::Index>(x.size());
  if (n < 2) throw Error("gpd_fit: need at least two exceedances");
  constexpr double prior = 3.0;
  constexpr int min_grid = 30;
  const Eigen::Index grid = min_grid + static_cast<Eigen::Index>(std::floor(std::sqrt(static_cast<double>(n))));
  const auto quartile_index = static_cast<std::size_t>(std::floor(static_cast<double>(n) / 4.0 + 0.5)) - 1;
  const double x_star = x[std::min(quartile_index, x.size() - 1)];
  const double x_max = x.back();

  Eigen::VectorXd theta(grid), profile(grid);
  for (Eigen::Index j = 0; j < grid; ++j) {
    theta[j] = 1.0 / x_max +
               (1.0 - std::sqrt(static_cast<double>(grid) / (static_cast<double>(j + 1) - 0.5))) / prior / x_star;
    const double a = -theta[j];
    double mean_log = 0.0;
    for (double xi : x) mean_log += std::log1p(a * xi);
    mean_log /= static_cast<double>(n);
    profile[j] = static_cast<double>(n) * (std::log(a / mean_log) - mean_log - 1.0);
  }
  const double norm = log_sum_exp(profile);
  const Eigen::VectorXd w = (profile.array() - norm).exp();
  const double theta_hat = theta.dot(w);

  double k = 0.0;
  for (double xi : x) k += std::log1p(-theta_hat * xi);
  k /= static_cast<double>(n);
  const double sigma = -k / theta_hat;
  constexpr double a = 10.0;
  const double nd = static_cast<double>(n);
  k = k * nd / (nd + a) + a * 0.5 / (nd + a);
  if (std::isnan(k)) k = std::numeric_limits<double>::infinity();
  return {k, sigma};
}

SmoothedWeights psis_smooth(const Eigen::VectorXd& log_ratios) {
  const Eigen::Index s = log_ratios.size();
  const double raw_max = log_ratios.maxCoeff();
  Eigen::VectorXd lw = log_ratios.array() - raw_max;
  SmoothedWeights out;
  out.khat = -std::numeric_limits<double>::infinity();

  const auto tail_len = static_cast<Eigen::Index>(std::min(std::ceil(0.2 * static_cast<double>(s)),
                                                           std::ceil(3.0 * std::sqrt(static_cast<double>(s)))));
  if (tail_len >= 5 && tail_len < s) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(s));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return lw[a] < lw[b]; });
    const Eigen::Index first_tail = s - tail_len;
    const double tail_min = lw[order[static_cast<std::size_t>(first_tail)]];
    const double tail_max = lw[order.back()];
    if (std::abs(tail_max - tail_min) >= std::numeric_limits<double>::epsilon() / 100.0) {
      const double cutoff = lw[order[static_cast<std::size_t>(first_tail - 1)]];
      const double exp_cutoff = std::exp(cutoff);
      std::vector<double> exceed(static_cast<std::size_t>(tail_len));
      for (Eigen::Index t = 0; t < tail_len; ++t)
        exceed[static_cast<std::size_t>(t)] = std::exp(lw[order[static_cast<std::size_t>(first_tail + t)]]) - exp_cutoff;
      const GpdFit fit = gpd_fit(exceed);
      out.khat = fit.k;
      if (std::isfinite(fit.k)) {
        for (Eigen::Index t = 0; t < tail_len; ++t) {
          const double prob = (static_cast<double>(t + 1) - 0.5) / static_cast<double>(tail_len);
          const double q = gpd_quantile(prob, fit.k, fit.sigma) + exp_cutoff;
          if (std::isfinite(q) && q > 0.0) lw[order[static_cast<std::size_t>(first_tail + t)]] = std::log(q);
        }
      }
    }
  }
  // Truncate at the raw maximum, which is 0 after the shift above.
  lw = lw.cwiseMin(0.0);
  out.log_weights = lw.array() - log_sum_exp(lw);
  return out;
}

LooResult psis_loo(const LogLikMatrix& loglik) {
  const Eigen::MatrixXd& L = loglik.values;
  if (L.rows() < 100)
    throw ConfigError("psis_loo: need at least 100 draws (got " + std::to_string(L.rows()) +
                      "); use exact_loo for small draw counts");
  if (!L.allFinite()) throw Error("psis_loo: non-finite log-likelihood entries");
  LooResult out;
  out.method = LooMethod::psis;
  out.model = loglik.model;
  out.pointwise.resize(L.cols());
  out.khat.resize(L.cols());
  for (Eigen::Index i = 0; i < L.cols(); ++i) {
    const SmoothedWeights w = psis_smooth(-L.col(i));
    out.pointwise[i] = log_sum_exp(w.log_weights + L.col(i));
    out.khat[i] = w.khat;
    if (w.khat > kKhatWarn) out.high_khat.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

}  // namespace bstack
