#pragma once
// Reference implementations used to check the library. Each one is written
// from its textbook definition, deliberately naive, and shares no code with
// src/.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Type-7 sample quantile: h = (n - 1) p, interpolate between floor and ceil.
inline double quantile7(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Bernoulli log-likelihood summed in long double with the textbook formula.
inline double log_lik(const Eigen::VectorXd& beta, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  long double total = 0.0L;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    long double eta = 0.0L;
    for (Eigen::Index j = 0; j < X.cols(); ++j) eta += static_cast<long double>(X(i, j)) * beta[j];
    const long double p = 1.0L / (1.0L + std::exp(-eta));
    total += y[i] > 0.5 ? std::log(p) : std::log1p(-p);
  }
  return static_cast<double>(total);
}

// Central differences of a scalar function.
inline Eigen::VectorXd finite_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                       const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd up = x, down = x;
    up[j] += h;
    down[j] -= h;
    g[j] = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

// Best value of f over the 3-simplex grid with spacing 1/steps.
struct GridOptimum {
  double value = -std::numeric_limits<double>::infinity();
  Eigen::Vector3d w;
};

inline GridOptimum simplex_grid_max(const std::function<double(const Eigen::VectorXd&)>& f, int steps = 200) {
  GridOptimum best;
  for (int a = 0; a <= steps; ++a) {
    for (int b = 0; a + b <= steps; ++b) {
      Eigen::VectorXd w(3);
      w << a, b, steps - a - b;
      w /= steps;
      const double v = f(w);
      if (v > best.value) {
        best.value = v;
        best.w = w;
      }
    }
  }
  return best;
}

// log mean exp over a vector, computed in long double.
inline double log_mean_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  long double s = 0.0L;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(static_cast<long double>(v[i] - m));
  return m + static_cast<double>(std::log(s / static_cast<long double>(v.size())));
}

// Standard normal CDF.
inline double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// P(y = 1 | x > 1) for x ~ N(0, 1), y ~ Bernoulli(inv_logit(b x)), by
// composite Simpson quadrature on [1, 12].
inline double truncated_logistic_mean(double b) {
  const int n = 20000;
  const double lo = 1.0, hi = 12.0, h = (hi - lo) / n;
  auto g = [&](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI) / (1.0 + std::exp(-b * x)); };
  double s = g(lo) + g(hi);
  for (int i = 1; i < n; ++i) s += g(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0 / (1.0 - phi_cdf(1.0));
}

// Between/within variance ratio of two equally long chains (no splitting,
// no ranks): the textbook potential scale reduction factor.
inline double classic_rhat(const std::vector<std::vector<double>>& chains) {
  const double m = static_cast<double>(chains.size());
  const double n = static_cast<double>(chains.front().size());
  std::vector<double> means;
  double within = 0.0;
  for (const auto& c : chains) {
    double mean = 0.0;
    for (double v : c) mean += v;
    mean /= n;
    means.push_back(mean);
    double ss = 0.0;
    for (double v : c) ss += (v - mean) * (v - mean);
    within += ss / (n - 1.0);
  }
  within /= m;
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= m;
  double between = 0.0;
  for (double v : means) between += (v - grand) * (v - grand);
  between *= n / (m - 1.0);
  const double var_plus = (n - 1.0) / n * within + between / n;
  return std::sqrt(var_plus / within);
}

}  // namespace oracle
