#include "bstack/stacking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bstack/error.hpp"
#include "bstack/logistic.hpp"

namespace bstack {

namespace {

constexpr int kMaxIterations = 500;
constexpr double kGradTol = 1e-8;
constexpr double kDensityFloor = 1e-300;

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

// Mean log score and its gradient with respect to the softmax parameters.
double log_score_and_grad(const Eigen::MatrixXd& P, const Eigen::VectorXd& z, Eigen::VectorXd& grad_z) {
  const Eigen::VectorXd w = softmax(z);
  const Eigen::VectorXd mix = P * w;
  const double n = static_cast<double>(P.rows());
  const double f = mix.array().log().sum() / n;
  const Eigen::VectorXd grad_w = P.transpose() * mix.cwiseInverse() / n;
  grad_z = (w.array() * (grad_w.array() - w.dot(grad_w))).matrix();
  return f;
}

void clean_simplex(Eigen::VectorXd& w) {
  w = w.cwiseMax(0.0);
  w /= w.sum();
}

}  // namespace

LpdMatrix LpdMatrix::from_loo(const std::vector<LooResult>& results) {
  if (results.empty()) throw Error("LpdMatrix: no models");
  LpdMatrix out;
  const Eigen::Index n = results.front().pointwise.size();
  out.density.resize(n, static_cast<Eigen::Index>(results.size()));
  for (std::size_t k = 0; k < results.size(); ++k) {
    if (results[k].pointwise.size() != n) throw Error("LpdMatrix: models disagree on the number of observations");
    out.density.col(static_cast<Eigen::Index>(k)) =
        results[k].pointwise.array().max(std::log(kDensityFloor)).exp().max(kDensityFloor).min(1.0);
    out.models.push_back(results[k].model);
  }
  return out;
}

std::string_view to_string(StackingObjective objective) {
  return objective == StackingObjective::log_score ? "logscore" : "lsq";
}

StackingObjective parse_objective(std::string_view text) {
  if (text == "logscore" || text == "log-score") return StackingObjective::log_score;
  if (text == "lsq" || text == "squared-error") return StackingObjective::squared_error;
  throw ConfigError("unknown stacking objective '" + std::string(text) + "' (expected logscore or lsq)");
}

double log_score_objective(const Eigen::MatrixXd& density, const Eigen::VectorXd& weights) {
  return (density * weights).array().log().sum() / static_cast<double>(density.rows());
}

double squared_error_objective(const Eigen::MatrixXd& predictions, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& weights) {
  return (y - predictions * weights).squaredNorm();
}

StackingWeights stack_weights_logscore(const LpdMatrix& lpd) {
  const Eigen::MatrixXd& P = lpd.density;
  const Eigen::Index K = P.cols();
  if (K < 1 || P.rows() < 1) throw Error("stacking: need at least one model and one observation");
  if (static_cast<Eigen::Index>(lpd.models.size()) != K && !lpd.models.empty())
    throw Error("stacking: model names do not match density columns");

  StackingWeights out;
  out.tag = StackingObjective::log_score;
  if (K == 1) {
    out.weights = Eigen::VectorXd::Ones(1);
    out.objective = log_score_objective(P, out.weights);
    out.trace.push_back(out.objective);
    out.converged = true;
    return out;
  }

  // BFGS on -f(softmax(z)) with backtracking line search.
  Eigen::VectorXd z = Eigen::VectorXd::Zero(K), grad(K);
  double f = log_score_and_grad(P, z, grad);
  if (!std::isfinite(f)) throw Error("stacking: non-finite log score at the uniform start");
  Eigen::MatrixXd inv_hessian = Eigen::MatrixXd::Identity(K, K);
  out.trace.push_back(f);
  for (int it = 0; it < kMaxIterations; ++it) {
    if (grad.norm() < kGradTol) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd direction = inv_hessian * grad;  // ascent direction
    if (direction.dot(grad) <= 0) {
      inv_hessian.setIdentity();
      direction = grad;
    }
    double step = 1.0, f_new = f;
    Eigen::VectorXd z_new, grad_new(K);
    for (int ls = 0; ls < 60; ++ls) {
      z_new = z + step * direction;
      f_new = log_score_and_grad(P, z_new, grad_new);
      if (std::isfinite(f_new) && f_new >= f + 1e-4 * step * direction.dot(grad)) break;
      step *= 0.5;
    }
    if (!(f_new >= f)) {
      out.converged = true;  // no ascent possible at machine precision
      break;
    }
    const Eigen::VectorXd s = z_new - z;
    const Eigen::VectorXd yk = grad - grad_new;  // gradient of the minimized function is -grad
    const double sy = s.dot(yk);
    if (sy > 1e-16) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(K, K);
      inv_hessian = (I - rho * s * yk.transpose()) * inv_hessian * (I - rho * yk * s.transpose()) +
                    rho * s * s.transpose();
    }
    z = z_new;
    grad = grad_new;
    f = f_new;
    out.trace.push_back(f);
    out.iterations = it + 1;
  }
  if (!out.converged && grad.norm() < kGradTol) out.converged = true;

  out.weights = softmax(z);
  clean_simplex(out.weights);
  out.objective = log_score_objective(P, out.weights);
  // The softmax never reaches the boundary exactly; a vertex can beat it.
  for (Eigen::Index k = 0; k < K; ++k) {
    const Eigen::VectorXd vertex = Eigen::VectorXd::Unit(K, k);
    const double fv = log_score_objective(P, vertex);
    if (fv > out.objective) {
      out.weights = vertex;
      out.objective = fv;
    }
  }
  return out;
}

StackingWeights stack_weights_lsq(const Eigen::MatrixXd& F, const Eigen::VectorXd& y) {
  const Eigen::Index K = F.cols();
  if (K < 1 || F.rows() < 1) throw Error("stacking: need at least one model and one observation");
  if (y.size() != F.rows()) throw Error("stacking: outcome length does not match prediction rows");

  StackingWeights out;
  out.tag = StackingObjective::squared_error;
  // Objective 0.5 w'Hw + c'w (+ const) with H = 2 F'F, c = -2 F'y.
  const Eigen::MatrixXd H = 2.0 * F.transpose() * F;
  const Eigen::VectorXd c = -2.0 * F.transpose() * y;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(K, 1.0 / static_cast<double>(K));
  std::vector<bool> active(static_cast<std::size_t>(K), false);
  out.trace.push_back(squared_error_objective(F, y, w));
  const double scale = std::max(1.0, H.diagonal().maxCoeff());

  for (int it = 0; it < kMaxIterations; ++it) {
    out.iterations = it + 1;
    const Eigen::VectorXd g = H * w + c;
    std::vector<Eigen::Index> free;
    for (Eigen::Index k = 0; k < K; ++k)
      if (!active[static_cast<std::size_t>(k)]) free.push_back(k);
    const auto nf = static_cast<Eigen::Index>(free.size());

    // Equality-constrained step on the free set: [H_ff 1; 1' 0] [p; nu] = [-g_f; 0].
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + 1, nf + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf + 1);
    for (Eigen::Index a = 0; a < nf; ++a) {
      for (Eigen::Index b = 0; b < nf; ++b) kkt(a, b) = H(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
      kkt(a, nf) = 1.0;
      kkt(nf, a) = 1.0;
      rhs[a] = -g[free[static_cast<std::size_t>(a)]];
    }
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(K);
    for (Eigen::Index a = 0; a < nf; ++a) p[free[static_cast<std::size_t>(a)]] = sol[a];

    if (p.norm() <= 1e-12) {
      // Stationary on the free face: check the bound multipliers g_k - nu.
      double nu = 0.0;
      for (auto k : free) nu += g[k];
      nu /= static_cast<double>(nf);
      Eigen::Index worst = -1;
      double most_negative = -kGradTol * scale;
      for (Eigen::Index k = 0; k < K; ++k) {
        if (!active[static_cast<std::size_t>(k)]) continue;
        const double mu = g[k] - nu;
        if (mu < most_negative) {
          most_negative = mu;
          worst = k;
        }
      }
      if (worst < 0) {
        out.converged = true;
        break;
      }
      active[static_cast<std::size_t>(worst)] = false;
      continue;
    }

    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (auto k : free) {
      if (p[k] < 0.0) {
        const double limit = -w[k] / p[k];
        if (limit < alpha) {
          alpha = limit;
          blocking = k;
        }
      }
    }
    w += alpha * p;
    if (blocking >= 0) {
      w[blocking] = 0.0;
      active[static_cast<std::size_t>(blocking)] = true;
    }
    out.trace.push_back(squared_error_objective(F, y, w));
  }
  clean_simplex(w);
  out.weights = w;
  out.objective = squared_error_objective(F, y, w);
  return out;
}

std::vector<int> allocate_slots(const Eigen::VectorXd& weights, int slots) {
  const auto K = static_cast<std::size_t>(weights.size());
  if (K == 0) throw Error("allocate_slots: no weights");
  if ((weights.array() < -1e-10).any()) throw Error("allocate_slots: negative weight");
  const double total = weights.sum();
  std::vector<int> counts(K);
  std::vector<double> remainder(K);
  int assigned = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double exact = std::max(0.0, weights[static_cast<Eigen::Index>(k)]) / total * slots;
    counts[k] = static_cast<int>(std::floor(exact));
    remainder[k] = exact - counts[k];
    assigned += counts[k];
  }
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < slots; i = (i + 1) % K, ++assigned) ++counts[order[i]];
  return counts;
}

Eigen::VectorXd StackedDraws::coefficients(int slot) const {
  const auto& src = *sources.at(static_cast<std::size_t>(model_of_slot.at(static_cast<std::size_t>(slot))));
  return src.draws.row(slot).transpose();
}

StackedDraws stack_draws(const Eigen::VectorXd& weights, std::vector<std::shared_ptr<const PosteriorDraws>> sources) {
  if (static_cast<std::size_t>(weights.size()) != sources.size())
    throw Error("stacked_predictive: " + std::to_string(weights.size()) + " weights for " +
                std::to_string(sources.size()) + " models");
  if (sources.empty()) throw Error("stacked_predictive: no models");
  const Eigen::Index S = sources.front()->size();
  for (const auto& src : sources)
    if (src->size() != S) throw Error("stacked_predictive: models have different draw counts");

  StackedDraws out;
  out.sources = std::move(sources);
  out.counts = allocate_slots(weights, static_cast<int>(S));
  // Smooth weighted round-robin: exact counts, evenly interleaved.
  const std::size_t K = out.counts.size();
  std::vector<long> current(K, 0);
  out.model_of_slot.resize(static_cast<std::size_t>(S));
  for (Eigen::Index s = 0; s < S; ++s) {
    std::size_t pick = 0;
    for (std::size_t k = 0; k < K; ++k) {
      current[k] += out.counts[k];
      if (current[k] > current[pick]) pick = k;
    }
    current[pick] -= static_cast<long>(S);
    out.model_of_slot[static_cast<std::size_t>(s)] = static_cast<int>(pick);
  }
  return out;
}

StackedPrediction stacked_predictive(const StackedDraws& stacked, const std::vector<Eigen::MatrixXd>& designs) {
  if (designs.size() != stacked.sources.size()) throw Error("stacked_predictive: one design per model required");
  const Eigen::Index rows = designs.front().rows();
  for (std::size_t k = 0; k < designs.size(); ++k) {
    if (designs[k].rows() != rows) throw Error("stacked_predictive: designs disagree on row count");
    if (designs[k].cols() != stacked.sources[k]->dim())
      throw Error("stacked_predictive: design width does not match model " + std::to_string(k + 1));
  }
  StackedPrediction out;
  out.prob.resize(stacked.slots(), rows);
  for (int s = 0; s < stacked.slots(); ++s) {
    const auto k = static_cast<std::size_t>(stacked.model_of_slot[static_cast<std::size_t>(s)]);
    const Eigen::VectorXd eta = designs[k] * stacked.sources[k]->draws.row(s).transpose();
    for (Eigen::Index r = 0; r < rows; ++r) out.prob(s, r) = inv_logit(eta[r]);
  }
  out.mean = out.prob.colwise().mean().transpose();
  return out;
}

Eigen::VectorXd posterior_mean_prob(const PosteriorDraws& draws, const Eigen::MatrixXd& X) {
  if (X.cols() != draws.dim()) throw Error("posterior_mean_prob: design width mismatch");
  const Eigen::MatrixXd eta = draws.draws * X.transpose();
  return eta.unaryExpr([](double e) { return inv_logit(e); }).colwise().mean().transpose();
}

double brier(const Eigen::VectorXd& prob, const Eigen::VectorXd& y, BrierOrientation orientation) {
  if (prob.size() != y.size()) throw Error("brier: length mismatch");
  if (prob.size() == 0) throw Error("brier: empty input");
  if ((prob.array() < 0.0).any() || (prob.array() > 1.0).any() || !prob.allFinite())
    throw Error("brier: probabilities must lie in [0, 1]");
  const double mse = (y - prob).squaredNorm() / static_cast<double>(y.size());
  return orientation == BrierOrientation::positive ? mse : -2.0 * mse;
}

}  // namespace bstack
