#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "bstack/error.hpp"
#include "bstack/parallel.hpp"
#include "bstack/random.hpp"
#include "bstack/sampler.hpp"

namespace bstack {

namespace {

constexpr double kMaxDeltaH = 1000.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// Nesterov dual averaging of log(step size).
class StepSizeAdaptation {
 public:
  explicit StepSizeAdaptation(double target) : target_(target) {}

  void set_mu(double mu) { mu_ = mu; }
  void restart() {
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }

  double learn(double accept_stat) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double count = static_cast<double>(counter_);
    const double eta = 1.0 / (count + t0_);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (target_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(count) / gamma_;
    const double x_eta = std::pow(count, -kappa_);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }

  double final_step() const { return std::exp(x_bar_); }

 private:
  double target_;
  double mu_ = std::log(10.0);
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
  long counter_ = 0;
  double gamma_ = 0.05;
  double t0_ = 10.0;
  double kappa_ = 0.75;
};

/// Windowed variance estimation for the diagonal metric: a fast initial
/// buffer, doubling slow windows, and a fast terminal buffer.
class MetricAdaptation {
 public:
  MetricAdaptation(int warmup, Eigen::Index dim) : warmup_(warmup), mean_(Eigen::VectorXd::Zero(dim)),
                                                   m2_(Eigen::VectorXd::Zero(dim)) {
    if (warmup < 20) {
      init_buffer_ = warmup;  // no slow windows; metric stays at identity
      term_buffer_ = 0;
      base_window_ = 0;
    } else if (init_buffer_ + base_window_ + term_buffer_ > warmup) {
      init_buffer_ = static_cast<int>(0.15 * warmup);
      term_buffer_ = static_cast<int>(0.1 * warmup);
      base_window_ = warmup - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  /// Feed one warmup draw; returns true when `inv_metric` was updated.
  bool learn(const Eigen::VectorXd& q, Eigen::VectorXd& inv_metric) {
    if (base_window_ == 0) {
      ++counter_;
      return false;
    }
    if (in_window()) add(q);
    if (counter_ == next_window_ && counter_ != warmup_) {
      compute_next_window();
      const double n = static_cast<double>(samples_);
      const Eigen::VectorXd var = m2_ / (n - 1.0);
      inv_metric = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
      samples_ = 0;
      mean_.setZero();
      m2_.setZero();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < warmup_ - term_buffer_ && counter_ != warmup_;
  }

  void add(const Eigen::VectorXd& q) {
    ++samples_;
    const Eigen::VectorXd delta = q - mean_;
    mean_ += delta / static_cast<double>(samples_);
    m2_ += delta.cwiseProduct(q - mean_);
  }

  void compute_next_window() {
    if (next_window_ == warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != warmup_ - term_buffer_ - 1) {
      const int boundary = next_window_ + 2 * window_size_;
      if (boundary >= warmup_ - term_buffer_) next_window_ = warmup_ - term_buffer_ - 1;
    }
  }

  int warmup_;
  int init_buffer_ = 75;
  int term_buffer_ = 50;
  int base_window_ = 25;
  int window_size_ = 0;
  int next_window_ = 0;
  int counter_ = 0;
  long samples_ = 0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
};

struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  Eigen::VectorXd grad;
  double log_density = 0.0;
};

struct Transition {
  double accept_stat = 0.0;
  int leapfrogs = 0;
  int depth = 0;
  bool divergent = false;
};

class ChainSampler {
 public:
  ChainSampler(const LogDensity& target, const SamplerConfig& config, Engine rng)
      : inv_metric_(Eigen::VectorXd::Ones(target.dim())), target_(target), config_(config), rng_(std::move(rng)) {
    max_depth_ = 0;
    while ((2 << max_depth_) <= config.max_steps) ++max_depth_;
    max_depth_ = std::max(1, max_depth_);
  }

  void initialize(const std::optional<Eigen::VectorXd>& init) {
    const Eigen::Index dim = target_.dim();
    std::uniform_real_distribution<double> jitter(-0.1, 0.1);
    z_.grad.resize(dim);
    for (int attempt = 0; attempt < 100; ++attempt) {
      z_.q = init ? *init : Eigen::VectorXd::Zero(dim);
      for (Eigen::Index j = 0; j < dim; ++j) z_.q[j] += jitter(rng_);
      z_.log_density = target_(z_.q, z_.grad);
      if (std::isfinite(z_.log_density) && z_.grad.allFinite()) return;
    }
    throw Error("sampler: log density is not finite at the initial point after 100 jittered attempts");
  }

  Transition transition() {
    return config_.trajectory == Trajectory::nuts ? nuts_transition() : fixed_transition();
  }

  void init_step_size() {
    const PhasePoint start = z_;
    auto delta_h = [&] {
      z_ = start;
      sample_momentum();
      const double h0 = hamiltonian(z_);
      leapfrog(target_, inv_metric_, step_, z_.q, z_.p, z_.grad, z_.log_density);
      double h = hamiltonian(z_);
      if (std::isnan(h)) h = kInf;
      return h0 - h;
    };
    const double threshold = std::log(0.8);
    const int direction = delta_h() > threshold ? 1 : -1;
    for (;;) {
      const double dh = delta_h();
      if (direction == 1 && !(dh > threshold)) break;
      if (direction == -1 && !(dh < threshold)) break;
      step_ = direction == 1 ? 2.0 * step_ : 0.5 * step_;
      if (step_ > 1e7) throw Error("sampler: step size diverged to infinity during initialization");
      if (step_ == 0.0) throw Error("sampler: step size collapsed to zero during initialization");
    }
    z_ = start;
  }

  double step_ = 1.0;
  Eigen::VectorXd inv_metric_;
  PhasePoint z_;

 private:
  void sample_momentum() {
    z_.p.resize(z_.q.size());
    for (Eigen::Index j = 0; j < z_.p.size(); ++j) z_.p[j] = normal_(rng_) / std::sqrt(inv_metric_[j]);
  }

  double hamiltonian(const PhasePoint& z) const {
    return -z.log_density + 0.5 * z.p.dot(inv_metric_.cwiseProduct(z.p));
  }

  Eigen::VectorXd sharp(const Eigen::VectorXd& p) const { return inv_metric_.cwiseProduct(p); }

  static bool criterion(const Eigen::VectorXd& p_sharp_minus, const Eigen::VectorXd& p_sharp_plus,
                        const Eigen::VectorXd& rho) {
    return p_sharp_plus.dot(rho) > 0 && p_sharp_minus.dot(rho) > 0;
  }

  Transition fixed_transition() {
    Transition t;
    const PhasePoint start = z_;
    sample_momentum();
    const double h0 = hamiltonian(z_);
    for (int s = 0; s < config_.fixed_steps; ++s) {
      leapfrog(target_, inv_metric_, step_, z_.q, z_.p, z_.grad, z_.log_density);
      ++t.leapfrogs;
    }
    double h = hamiltonian(z_);
    if (std::isnan(h)) h = kInf;
    if (h - h0 > kMaxDeltaH) t.divergent = true;
    t.accept_stat = std::min(1.0, std::exp(h0 - h));
    if (!(unif_(rng_) < t.accept_stat)) z_ = start;
    return t;
  }

  // Multinomial trajectory sampling with the generalized no-U-turn criterion,
  // checked across and between merged subtrees.
  Transition nuts_transition() {
    Transition t;
    sample_momentum();
    PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;

    Eigen::VectorXd p_fwd_fwd = z_.p, p_sharp_fwd_fwd = sharp(z_.p);
    Eigen::VectorXd p_fwd_bck = z_.p, p_sharp_fwd_bck = p_sharp_fwd_fwd;
    Eigen::VectorXd p_bck_fwd = z_.p, p_sharp_bck_fwd = p_sharp_fwd_fwd;
    Eigen::VectorXd p_bck_bck = z_.p, p_sharp_bck_bck = p_sharp_fwd_fwd;
    Eigen::VectorXd rho = z_.p;

    double log_sum_weight = 0.0;
    const double h0 = hamiltonian(z_);
    double sum_metro_prob = 0.0;
    divergent_ = false;

    while (t.depth < max_depth_) {
      Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(rho.size());
      Eigen::VectorXd rho_bck = Eigen::VectorXd::Zero(rho.size());
      bool valid = false;
      double log_sum_weight_subtree = -kInf;

      if (unif_(rng_) > 0.5) {
        z_ = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid = build_tree(t.depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd, h0,
                           1.0, t.leapfrogs, log_sum_weight_subtree, sum_metro_prob);
        z_fwd = z_;
      } else {
        z_ = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid = build_tree(t.depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd, p_bck_bck, h0,
                           -1.0, t.leapfrogs, log_sum_weight_subtree, sum_metro_prob);
        z_bck = z_;
      }
      if (!valid) break;
      ++t.depth;

      if (log_sum_weight_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (unif_(rng_) < std::exp(log_sum_weight_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

      rho = rho_bck + rho_fwd;
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      Eigen::VectorXd rho_extended = rho_bck + p_fwd_bck;
      persist &= criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_extended);
      rho_extended = rho_fwd + p_bck_fwd;
      persist &= criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_extended);
      if (!persist) break;
    }

    t.divergent = divergent_;
    t.accept_stat = t.leapfrogs ? sum_metro_prob / t.leapfrogs : 0.0;
    z_ = z_sample;
    return t;
  }

  bool build_tree(int depth, PhasePoint& z_propose, Eigen::VectorXd& p_sharp_beg, Eigen::VectorXd& p_sharp_end,
                  Eigen::VectorXd& rho, Eigen::VectorXd& p_beg, Eigen::VectorXd& p_end, double h0, double sign,
                  int& leapfrogs, double& log_sum_weight, double& sum_metro_prob) {
    if (depth == 0) {
      leapfrog(target_, inv_metric_, sign * step_, z_.q, z_.p, z_.grad, z_.log_density);
      ++leapfrogs;
      double h = hamiltonian(z_);
      if (std::isnan(h)) h = kInf;
      if (h - h0 > kMaxDeltaH) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro_prob += h0 - h > 0 ? 1.0 : std::exp(h0 - h);
      z_propose = z_;
      p_sharp_beg = sharp(z_.p);
      p_sharp_end = p_sharp_beg;
      rho += z_.p;
      p_beg = z_.p;
      p_end = p_beg;
      return !divergent_;
    }

    const Eigen::Index dim = z_.p.size();
    double log_sum_weight_init = -kInf;
    Eigen::VectorXd p_init_end(dim), p_sharp_init_end(dim);
    Eigen::VectorXd rho_init = Eigen::VectorXd::Zero(dim);
    if (!build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, h0, sign,
                    leapfrogs, log_sum_weight_init, sum_metro_prob))
      return false;

    PhasePoint z_propose_final = z_;
    double log_sum_weight_final = -kInf;
    Eigen::VectorXd p_final_beg(dim), p_sharp_final_beg(dim);
    Eigen::VectorXd rho_final = Eigen::VectorXd::Zero(dim);
    if (!build_tree(depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end, h0,
                    sign, leapfrogs, log_sum_weight_final, sum_metro_prob))
      return false;

    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      z_propose = z_propose_final;
    } else if (unif_(rng_) < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
      z_propose = z_propose_final;
    }

    const Eigen::VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    Eigen::VectorXd rho_extended = rho_init + p_final_beg;
    persist &= criterion(p_sharp_beg, p_sharp_final_beg, rho_extended);
    rho_extended = rho_final + p_init_end;
    persist &= criterion(p_sharp_init_end, p_sharp_end, rho_extended);
    return persist;
  }

  const LogDensity& target_;
  const SamplerConfig& config_;
  Engine rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  int max_depth_ = 10;
  bool divergent_ = false;

 public:
  int max_depth() const { return max_depth_; }
};

struct ChainResult {
  Eigen::MatrixXd draws;
  double step = 0.0;
  Eigen::VectorXd inv_metric;
  int divergences = 0;
  int warmup_divergences = 0;
  int saturated = 0;
  double mean_accept = 0.0;
};

ChainResult run_chain(const LogDensity& target, const SamplerConfig& config, int chain,
                      const std::optional<Eigen::VectorXd>& init) {
  ChainSampler sampler(target, config, make_engine(config.seed, static_cast<std::uint64_t>(chain)));
  sampler.initialize(init);
  sampler.init_step_size();

  StepSizeAdaptation step_adapt(config.target_accept);
  step_adapt.set_mu(std::log(10.0 * sampler.step_));
  MetricAdaptation metric_adapt(config.warmup, target.dim());

  ChainResult result;
  for (int it = 0; it < config.warmup; ++it) {
    const Transition t = sampler.transition();
    if (t.divergent) ++result.warmup_divergences;
    sampler.step_ = step_adapt.learn(t.accept_stat);
    if (metric_adapt.learn(sampler.z_.q, sampler.inv_metric_)) {
      sampler.init_step_size();
      step_adapt.set_mu(std::log(10.0 * sampler.step_));
      step_adapt.restart();
    }
  }
  if (config.warmup > 0) {
    if (result.warmup_divergences == config.warmup)
      throw Error("sampler: every warmup iteration of chain " + std::to_string(chain) + " diverged");
    sampler.step_ = step_adapt.final_step();
  }

  result.draws.resize(config.draws, target.dim());
  double accept_sum = 0.0;
  for (int it = 0; it < config.draws; ++it) {
    const Transition t = sampler.transition();
    if (t.divergent) ++result.divergences;
    if (config.trajectory == Trajectory::nuts && t.depth >= sampler.max_depth()) ++result.saturated;
    accept_sum += t.accept_stat;
    result.draws.row(it) = sampler.z_.q.transpose();
  }
  result.step = sampler.step_;
  result.inv_metric = sampler.inv_metric_;
  result.mean_accept = config.draws ? accept_sum / config.draws : 0.0;
  if (!result.draws.allFinite()) throw Error("sampler: chain " + std::to_string(chain) + " produced non-finite draws");
  return result;
}

}  // namespace

void leapfrog(const LogDensity& target, const Eigen::VectorXd& inv_metric, double step, Eigen::VectorXd& q,
              Eigen::VectorXd& p, Eigen::VectorXd& grad, double& log_density) {
  p += 0.5 * step * grad;
  q += step * inv_metric.cwiseProduct(p);
  log_density = target(q, grad);
  if (!std::isfinite(log_density) || !grad.allFinite()) {
    log_density = -kInf;
    return;
  }
  p += 0.5 * step * grad;
}

void SamplerConfig::validate() const {
  if (chains < 1) throw ConfigError("sampler: chains must be >= 1");
  if (warmup < 0) throw ConfigError("sampler: warmup must be >= 0");
  if (draws < 1) throw ConfigError("sampler: draws must be >= 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw ConfigError("sampler: target_accept must be in (0,1)");
  if (max_steps < 1) throw ConfigError("sampler: max_steps must be >= 1");
  if (fixed_steps < 1) throw ConfigError("sampler: fixed_steps must be >= 1");
}

nlohmann::json to_json(const SamplerConfig& c) {
  return {{"chains", c.chains},
          {"warmup", c.warmup},
          {"draws", c.draws},
          {"target_accept", c.target_accept},
          {"max_steps", c.max_steps},
          {"seed", c.seed},
          {"trajectory", c.trajectory == Trajectory::nuts ? "nuts" : "fixed"},
          {"fixed_steps", c.fixed_steps}};
}

SamplerConfig sampler_config_from_json(const nlohmann::json& j, SamplerConfig c) {
  try {
    c.chains = j.value("chains", c.chains);
    c.warmup = j.value("warmup", c.warmup);
    c.draws = j.value("draws", c.draws);
    c.target_accept = j.value("target_accept", c.target_accept);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.seed = j.value("seed", c.seed);
    c.fixed_steps = j.value("fixed_steps", c.fixed_steps);
    if (j.contains("trajectory")) {
      const auto t = j["trajectory"].get<std::string>();
      if (t == "nuts") c.trajectory = Trajectory::nuts;
      else if (t == "fixed") c.trajectory = Trajectory::fixed;
      else throw ConfigError("sampler: unknown trajectory '" + t + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sampler config: ") + e.what());
  }
  c.validate();
  return c;
}

int PosteriorDraws::total_divergences() const {
  int total = 0;
  for (int d : divergences) total += d;
  return total;
}

int PosteriorDraws::total_saturated() const {
  int total = 0;
  for (int d : saturated) total += d;
  return total;
}

PosteriorDraws sample(const LogDensity& target, const SamplerConfig& config, std::optional<Eigen::VectorXd> init) {
  config.validate();
  if (target.dim() < 1) throw ConfigError("sampler: target dimension must be >= 1");
  if (init && init->size() != target.dim()) throw ConfigError("sampler: initial point has wrong dimension");

  std::vector<ChainResult> results(static_cast<std::size_t>(config.chains));
  parallel_for(
      results.size(), [&](std::size_t c) { results[c] = run_chain(target, config, static_cast<int>(c), init); },
      config.threads ? config.threads : thread_count());

  PosteriorDraws out;
  out.config = config;
  out.draws.resize(static_cast<Eigen::Index>(config.total_draws()), target.dim());
  out.inv_metric.resize(config.chains, target.dim());
  for (int c = 0; c < config.chains; ++c) {
    const auto& r = results[static_cast<std::size_t>(c)];
    out.draws.middleRows(static_cast<Eigen::Index>(c) * config.draws, config.draws) = r.draws;
    out.chain.insert(out.chain.end(), static_cast<std::size_t>(config.draws), c);
    out.step_size.push_back(r.step);
    out.inv_metric.row(c) = r.inv_metric.transpose();
    out.divergences.push_back(r.divergences);
    out.saturated.push_back(r.saturated);
    out.mean_accept.push_back(r.mean_accept);
  }
  for (Eigen::Index j = 0; j < target.dim(); ++j) out.labels.push_back("theta[" + std::to_string(j + 1) + "]");
  return out;
}

PosteriorDraws sample_logistic(const DesignMatrix& design, const PriorConfig& prior, const SamplerConfig& config) {
  const LogisticPosterior posterior(design.X, design.y, design.intercept, prior);
  PosteriorDraws out = sample(posterior, config);
  for (Eigen::Index s = 0; s < out.draws.rows(); ++s)
    out.draws.row(s) = posterior.to_original(out.draws.row(s).transpose()).transpose();
  out.labels = design.labels;
  return out;
}

}  // namespace bstack
