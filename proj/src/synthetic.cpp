#include "bstack/synthetic.hpp"

#include <random>

#include "bstack/design.hpp"
#include "bstack/error.hpp"
#include "bstack/logistic.hpp"
#include "bstack/random.hpp"

namespace bstack {

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

// Coefficients for one term's encoded columns.
std::vector<double> term_coefs(const nlohmann::json& coef, std::size_t width, const std::string& term) {
  if (coef.is_null()) return std::vector<double>(width, 0.0);
  if (coef.is_number()) {
    if (width != 1)
      throw ConfigError("synthetic: term '" + term + "' spans " + std::to_string(width) +
                        " design columns but has a scalar coefficient");
    return {coef.get<double>()};
  }
  auto values = coef.get<std::vector<double>>();
  if (values.size() == width + 1) values.erase(values.begin());
  if (values.size() != width)
    throw ConfigError("synthetic: term '" + term + "' needs " + std::to_string(width) + " coefficients, got " +
                      std::to_string(values.size()));
  return values;
}

}  // namespace

nlohmann::json SyntheticData::truth_json() const {
  nlohmann::json coefs = nlohmann::json::array();
  for (std::size_t j = 0; j < labels.size(); ++j)
    coefs.push_back({{"label", labels[j]}, {"value", beta[static_cast<Eigen::Index>(j)]}});
  return {{"model", to_json(truth)}, {"coefficients", coefs}, {"rows", data.rows()}};
}

SyntheticData generate_synthetic(const nlohmann::json& config, std::uint64_t seed) {
  SyntheticData out;
  try {
    const long long n_signed = config.at("n").get<long long>();
    if (n_signed <= 0) throw ConfigError("synthetic: n must be positive");
    const auto n = static_cast<std::size_t>(n_signed);
    const std::string outcome = config.value("outcome", std::string("y"));

    auto rng = make_engine(seed);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<Column> columns;
    auto numeric_of = [&](const std::string& name) -> std::vector<double> {
      for (const auto& c : columns) {
        if (c.name != name) continue;
        if (!c.categorical) return c.values;
        std::vector<double> v(c.codes.begin(), c.codes.end());
        return v;
      }
      throw ConfigError("synthetic: 'depends' refers to unknown or later predictor '" + name + "'");
    };

    ModelSpec truth;
    truth.name = "truth";
    truth.outcome = outcome;
    truth.prior = PriorConfig{};
    std::vector<nlohmann::json> main_coefs;

    for (const auto& p : config.at("predictors")) {
      Column col;
      col.name = p.at("name").get<std::string>();
      col.role = parse_role(p.value("role", std::string("nonfocal")));
      const std::string dist = p.at("dist").get<std::string>();

      std::vector<double> shift(n, 0.0);
      if (p.contains("depends")) {
        if (dist == "categorical") throw ConfigError("synthetic: categorical predictors cannot have 'depends'");
        for (auto it = p["depends"].begin(); it != p["depends"].end(); ++it) {
          const auto parent = numeric_of(it.key());
          const double w = it.value().get<double>();
          for (std::size_t i = 0; i < n; ++i) shift[i] += w * parent[i];
        }
      }

      if (dist == "normal") {
        const double mean = p.value("mean", 0.0), sd = p.value("sd", 1.0);
        for (std::size_t i = 0; i < n; ++i) col.values.push_back(mean + sd * std_normal(rng) + shift[i]);
      } else if (dist == "uniform") {
        const double lo = p.value("min", 0.0), hi = p.value("max", 1.0);
        for (std::size_t i = 0; i < n; ++i) col.values.push_back(lo + (hi - lo) * unif(rng) + shift[i]);
      } else if (dist == "bernoulli") {
        const double base = logit(p.value("p", 0.5));
        std::vector<double> draws;
        for (std::size_t i = 0; i < n; ++i) draws.push_back(unif(rng) < inv_logit(base + shift[i]) ? 1.0 : 0.0);
        if (p.value("categorical", false)) {
          col.categorical = true;
          col.levels = {"0", "1"};
          for (double d : draws) col.codes.push_back(static_cast<int>(d));
        } else {
          col.values = std::move(draws);
        }
      } else if (dist == "categorical") {
        const auto probs = p.at("probs").get<std::vector<double>>();
        col.categorical = true;
        if (p.contains("levels")) {
          col.levels = p["levels"].get<std::vector<std::string>>();
        } else {
          for (std::size_t l = 0; l < probs.size(); ++l) col.levels.push_back(std::to_string(l + 1));
        }
        if (col.levels.size() != probs.size())
          throw ConfigError("synthetic: predictor '" + col.name + "' has mismatched levels/probs");
        std::discrete_distribution<int> pick(probs.begin(), probs.end());
        for (std::size_t i = 0; i < n; ++i) col.codes.push_back(pick(rng));
      } else {
        throw ConfigError("synthetic: unknown distribution '" + dist + "'");
      }

      if (p.value("in_truth", true) && col.role != VariableRole::ignore) {
        truth.terms.push_back(col.name);
        main_coefs.push_back(p.value("coef", nlohmann::json()));
      }
      columns.push_back(std::move(col));
    }

    std::vector<nlohmann::json> inter_coefs;
    if (config.contains("interactions")) {
      for (const auto& inter : config["interactions"]) {
        truth.interactions.push_back(inter.at("terms").get<Interaction>());
        inter_coefs.push_back(inter.value("coef", nlohmann::json()));
      }
    }

    // The truth design treats holdout predictors like any other column.
    std::vector<Column> design_cols = columns;
    for (auto& c : design_cols)
      if (c.role == VariableRole::holdout) c.role = VariableRole::nonfocal;
    Dataset design_data(design_cols);
    const DesignMatrix design = build_design(truth, design_data, false);

    out.beta = Eigen::VectorXd::Zero(design.cols());
    out.beta[0] = config.value("intercept", 0.0);
    for (std::size_t t = 0; t < design.terms.size(); ++t) {
      const auto& range = design.terms[t];
      const auto& coef = t < main_coefs.size() ? main_coefs[t] : inter_coefs[t - main_coefs.size()];
      const auto values = term_coefs(coef, static_cast<std::size_t>(range.count), range.term);
      for (Eigen::Index c = 0; c < range.count; ++c) out.beta[range.first + c] = values[static_cast<std::size_t>(c)];
    }
    out.labels = design.labels;

    const Eigen::VectorXd prob = predict_prob(out.beta, design.X);
    Column y;
    y.name = outcome;
    y.role = VariableRole::outcome;
    for (std::size_t i = 0; i < n; ++i) y.values.push_back(unif(rng) < prob[static_cast<Eigen::Index>(i)] ? 1.0 : 0.0);
    columns.insert(columns.begin(), std::move(y));

    out.data = Dataset(std::move(columns));
    out.truth = std::move(truth);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic config: ") + e.what());
  }
  return out;
}

}  // namespace bstack
