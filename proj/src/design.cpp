#include "bstack/design.hpp"

#include "bstack/error.hpp"

namespace bstack {

namespace {

struct Encoded {
  std::vector<Eigen::VectorXd> columns;
  std::vector<std::string> labels;
};

Encoded encode(const Column& col, Eigen::Index n) {
  Encoded out;
  if (!col.categorical) {
    out.columns.push_back(Eigen::Map<const Eigen::VectorXd>(col.values.data(), n));
    out.labels.push_back(col.name);
    return out;
  }
  for (std::size_t level = 1; level < col.levels.size(); ++level) {
    Eigen::VectorXd dummy(n);
    for (Eigen::Index i = 0; i < n; ++i) dummy[i] = col.codes[static_cast<std::size_t>(i)] == static_cast<int>(level);
    out.columns.push_back(std::move(dummy));
    out.labels.push_back(col.name + col.levels[level]);
  }
  return out;
}

const Column& usable_column(const ModelSpec& spec, const Dataset& data, const std::string& name) {
  const Column* col = data.find(name);
  if (!col) throw ConfigError("model '" + spec.name + "': unknown term '" + name + "'");
  if (col->role == VariableRole::holdout)
    throw ConfigError("model '" + spec.name + "': holdout column '" + name + "' cannot enter a design matrix");
  if (col->role == VariableRole::outcome)
    throw ConfigError("model '" + spec.name + "': outcome column '" + name + "' used as a predictor");
  return *col;
}

}  // namespace

DesignMatrix build_design(const ModelSpec& spec, const Dataset& data, bool with_outcome) {
  const auto n = static_cast<Eigen::Index>(data.rows());
  DesignMatrix design;
  design.intercept = spec.intercept;
  std::vector<Eigen::VectorXd> columns;

  if (spec.intercept) {
    columns.push_back(Eigen::VectorXd::Ones(n));
    design.labels.push_back("(Intercept)");
  }
  for (const auto& term : spec.terms) {
    auto enc = encode(usable_column(spec, data, term), n);
    design.terms.push_back({term, static_cast<Eigen::Index>(columns.size()),
                            static_cast<Eigen::Index>(enc.columns.size())});
    for (std::size_t c = 0; c < enc.columns.size(); ++c) {
      columns.push_back(std::move(enc.columns[c]));
      design.labels.push_back(std::move(enc.labels[c]));
    }
  }
  for (const auto& inter : spec.interactions) {
    // Cartesian product of the parents' encoded columns, first parent varying slowest.
    Encoded acc;
    acc.columns.push_back(Eigen::VectorXd::Ones(n));
    acc.labels.push_back("");
    for (const auto& parent : inter) {
      const auto enc = encode(usable_column(spec, data, parent), n);
      Encoded next;
      for (std::size_t a = 0; a < acc.columns.size(); ++a) {
        for (std::size_t b = 0; b < enc.columns.size(); ++b) {
          next.columns.push_back(acc.columns[a].cwiseProduct(enc.columns[b]));
          next.labels.push_back(acc.labels[a].empty() ? enc.labels[b] : acc.labels[a] + ":" + enc.labels[b]);
        }
      }
      acc = std::move(next);
    }
    design.terms.push_back({ModelSpec::label(inter), static_cast<Eigen::Index>(columns.size()),
                            static_cast<Eigen::Index>(acc.columns.size())});
    for (std::size_t c = 0; c < acc.columns.size(); ++c) {
      columns.push_back(std::move(acc.columns[c]));
      design.labels.push_back(std::move(acc.labels[c]));
    }
  }
  if (columns.empty()) throw ConfigError("model '" + spec.name + "' has an empty design");

  design.X.resize(n, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) design.X.col(static_cast<Eigen::Index>(c)) = columns[c];

  if (with_outcome) {
    const Column& y = data.outcome();
    if (!spec.outcome.empty() && spec.outcome != y.name)
      throw ConfigError("model '" + spec.name + "' names outcome '" + spec.outcome + "' but the dataset's is '" +
                        y.name + "'");
    design.y = data.outcome_vector();
    if (n > 0) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.X);
      if (qr.rank() < design.X.cols())
        design.warnings.push_back("model '" + spec.name + "': design is rank deficient (rank " +
                                  std::to_string(qr.rank()) + " of " + std::to_string(design.X.cols()) +
                                  " columns); priors keep the posterior proper");
    }
  }
  return design;
}

}  // namespace bstack
