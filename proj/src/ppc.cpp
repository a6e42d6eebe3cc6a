#include "bstack/ppc.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "bstack/error.hpp"
#include "bstack/logistic.hpp"
#include "bstack/parallel.hpp"
#include "bstack/quantile.hpp"
#include "bstack/random.hpp"

namespace bstack {

ReplicatedOutcomes replicate(const Eigen::MatrixXd& prob, std::uint64_t seed, std::string source) {
  ReplicatedOutcomes out;
  out.source = std::move(source);
  out.seed = seed;
  out.y_rep.resize(prob.rows(), prob.cols());
  parallel_for(static_cast<std::size_t>(prob.rows()), [&](std::size_t row) {
    const auto s = static_cast<Eigen::Index>(row);
    auto rng = make_engine(seed, row);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index i = 0; i < prob.cols(); ++i) out.y_rep(s, i) = unif(rng) < prob(s, i) ? 1 : 0;
  });
  return out;
}

ReplicatedOutcomes replicate(const PosteriorDraws& draws, const Eigen::MatrixXd& X, std::uint64_t seed,
                             std::string source) {
  if (X.cols() != draws.dim())
    throw Error("replicate: design has " + std::to_string(X.cols()) + " columns, draws have " +
                std::to_string(draws.dim()) + " parameters");
  const Eigen::MatrixXd prob = (draws.draws * X.transpose()).unaryExpr([](double e) { return inv_logit(e); });
  return replicate(prob, seed, std::move(source));
}

ReplicatedOutcomes replicate(const StackedDraws& stacked, const std::vector<Eigen::MatrixXd>& designs,
                             std::uint64_t seed, std::string source) {
  return replicate(stacked_predictive(stacked, designs).prob, seed, std::move(source));
}

std::string TestStatistic::name() const {
  switch (kind) {
    case Kind::mean: return "mean";
    case Kind::sd: return "sd";
    case Kind::quantile: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "q%g", prob);
      return buf;
    }
  }
  return "mean";
}

double TestStatistic::operator()(std::span<const double> values) const {
  if (values.empty()) throw Error("test statistic of an empty group");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  switch (kind) {
    case Kind::mean: return mean;
    case Kind::sd: {
      if (values.size() < 2) return 0.0;
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      return std::sqrt(ss / (n - 1.0));
    }
    case Kind::quantile: return quantile<double>(values, prob);
  }
  return mean;
}

TestStatistic TestStatistic::parse(std::string_view text) {
  TestStatistic t;
  if (text == "mean") return t;
  if (text == "sd") {
    t.kind = Kind::sd;
    return t;
  }
  if (!text.empty() && text.front() == 'q') {
    try {
      t.kind = Kind::quantile;
      t.prob = std::stod(std::string(text.substr(1)));
      if (t.prob >= 0.0 && t.prob <= 1.0) return t;
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("unknown test statistic '" + std::string(text) + "' (expected mean, sd or q<prob>)");
}

GroupedPpc grouped_stat(const ReplicatedOutcomes& rep, const Eigen::VectorXd& y, const Dataset& data,
                        const std::vector<std::string>& grouping, const TestStatistic& statistic) {
  const Eigen::Index n = y.size();
  if (rep.y_rep.cols() != n || static_cast<Eigen::Index>(data.rows()) != n)
    throw Error("grouped_stat: replicated data, outcome and dataset disagree on the number of rows");

  GroupedPpc out;
  out.grouping = grouping;
  out.source = rep.source;
  out.statistic = statistic.name();

  std::vector<const Column*> cols;
  std::size_t cells = 1;
  for (const auto& name : grouping) {
    const Column& col = data.column(name);
    if (!col.categorical) throw ConfigError("grouping column '" + name + "' is not categorical");
    cols.push_back(&col);
    cells *= col.level_count();
  }

  std::vector<std::vector<Eigen::Index>> members(cells);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t cell = 0;
    for (const Column* col : cols)
      cell = cell * col->level_count() + static_cast<std::size_t>(col->codes[static_cast<std::size_t>(i)]);
    members[cell].push_back(i);
  }

  const Eigen::Index S = rep.y_rep.rows();
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::vector<std::string> levels(cols.size());
    std::string label;
    std::size_t rest = cell;
    for (std::size_t c = cols.size(); c-- > 0;) {
      levels[c] = cols[c]->levels[rest % cols[c]->level_count()];
      rest /= cols[c]->level_count();
    }
    for (std::size_t c = 0; c < cols.size(); ++c) label += (c ? ", " : "") + cols[c]->name + "=" + levels[c];
    if (cols.empty()) label = "all";
    const auto& rows = members[cell];
    if (rows.empty()) {
      out.warnings.push_back("group " + label + " is empty and was excluded");
      continue;
    }
    GroupStat g;
    g.label = label;
    g.levels = levels;
    g.size = rows.size();
    std::vector<double> values(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) values[r] = y[rows[r]];
    g.observed = statistic(values);
    g.replicated.resize(S);
    for (Eigen::Index s = 0; s < S; ++s) {
      for (std::size_t r = 0; r < rows.size(); ++r) values[r] = rep.y_rep(s, rows[r]);
      g.replicated[s] = statistic(values);
    }
    out.groups.push_back(std::move(g));
  }
  return out;
}

double p_one_sided(std::span<const double> replicated, double observed) {
  if (replicated.empty()) throw Error("p-value needs at least one replicated statistic");
  double count = 0.0;
  for (double t : replicated) count += t > observed ? 1.0 : (t == observed ? 0.5 : 0.0);
  return count / static_cast<double>(replicated.size());
}

double p_minus(std::span<const double> replicated, double observed) {
  if (replicated.empty()) throw Error("p-value needs at least one replicated statistic");
  double count = 0.0;
  for (double t : replicated) count += t < observed ? 1.0 : (t == observed ? 0.5 : 0.0);
  return count / static_cast<double>(replicated.size());
}

double tspppv(std::span<const double> replicated, double observed) {
  return std::min(1.0, 2.0 * std::min(p_one_sided(replicated, observed), p_minus(replicated, observed)));
}

Histogram histogram(std::span<const double> values) {
  if (values.empty()) throw Error("histogram of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double lo = sorted.front(), hi = sorted.back();
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const std::span<const double> s(sorted);
  const double iqr = quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
  std::size_t bins = 10;
  if (iqr > 0.0) {
    const double width = 2.0 * iqr / std::cbrt(static_cast<double>(sorted.size()));
    bins = std::max<std::size_t>(10, static_cast<std::size_t>(std::ceil((hi - lo) / width)));
  }
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  for (double v : sorted) {
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    ++h.counts[std::min(b, bins - 1)];
  }
  return h;
}

PpcReport make_report(const GroupedPpc& grouped) {
  PpcReport report;
  report.source = grouped.source;
  report.statistic = grouped.statistic;
  report.grouping = grouped.grouping;
  report.warnings = grouped.warnings;
  for (const auto& g : grouped.groups) {
    const std::span<const double> rep(g.replicated.data(), static_cast<std::size_t>(g.replicated.size()));
    GroupReport r;
    r.group = g.label;
    r.levels = g.levels;
    r.size = g.size;
    r.observed = g.observed;
    r.p_plus = p_one_sided(rep, g.observed);
    r.p_minus = p_minus(rep, g.observed);
    r.tspppv = tspppv(rep, g.observed);
    r.histogram = histogram(rep);
    report.groups.push_back(std::move(r));
  }
  return report;
}

nlohmann::json to_json(const PpcReport& report) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : report.groups) {
    groups.push_back({{"group", g.group},
                      {"levels", g.levels},
                      {"size", g.size},
                      {"observed", g.observed},
                      {"p_plus", g.p_plus},
                      {"p_minus", g.p_minus},
                      {"tspppv", g.tspppv},
                      {"histogram", {{"edges", g.histogram.edges}, {"counts", g.histogram.counts}}}});
  }
  return {{"source", report.source},
          {"statistic", report.statistic},
          {"grouping", report.grouping},
          {"groups", groups},
          {"warnings", report.warnings}};
}

std::vector<PpcReport> holdout_check(const std::vector<ModelSpec>& models, const std::vector<PpcSource>& sources,
                                     const Dataset& data, const std::string& holdout, std::uint64_t seed,
                                     const TestStatistic& statistic) {
  const Column& col = data.column(holdout);
  if (col.role != VariableRole::holdout)
    throw ConfigError("holdout check: column '" + holdout + "' does not have role holdout");
  for (const auto& m : models) {
    const auto vars = m.variables();
    if (std::find(vars.begin(), vars.end(), holdout) != vars.end())
      throw ConfigError("holdout check: model '" + m.name + "' uses the holdout column '" + holdout + "'");
  }
  Dataset grouped_data = data;
  if (!col.categorical) {
    // Numeric holdouts are grouped by their distinct values.
    Column cat = col;
    cat.categorical = true;
    std::vector<double> distinct = col.values;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() > 20)
      throw ConfigError("holdout check: numeric holdout '" + holdout + "' has too many distinct values to group by");
    for (double d : distinct) cat.levels.push_back(format_double(d));
    for (double v : col.values)
      cat.codes.push_back(static_cast<int>(std::lower_bound(distinct.begin(), distinct.end(), v) - distinct.begin()));
    cat.values.clear();
    grouped_data = data.with_column(std::move(cat));
  }
  const Eigen::VectorXd y = data.outcome_vector();
  std::vector<PpcReport> out;
  for (std::size_t k = 0; k < sources.size(); ++k) {
    const auto rep = replicate(sources[k].probabilities(), derive_seed(seed, k), sources[k].name);
    out.push_back(make_report(grouped_stat(rep, y, grouped_data, {holdout}, statistic)));
  }
  return out;
}

}  // namespace bstack
