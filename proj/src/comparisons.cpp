#include "bstack/comparisons.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bstack/design.hpp"
#include "bstack/error.hpp"

namespace bstack {

namespace {

std::string cell_label(const std::vector<std::string>& names, const std::vector<std::string>& levels) {
  std::string out;
  for (std::size_t c = 0; c < names.size(); ++c) out += (c ? ", " : "") + names[c] + "=" + levels[c];
  return out;
}

std::string q_tag(double q) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", q);
  return buf;
}

}  // namespace

FocalGrid focal_grid(const Dataset& data, const std::vector<std::string>& focal) {
  FocalGrid grid;
  grid.focal = focal;
  std::vector<const Column*> cols;
  std::size_t cells = 1;
  for (const auto& name : focal) {
    const Column& col = data.column(name);
    if (!col.categorical) throw ConfigError("focal column '" + name + "' must be categorical");
    cols.push_back(&col);
    cells *= col.level_count();
  }
  std::vector<double> sums(cells, 0.0);
  std::vector<std::size_t> sizes(cells, 0);
  const Column& y = data.outcome();
  for (std::size_t i = 0; i < data.rows(); ++i) {
    std::size_t cell = 0;
    for (const Column* col : cols) cell = cell * col->level_count() + static_cast<std::size_t>(col->codes[i]);
    sums[cell] += y.values[i];
    ++sizes[cell];
  }
  for (std::size_t cell = 0; cell < cells; ++cell) {
    FocalCell fc;
    fc.levels.resize(cols.size());
    std::size_t rest = cell;
    for (std::size_t c = cols.size(); c-- > 0;) {
      fc.levels[c] = cols[c]->levels[rest % cols[c]->level_count()];
      rest /= cols[c]->level_count();
    }
    fc.label = cell_label(focal, fc.levels);
    fc.size = sizes[cell];
    fc.fraction = fc.size ? sums[cell] / static_cast<double>(fc.size) : std::numeric_limits<double>::quiet_NaN();
    grid.cells.push_back(std::move(fc));
  }
  return grid;
}

const ProfileValue* HypotheticalProfile::find(const std::string& variable) const {
  for (const auto& v : values)
    if (v.variable == variable) return &v;
  return nullptr;
}

std::vector<HypotheticalProfile> build_profiles(const Dataset& data, const std::vector<std::string>& nonfocal,
                                                const std::vector<double>& quantiles) {
  std::vector<HypotheticalProfile> profiles;
  for (double q : quantiles) {
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("profile quantile " + q_tag(q) + " outside [0,1]");
    HypotheticalProfile profile;
    profile.quantile = q;
    for (const auto& name : nonfocal) {
      const Column& col = data.column(name);
      ProfileValue v;
      v.variable = name;
      v.categorical = col.categorical;
      if (!col.categorical) {
        v.value = quantile<double>(col.values, q);
      } else {
        std::vector<std::size_t> counts(col.level_count(), 0);
        for (int code : col.codes) ++counts[static_cast<std::size_t>(code)];
        std::size_t pick = 0;
        if (q == 0.5) {
          pick = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
        } else {
          const double n = static_cast<double>(col.codes.size());
          double cumulative = 0.0;
          for (pick = 0; pick + 1 < counts.size(); ++pick) {
            cumulative += static_cast<double>(counts[pick]) / n;
            if (cumulative >= q) break;
          }
        }
        v.level = col.levels[pick];
      }
      profile.values.push_back(std::move(v));
    }
    profiles.push_back(std::move(profile));
  }
  return profiles;
}

const CellPosterior& CellPosteriors::at(std::size_t cell, double quantile) const {
  for (const auto& c : cells)
    if (c.cell == cell && c.quantile == quantile) return c;
  throw Error("no cell posterior for cell " + std::to_string(cell) + " at profile " + q_tag(quantile));
}

Dataset profile_dataset(const Dataset& data, const std::vector<ModelSpec>& models, const FocalGrid& grid,
                        const std::vector<HypotheticalProfile>& profiles) {
  std::vector<std::string> needed;
  for (const auto& m : models)
    for (const auto& v : m.variables())
      if (std::find(needed.begin(), needed.end(), v) == needed.end()) needed.push_back(v);

  const std::size_t rows = grid.cells.size() * profiles.size();
  std::vector<Column> columns;
  for (const auto& name : needed) {
    const Column& src = data.column(name);
    Column col;
    col.name = name;
    col.role = src.role;
    col.categorical = src.categorical;
    col.levels = src.levels;
    const auto focal_it = std::find(grid.focal.begin(), grid.focal.end(), name);
    for (std::size_t c = 0; c < grid.cells.size(); ++c) {
      for (const auto& profile : profiles) {
        if (focal_it != grid.focal.end()) {
          const auto& level = grid.cells[c].levels[static_cast<std::size_t>(focal_it - grid.focal.begin())];
          col.codes.push_back(src.level_index(level));
          continue;
        }
        const ProfileValue* v = profile.find(name);
        if (!v) throw ConfigError("profile lacks variable '" + name + "' needed by a model");
        if (src.categorical) {
          const int code = src.level_index(v->level);
          if (code < 0) throw ConfigError("profile level '" + v->level + "' is not a level of '" + name + "'");
          col.codes.push_back(code);
        } else {
          col.values.push_back(v->value);
        }
      }
    }
    if (col.size() != rows) throw Error("profile dataset construction failed for '" + name + "'");
    columns.push_back(std::move(col));
  }
  return Dataset(std::move(columns));
}

CellPosteriors predict_cells(const StackedDraws& stacked, const std::vector<ModelSpec>& models, const Dataset& data,
                             const FocalGrid& grid, const std::vector<HypotheticalProfile>& profiles) {
  if (models.size() != stacked.sources.size())
    throw Error("predict_cells: " + std::to_string(models.size()) + " model specs for " +
                std::to_string(stacked.sources.size()) + " stacked models");
  const Dataset rows = profile_dataset(data, models, grid, profiles);
  std::vector<Eigen::MatrixXd> designs;
  for (const auto& m : models) designs.push_back(build_design(m, rows, false).X);
  const StackedPrediction pred = stacked_predictive(stacked, designs);

  CellPosteriors out;
  out.grid = grid;
  for (const auto& p : profiles) out.quantiles.push_back(p.quantile);
  Eigen::Index r = 0;
  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    for (const auto& profile : profiles) {
      CellPosterior cp;
      cp.cell = c;
      cp.label = grid.cells[c].label;
      cp.quantile = profile.quantile;
      cp.draws = pred.prob.col(r++);
      cp.summary = summarize(std::span<const double>(cp.draws.data(), static_cast<std::size_t>(cp.draws.size())));
      out.cells.push_back(std::move(cp));
    }
  }
  return out;
}

GapPosterior gap_posterior(const CellPosterior& reference, const CellPosterior& comparison) {
  if (reference.draws.size() != comparison.draws.size())
    throw Error("gap_posterior: cells have different draw counts");
  GapPosterior gap;
  gap.reference = reference.label;
  gap.comparison = comparison.label;
  gap.quantile = reference.quantile;
  gap.draws = reference.draws - comparison.draws;
  gap.summary = summarize(std::span<const double>(gap.draws.data(), static_cast<std::size_t>(gap.draws.size())));
  return gap;
}

std::vector<GapPosterior> gap_table(const CellPosteriors& cells, const std::string& variable,
                                    const std::string& reference, const std::string& comparison,
                                    GapConvention convention) {
  const auto& focal = cells.grid.focal;
  const auto it = std::find(focal.begin(), focal.end(), variable);
  if (it == focal.end()) throw ConfigError("gap variable '" + variable + "' is not a focal variable");
  const auto v = static_cast<std::size_t>(it - focal.begin());
  const auto& grid_cells = cells.grid.cells;

  auto find_cell = [&](const std::vector<std::string>& levels) -> std::size_t {
    for (std::size_t c = 0; c < grid_cells.size(); ++c)
      if (grid_cells[c].levels == levels) return c;
    throw ConfigError("gap: no focal cell " + cell_label(focal, levels));
  };

  std::vector<GapPosterior> gaps;
  for (double q : cells.quantiles) {
    for (std::size_t c = 0; c < grid_cells.size(); ++c) {
      if (grid_cells[c].levels[v] != reference) continue;
      auto other = grid_cells[c].levels;
      other[v] = comparison;
      const std::size_t c_cmp = find_cell(other);
      const auto& ref = cells.at(c, q);
      const auto& cmp = cells.at(c_cmp, q);
      gaps.push_back(convention == GapConvention::reference_minus_comparison ? gap_posterior(ref, cmp)
                                                                             : gap_posterior(cmp, ref));
    }
  }
  return gaps;
}

std::string focal_grid_csv(const FocalGrid& grid) {
  std::string out;
  for (const auto& f : grid.focal) out += csv_escape(f) + ",";
  out += "fraction,size\n";
  for (const auto& c : grid.cells) {
    for (const auto& l : c.levels) out += csv_escape(l) + ",";
    out += (c.defined() ? format_double(c.fraction) : std::string("NA")) + "," + std::to_string(c.size) + "\n";
  }
  return out;
}

std::string cells_csv(const CellPosteriors& cells) {
  std::string out = "profile_quantile,";
  for (const auto& f : cells.grid.focal) out += csv_escape(f) + ",";
  out += "median,q05,q95\n";
  for (double q : cells.quantiles) {
    for (const auto& c : cells.cells) {
      if (c.quantile != q) continue;
      out += q_tag(q) + ",";
      for (const auto& l : cells.grid.cells[c.cell].levels) out += csv_escape(l) + ",";
      out += format_double(c.summary.median) + "," + format_double(c.summary.q05) + "," +
             format_double(c.summary.q95) + "\n";
    }
  }
  return out;
}

std::string gaps_csv(const std::vector<GapPosterior>& gaps, GapConvention convention) {
  std::string out = "profile_quantile,minuend,subtrahend,convention,median,q05,q95\n";
  const char* tag =
      convention == GapConvention::reference_minus_comparison ? "reference_minus_comparison" : "comparison_minus_reference";
  for (const auto& g : gaps) {
    out += q_tag(g.quantile) + "," + csv_escape(g.reference) + "," + csv_escape(g.comparison) + "," + tag + "," +
           format_double(g.summary.median) + "," + format_double(g.summary.q05) + "," +
           format_double(g.summary.q95) + "\n";
  }
  return out;
}

nlohmann::json to_json(const std::vector<HypotheticalProfile>& profiles) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : profiles) {
    nlohmann::json values = nlohmann::json::object();
    for (const auto& v : p.values) values[v.variable] = v.categorical ? nlohmann::json(v.level) : nlohmann::json(v.value);
    out.push_back({{"quantile", p.quantile}, {"values", values}});
  }
  return out;
}

}  // namespace bstack
