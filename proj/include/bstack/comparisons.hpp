#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bstack/dataset.hpp"
#include "bstack/model_spec.hpp"
#include "bstack/quantile.hpp"
#include "bstack/stacking.hpp"

namespace bstack {

struct FocalCell {
  std::vector<std::string> levels;  // one per focal column
  std::string label;                // e.g. "FEM=0, SES=1"
  std::size_t size = 0;
  double fraction = 0.0;  // observed outcome fraction; NaN when size == 0
  bool defined() const { return size > 0; }
};

/// Crossed levels of the focal columns, first column varying slowest.
struct FocalGrid {
  std::vector<std::string> focal;
  std::vector<FocalCell> cells;
};

FocalGrid focal_grid(const Dataset& data, const std::vector<std::string>& focal);

struct ProfileValue {
  std::string variable;
  bool categorical = false;
  double value = 0.0;  // numeric variables
  std::string level;   // categorical variables
};

/// One hypothetical individual: every non-focal variable fixed at its
/// marginal quantile `quantile`.
struct HypotheticalProfile {
  double quantile = 0.5;
  std::vector<ProfileValue> values;

  const ProfileValue* find(const std::string& variable) const;
};

/// Numeric variables take their type-7 sample quantile. Categorical
/// variables take the mode at q = 0.5 and otherwise the first level whose
/// cumulative frequency reaches q.
std::vector<HypotheticalProfile> build_profiles(const Dataset& data, const std::vector<std::string>& nonfocal,
                                                const std::vector<double>& quantiles = {0.25, 0.5, 0.75});

struct CellPosterior {
  std::size_t cell = 0;  // index into the grid
  std::string label;
  double quantile = 0.5;  // profile tag
  Eigen::VectorXd draws;  // one predicted probability per stacked slot
  Summary summary;
};

/// Ordered grid row-major, then by profile.
struct CellPosteriors {
  FocalGrid grid;
  std::vector<double> quantiles;
  std::vector<CellPosterior> cells;

  const CellPosterior& at(std::size_t cell, double quantile) const;
};

/// Dataset with one row per (cell, profile): focal columns at the cell's
/// levels, everything else at the profile's values.
Dataset profile_dataset(const Dataset& data, const std::vector<ModelSpec>& models, const FocalGrid& grid,
                        const std::vector<HypotheticalProfile>& profiles);

CellPosteriors predict_cells(const StackedDraws& stacked, const std::vector<ModelSpec>& models, const Dataset& data,
                             const FocalGrid& grid, const std::vector<HypotheticalProfile>& profiles);

struct GapPosterior {
  std::string reference;
  std::string comparison;
  double quantile = 0.5;
  Eigen::VectorXd draws;  // reference - comparison, slot by slot
  Summary summary;
};

GapPosterior gap_posterior(const CellPosterior& reference, const CellPosterior& comparison);

enum class GapConvention {
  reference_minus_comparison,  // default: positive gap = higher risk at the reference level
  comparison_minus_reference
};

/// Gaps between two levels of one focal variable, for every combination of
/// the other focal variables and every profile.
std::vector<GapPosterior> gap_table(const CellPosteriors& cells, const std::string& variable,
                                    const std::string& reference, const std::string& comparison,
                                    GapConvention convention = GapConvention::reference_minus_comparison);

std::string focal_grid_csv(const FocalGrid& grid);
std::string cells_csv(const CellPosteriors& cells);
std::string gaps_csv(const std::vector<GapPosterior>& gaps, GapConvention convention);
nlohmann::json to_json(const std::vector<HypotheticalProfile>& profiles);

/// Interval plot: x = levels of the last focal variable, one series per
/// profile and combination of the remaining focal variables.
std::string cells_svg(const CellPosteriors& cells, const std::string& y_label);

}  // namespace bstack
