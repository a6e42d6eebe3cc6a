#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bstack/dataset.hpp"
#include "bstack/model_spec.hpp"

namespace bstack {

/// Columns [first, first + count) of the design belong to one spec term.
struct TermRange {
  std::string term;
  Eigen::Index first = 0;
  Eigen::Index count = 0;
};

struct DesignMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;  // empty when built without an outcome
  std::vector<std::string> labels;
  std::vector<TermRange> terms;
  bool intercept = true;
  std::vector<std::string> warnings;

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }
};

/// Builds the treatment-coded design for `spec`. Column order: intercept,
/// main effects in spec order, interactions in spec order. A categorical
/// term with L levels contributes L-1 columns (level 1 dropped).
/// Rank deficiency is recorded in `warnings`, not raised.
DesignMatrix build_design(const ModelSpec& spec, const Dataset& data, bool with_outcome = true);

}  // namespace bstack
