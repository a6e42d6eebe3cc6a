#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bstack/comparisons.hpp"
#include "bstack/dataset.hpp"
#include "bstack/loo.hpp"
#include "bstack/model_spec.hpp"
#include "bstack/sampler.hpp"
#include "bstack/stacking.hpp"

namespace bstack {

namespace fs = std::filesystem;

/// Quartile binning applied right after loading, e.g. SES from ESCS.
struct BinSpec {
  std::string source;
  std::string name;
  std::optional<VariableRole> role;
};

struct GapSpec {
  std::string variable;
  std::string reference;
  std::string comparison;
  GapConvention convention = GapConvention::reference_minus_comparison;
};

/// Parsed run configuration. Relative paths resolve against the directory
/// of the config file.
struct RunConfig {
  fs::path source;  // the config file itself
  fs::path data;
  fs::path schema;
  std::vector<BinSpec> bins;
  ModelSpec core;
  std::vector<ModelSpec> candidates;
  SamplerConfig sampler;
  StackingObjective objective = StackingObjective::log_score;
  LooMethod loo = LooMethod::psis;
  std::vector<std::vector<std::string>> groupings;
  std::string statistic = "mean";
  std::optional<std::string> holdout;
  std::vector<std::string> focal;  // empty: columns with role focal
  std::vector<double> quantiles = {0.25, 0.5, 0.75};
  std::optional<GapSpec> gap;
  fs::path out;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  /// Core first, then the candidates.
  std::vector<ModelSpec> models() const;
};

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<StackingObjective> objective;
  std::optional<unsigned> threads;
  std::optional<fs::path> out;
};

RunConfig parse_run_config(const nlohmann::json& j, const fs::path& source, const Overrides& overrides = {});
RunConfig load_run_config(const fs::path& path, const Overrides& overrides = {});

/// Loads the dataset and applies the configured bins.
Dataset load_run_data(const RunConfig& config);

/// Exit codes shared by the CLI.
enum ExitCode : int { exit_ok = 0, exit_runtime = 1, exit_config = 2, exit_diagnostics = 3 };

/// Serializes `doc`, validates it against the named shipped schema and
/// writes it atomically.
void write_json_artifact(const fs::path& path, const nlohmann::json& doc, const std::string& schema);
/// Validates CSV text row by row (numeric cells as numbers, NA as null)
/// against the named schema and writes it atomically.
void write_csv_artifact(const fs::path& path, const std::string& csv, const std::string& schema);
void write_text_artifact(const fs::path& path, const std::string& text);

/// CSV rows as JSON objects keyed by the header, the form validated by
/// write_csv_artifact.
nlohmann::json csv_to_json(const std::string& csv);

/// Pipeline steps. Each reads the artifacts of the previous one from
/// config.out and returns an ExitCode; errors propagate as exceptions.
int cmd_fit(const RunConfig& config);
int cmd_stack(const RunConfig& config);
int cmd_ppc(const RunConfig& config);
int cmd_compare(const RunConfig& config);
/// Runs every step, then writes index.html and manifest.json.
int cmd_report(const RunConfig& config);
/// Writes <out>/<stem>.csv, <stem>.schema.json and <stem>.truth.json.
int cmd_synth(const fs::path& dgp, std::uint64_t seed, const fs::path& out);

/// Maps an exception to its exit code and prints it to stderr.
int report_failure(const std::exception& e);

}  // namespace bstack
