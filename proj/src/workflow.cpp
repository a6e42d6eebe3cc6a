#include "bstack/workflow.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "bstack/error.hpp"
#include "bstack/logistic.hpp"
#include "bstack/parallel.hpp"
#include "bstack/ppc.hpp"
#include "bstack/random.hpp"
#include "bstack/schema.hpp"
#include "bstack/synthetic.hpp"

namespace bstack {

namespace {

constexpr double kMaxRhat = 1.05;

std::string read_file(const fs::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + what + " '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& path, const std::string& what) {
  const std::string text = read_file(path, what);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
}

// Upstream artifacts are produced by an earlier step; their absence is a
// runtime failure rather than a configuration error.
nlohmann::json read_artifact(const fs::path& path, const std::string& schema, const std::string& step) {
  if (!fs::exists(path)) throw Error("missing upstream artifact '" + path.string() + "' (run `" + step + "` first)");
  nlohmann::json doc = nlohmann::json::parse(read_file(path, "artifact"));
  check_against_schema(doc, schema);
  return doc;
}

std::string file_tag(const std::string& text) {
  std::string out;
  for (char c : text) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_';
  return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() ? p : base / p;
}

ModelSpec model_from_entry(const nlohmann::json& entry, const fs::path& base, const std::string& field,
                           const std::string& default_name) {
  ModelSpec spec;
  if (entry.is_object()) {
    spec = model_spec_from_json(entry);
  } else if (entry.is_string()) {
    const auto text = entry.get<std::string>();
    if (text.find('~') != std::string::npos) {
      spec = parse_formula(text);
    } else {
      const fs::path path = resolve(base, text);
      if (!fs::exists(path)) throw ConfigError(field + ": model spec file '" + path.string() + "' not found");
      spec = load_model_spec(path.string());
    }
  } else {
    throw ConfigError(field + ": expected a model spec path, formula or object");
  }
  if (spec.name.empty()) spec.name = default_name;
  return spec;
}

const nlohmann::json& require(const nlohmann::json& j, const std::string& key, const std::string& context) {
  if (!j.contains(key)) throw ConfigError(context + ": missing required field '" + key + "'");
  return j[key];
}

void atomic_write(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << bytes;
    if (!out.flush()) throw Error("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path);
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Eigen::MatrixXd draw_probabilities(const PosteriorDraws& draws, const Eigen::MatrixXd& X) {
  return (draws.draws * X.transpose()).unaryExpr([](double e) { return inv_logit(e); });
}

fs::path draws_path(const RunConfig& c, const ModelSpec& m) { return c.out / "fit" / (file_tag(m.name) + ".draws.csv"); }
fs::path sidecar_path(const RunConfig& c, const ModelSpec& m) { return c.out / "fit" / (file_tag(m.name) + ".json"); }

PosteriorDraws load_fit(const RunConfig& c, const ModelSpec& m) {
  const auto sidecar = read_artifact(sidecar_path(c, m), "fit_summary", "fit");
  if (!sidecar["converged"].get<bool>())
    throw DiagnosticsError("model '" + m.name + "' failed its convergence checks; refit before stacking");
  if (!fs::exists(draws_path(c, m)))
    throw Error("missing upstream artifact '" + draws_path(c, m).string() + "' (run `fit` first)");
  PosteriorDraws draws = read_draws_csv(draws_path(c, m));
  if (draws.labels != sidecar["design"]["labels"].get<std::vector<std::string>>())
    throw Error("draw store of model '" + m.name + "' does not match its sidecar");
  return draws;
}

struct StackState {
  std::vector<PosteriorDraws> fits;  // core first, then candidates
  Eigen::VectorXd weights;
  StackedDraws stacked;
};

StackState load_stack(const RunConfig& c) {
  const auto doc = read_artifact(c.out / "stack" / "weights.json", "weights", "stack");
  StackState state;
  const auto models = c.models();
  for (const auto& m : models) state.fits.push_back(load_fit(c, m));
  const auto& entries = doc["models"];
  if (entries.size() != c.candidates.size()) throw Error("weights.json does not match the configured candidates");
  state.weights.resize(static_cast<Eigen::Index>(entries.size()));
  std::vector<std::shared_ptr<const PosteriorDraws>> sources;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (entries[k]["name"].get<std::string>() != c.candidates[k].name)
      throw Error("weights.json lists model '" + entries[k]["name"].get<std::string>() + "' where '" +
                  c.candidates[k].name + "' is configured");
    state.weights[static_cast<Eigen::Index>(k)] = entries[k]["weight"].get<double>();
    sources.push_back(std::make_shared<const PosteriorDraws>(state.fits[k + 1]));
  }
  state.stacked = stack_draws(state.weights, sources);
  return state;
}

std::vector<Eigen::MatrixXd> designs_for(const std::vector<ModelSpec>& models, const Dataset& data) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& m : models) out.push_back(build_design(m, data).X);
  return out;
}

void apply_threads(const RunConfig& c) { set_thread_count(c.threads); }

}  // namespace

std::vector<ModelSpec> RunConfig::models() const {
  std::vector<ModelSpec> out{core};
  out.insert(out.end(), candidates.begin(), candidates.end());
  return out;
}

RunConfig parse_run_config(const nlohmann::json& j, const fs::path& source, const Overrides& overrides) {
  const std::string ctx = source.empty() ? std::string("config") : source.string();
  if (!j.is_object()) throw ConfigError(ctx + ": expected a JSON object");
  const fs::path base = source.has_parent_path() ? source.parent_path() : fs::path(".");
  RunConfig c;
  c.source = source;
  try {
    c.data = resolve(base, require(j, "data", ctx).get<std::string>());
    c.schema = resolve(base, require(j, "schema", ctx).get<std::string>());
    c.out = resolve(base, j.value("out", std::string("out")));
    c.seed = j.value("seed", std::uint64_t{0});
    c.threads = j.value("threads", 0u);

    for (const auto& b : j.value("bins", nlohmann::json::array())) {
      BinSpec bin;
      bin.source = require(b, "source", ctx + ": bins[]").get<std::string>();
      bin.name = b.value("name", bin.source + "_q");
      if (b.contains("role")) bin.role = parse_role(b["role"].get<std::string>());
      c.bins.push_back(std::move(bin));
    }

    c.core = model_from_entry(require(j, "core", ctx), base, ctx + ": core", "core");
    const auto& cands = require(j, "candidates", ctx);
    if (!cands.is_array() || cands.empty()) throw ConfigError(ctx + ": 'candidates' must list at least one model");
    for (std::size_t k = 0; k < cands.size(); ++k)
      c.candidates.push_back(model_from_entry(cands[k], base, ctx + ": candidates[" + std::to_string(k) + "]",
                                              "candidate" + std::to_string(k + 1)));
    std::set<std::string> names;
    for (const auto& m : c.models())
      if (!names.insert(m.name).second) throw ConfigError(ctx + ": duplicate model name '" + m.name + "'");
    validate_ensemble(c.core, c.candidates);

    if (j.contains("sampler")) c.sampler = sampler_config_from_json(j["sampler"]);
    if (j.contains("objective")) c.objective = parse_objective(j["objective"].get<std::string>());
    if (j.contains("loo")) {
      const auto loo = j["loo"].get<std::string>();
      if (loo == "psis") c.loo = LooMethod::psis;
      else if (loo == "exact") c.loo = LooMethod::exact;
      else throw ConfigError(ctx + ": 'loo' must be psis or exact, not '" + loo + "'");
    }

    if (j.contains("ppc")) {
      const auto& p = j["ppc"];
      for (const auto& g : p.value("groupings", nlohmann::json::array()))
        c.groupings.push_back(g.get<std::vector<std::string>>());
      c.statistic = p.value("statistic", c.statistic);
      TestStatistic::parse(c.statistic);
      if (p.contains("holdout")) c.holdout = p["holdout"].get<std::string>();
    }

    if (j.contains("compare")) {
      const auto& cmp = j["compare"];
      c.focal = cmp.value("focal", std::vector<std::string>{});
      c.quantiles = cmp.value("quantiles", c.quantiles);
      if (cmp.contains("gap")) {
        const auto& g = cmp["gap"];
        GapSpec gap;
        gap.variable = require(g, "variable", ctx + ": compare.gap").get<std::string>();
        gap.reference = g.value("reference", std::string());
        gap.comparison = g.value("comparison", std::string());
        const auto conv = g.value("convention", std::string("reference_minus_comparison"));
        if (conv == "reference_minus_comparison") gap.convention = GapConvention::reference_minus_comparison;
        else if (conv == "comparison_minus_reference") gap.convention = GapConvention::comparison_minus_reference;
        else throw ConfigError(ctx + ": compare.gap.convention must be reference_minus_comparison or comparison_minus_reference");
        c.gap = gap;
      }
    }
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind(ctx, 0) == 0) throw;
    throw ConfigError(ctx + ": " + what);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(ctx + ": " + e.what());
  }

  if (overrides.seed) c.seed = *overrides.seed;
  if (overrides.objective) c.objective = *overrides.objective;
  if (overrides.threads) c.threads = *overrides.threads;
  if (overrides.out) c.out = *overrides.out;
  c.sampler.seed = c.seed;
  c.sampler.threads = c.threads;
  c.sampler.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path, const Overrides& overrides) {
  return parse_run_config(read_json(path, "config"), path, overrides);
}

Dataset load_run_data(const RunConfig& c) {
  Dataset data = load_csv(c.data, load_schema(c.schema));
  for (const auto& bin : c.bins) data = quartile_bin(data, bin.source, bin.name, bin.role);
  for (const auto& m : c.models())
    if (m.outcome != data.outcome().name)
      throw ConfigError("model '" + m.name + "' predicts '" + m.outcome + "' but the dataset outcome is '" +
                        data.outcome().name + "'");
  return data;
}

void write_json_artifact(const fs::path& path, const nlohmann::json& doc, const std::string& schema) {
  check_against_schema(doc, schema);
  atomic_write(path, doc.dump(2) + "\n");
}

nlohmann::json csv_to_json(const std::string& csv) {
  const auto records = parse_csv_records(csv);
  nlohmann::json rows = nlohmann::json::array();
  if (records.empty()) return rows;
  const auto& header = records.front();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size())
      throw Error("CSV row " + std::to_string(r) + " has " + std::to_string(records[r].size()) + " fields, header has " +
                  std::to_string(header.size()));
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t c = 0; c < header.size(); ++c) {
      const std::string& cell = records[r][c];
      if (cell == "NA") {
        row[header[c]] = nullptr;
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (!cell.empty() && end == cell.c_str() + cell.size() && std::isfinite(v)) row[header[c]] = v;
      else row[header[c]] = cell;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_csv_artifact(const fs::path& path, const std::string& csv, const std::string& schema) {
  check_against_schema(csv_to_json(csv), schema);
  atomic_write(path, csv);
}

void write_text_artifact(const fs::path& path, const std::string& text) { atomic_write(path, text); }

int cmd_fit(const RunConfig& c) {
  apply_threads(c);
  const Dataset data = load_run_data(c);
  const std::uint64_t root = derive_seed(c.seed, Stream::fit);
  const auto models = c.models();
  std::vector<std::string> failures;
  for (std::size_t k = 0; k < models.size(); ++k) {
    const auto& m = models[k];
    const DesignMatrix design = build_design(m, data);
    SamplerConfig cfg = c.sampler;
    cfg.seed = derive_seed(root, k);
    PosteriorDraws draws = sample_logistic(design, m.prior, cfg);
    draws.labels = design.labels;
    const Diagnostics diag = diagnose(draws);

    bool converged = true;
    for (Eigen::Index j = 0; j < diag.rhat.size(); ++j) {
      if (!(diag.rhat[j] <= kMaxRhat)) {
        converged = false;
        failures.push_back(m.name + ": " + design.labels[static_cast<std::size_t>(j)] + " R-hat " +
                           percent(diag.rhat[j]));
      }
    }
    std::vector<std::string> warnings = data.warnings;
    warnings.insert(warnings.end(), design.warnings.begin(), design.warnings.end());
    if (diag.divergences > 0)
      warnings.push_back(std::to_string(diag.divergences) + " divergent transitions after warmup");

    nlohmann::json sidecar = {{"model", to_json(m)},
                              {"sampler", to_json(cfg)},
                              {"design", {{"labels", design.labels}, {"rows", design.rows()}}},
                              {"diagnostics", to_json(diag)},
                              {"step_size", draws.step_size},
                              {"mean_accept", draws.mean_accept},
                              {"converged", converged},
                              {"warnings", warnings}};
    write_csv_artifact(draws_path(c, m), draws_to_csv(draws), "draws_csv");
    write_json_artifact(sidecar_path(c, m), sidecar, "fit_summary");
  }
  if (!failures.empty()) {
    std::cerr << "bstack: R-hat above " << kMaxRhat << " for:\n";
    for (const auto& f : failures) std::cerr << "  " << f << "\n";
    return exit_diagnostics;
  }
  return exit_ok;
}

int cmd_stack(const RunConfig& c) {
  apply_threads(c);
  const Dataset data = load_run_data(c);
  const Eigen::VectorXd y = data.outcome_vector();
  const auto models = c.models();
  const std::uint64_t loo_root = derive_seed(c.seed, Stream::loo);

  std::vector<PosteriorDraws> fits;
  std::vector<DesignMatrix> designs;
  std::vector<LooResult> loos;
  for (std::size_t k = 0; k < models.size(); ++k) {
    fits.push_back(load_fit(c, models[k]));
    designs.push_back(build_design(models[k], data));
    LooResult loo;
    if (c.loo == LooMethod::psis) {
      loo = psis_loo(loglik_matrix(fits.back(), designs.back(), models[k].name));
    } else {
      SamplerConfig cfg = c.sampler;
      cfg.seed = derive_seed(loo_root, k);
      loo = exact_loo(designs.back(), models[k].prior, cfg);
      loo.model = models[k].name;
    }
    write_csv_artifact(c.out / "stack" / "loo" / (file_tag(models[k].name) + ".csv"), loo_to_csv(loo), "loo_csv");
    write_json_artifact(c.out / "stack" / "loo" / (file_tag(models[k].name) + ".json"), loo_summary_json(loo),
                        "loo_summary");
    loos.push_back(std::move(loo));
  }

  const std::vector<LooResult> cand_loos(loos.begin() + 1, loos.end());
  const LpdMatrix lpd = LpdMatrix::from_loo(cand_loos);
  StackingWeights sw;
  if (c.objective == StackingObjective::log_score) {
    sw = stack_weights_logscore(lpd);
  } else {
    Eigen::MatrixXd preds(y.size(), static_cast<Eigen::Index>(cand_loos.size()));
    for (std::size_t k = 0; k < cand_loos.size(); ++k)
      preds.col(static_cast<Eigen::Index>(k)) = loo_probability(cand_loos[k], y);
    sw = stack_weights_lsq(preds, y);
  }

  std::vector<std::shared_ptr<const PosteriorDraws>> sources;
  for (std::size_t k = 1; k < fits.size(); ++k) sources.push_back(std::make_shared<const PosteriorDraws>(fits[k]));
  const StackedDraws stacked = stack_draws(sw.weights, sources);

  std::vector<Eigen::VectorXd> mean_prob;
  for (std::size_t k = 0; k < models.size(); ++k) mean_prob.push_back(posterior_mean_prob(fits[k], designs[k].X));
  Eigen::VectorXd ensemble = Eigen::VectorXd::Zero(y.size());
  for (std::size_t k = 1; k < models.size(); ++k) ensemble += sw.weights[static_cast<Eigen::Index>(k - 1)] * mean_prob[k];
  const double ensemble_elpd = log_score_objective(lpd.density, sw.weights) * static_cast<double>(y.size());

  const std::string objective(to_string(c.objective));
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t k = 0; k < c.candidates.size(); ++k)
    entries.push_back({{"name", c.candidates[k].name},
                       {"weight", sw.weights[static_cast<Eigen::Index>(k)]},
                       {"slots", stacked.counts[k]},
                       {"brier", brier(mean_prob[k + 1], y)},
                       {"elpd_loo", loos[k + 1].total()}});
  const nlohmann::json weights_doc = {{"objective", objective},
                                      {"loo", c.loo == LooMethod::psis ? "psis" : "exact"},
                                      {"models", entries},
                                      {"objective_value", sw.objective},
                                      {"iterations", sw.iterations},
                                      {"converged", sw.converged},
                                      {"slots", stacked.slots()},
                                      {"core",
                                       {{"name", c.core.name},
                                        {"brier", brier(mean_prob[0], y)},
                                        {"elpd_loo", loos[0].total()}}},
                                      {"ensemble", {{"brier", brier(ensemble, y)}, {"elpd_loo", ensemble_elpd}}}};
  write_json_artifact(c.out / "stack" / "weights.json", weights_doc, "weights");

  std::string table = "model,role,weight,brier,elpd_loo,objective\n";
  table += csv_escape(c.core.name) + ",core,NA," + format_double(brier(mean_prob[0], y)) + "," +
           format_double(loos[0].total()) + "," + objective + "\n";
  for (std::size_t k = 0; k < c.candidates.size(); ++k)
    table += csv_escape(c.candidates[k].name) + ",candidate," + format_double(sw.weights[static_cast<Eigen::Index>(k)]) +
             "," + format_double(brier(mean_prob[k + 1], y)) + "," + format_double(loos[k + 1].total()) + "," +
             objective + "\n";
  table += "stack,ensemble,NA," + format_double(brier(ensemble, y)) + "," + format_double(ensemble_elpd) + "," +
           objective + "\n";
  write_csv_artifact(c.out / "stack" / "brier.csv", table, "brier_csv");

  for (const auto& loo : loos)
    if (!loo.high_khat.empty())
      std::cerr << "bstack: warning: model '" << loo.model << "' has " << loo.high_khat.size()
                << " observations with Pareto k above " << kKhatWarn << "; consider loo = exact\n";
  return exit_ok;
}

int cmd_ppc(const RunConfig& c) {
  apply_threads(c);
  if (c.groupings.empty()) throw ConfigError("ppc.groupings is empty; list at least one grouping");
  for (const auto& g : c.groupings)
    if (g.empty()) throw ConfigError("ppc.groupings contains an empty grouping");
  const Dataset data = load_run_data(c);
  const Eigen::VectorXd y = data.outcome_vector();
  const StackState state = load_stack(c);
  const TestStatistic stat = TestStatistic::parse(c.statistic);
  const std::uint64_t root = derive_seed(c.seed, Stream::ppc);
  const auto models = c.models();
  const auto designs = designs_for(models, data);
  const std::vector<Eigen::MatrixXd> cand_designs(designs.begin() + 1, designs.end());

  std::string table = "check,source,grouping,group,size,observed,p_plus,p_minus,tspppv\n";
  auto add_rows = [&](const std::string& check, const PpcReport& report) {
    for (const auto& g : report.groups)
      table += check + "," + csv_escape(report.source) + "," + csv_escape(join(report.grouping, "x")) + "," +
               csv_escape(g.group) + "," + std::to_string(g.size) + "," + format_double(g.observed) + "," +
               format_double(g.p_plus) + "," + format_double(g.p_minus) + "," + format_double(g.tspppv) + "\n";
  };

  const auto rep = replicate(stacked_predictive(state.stacked, cand_designs).prob, derive_seed(root, 0), "stack");
  for (const auto& grouping : c.groupings) {
    const PpcReport report = make_report(grouped_stat(rep, y, data, grouping, stat));
    const std::string tag = file_tag(join(grouping, "x"));
    write_json_artifact(c.out / "ppc" / ("grouped_" + tag + ".json"), to_json(report), "ppc_report");
    for (std::size_t g = 0; g < report.groups.size(); ++g)
      write_text_artifact(c.out / "ppc" / "svg" / ("grouped_" + tag + "_" + std::to_string(g + 1) + ".svg"),
                          histogram_svg(report.groups[g], "stack: " + report.groups[g].group + " (" + stat.name() + ")"));
    add_rows("grouped", report);
  }

  if (c.holdout) {
    std::vector<PpcSource> sources;
    for (std::size_t k = 0; k < models.size(); ++k) {
      const PosteriorDraws* draws = &state.fits[k];
      const Eigen::MatrixXd* X = &designs[k];
      sources.push_back({models[k].name, [draws, X] { return draw_probabilities(*draws, *X); }});
    }
    sources.push_back({"stack", [&] { return stacked_predictive(state.stacked, cand_designs).prob; }});
    const auto reports = holdout_check(models, sources, data, *c.holdout, derive_seed(root, 1), stat);
    for (const auto& report : reports) {
      const std::string tag = file_tag(report.source);
      write_json_artifact(c.out / "ppc" / ("holdout_" + tag + ".json"), to_json(report), "ppc_report");
      for (std::size_t g = 0; g < report.groups.size(); ++g)
        write_text_artifact(c.out / "ppc" / "svg" / ("holdout_" + tag + "_" + std::to_string(g + 1) + ".svg"),
                            histogram_svg(report.groups[g], report.source + ": " + report.groups[g].group));
      add_rows("holdout", report);
    }
  }
  write_csv_artifact(c.out / "ppc" / "tspppv.csv", table, "tspppv_csv");
  return exit_ok;
}

int cmd_compare(const RunConfig& c) {
  apply_threads(c);
  const Dataset data = load_run_data(c);
  const StackState state = load_stack(c);
  std::vector<std::string> focal = c.focal.empty() ? data.names_with_role(VariableRole::focal) : c.focal;
  if (focal.empty()) throw ConfigError("compare: no focal variables (set compare.focal or give columns role focal)");

  std::vector<std::string> nonfocal;
  for (const auto& m : c.models())
    for (const auto& v : m.variables())
      if (std::find(focal.begin(), focal.end(), v) == focal.end() &&
          std::find(nonfocal.begin(), nonfocal.end(), v) == nonfocal.end())
        nonfocal.push_back(v);

  const FocalGrid grid = focal_grid(data, focal);
  const auto profiles = build_profiles(data, nonfocal, c.quantiles);
  const CellPosteriors cells = predict_cells(state.stacked, c.candidates, data, grid, profiles);

  write_csv_artifact(c.out / "compare" / "focal_grid.csv", focal_grid_csv(grid), "focal_grid_csv");
  write_json_artifact(c.out / "compare" / "profiles.json", to_json(profiles), "profiles");
  write_csv_artifact(c.out / "compare" / "cells.csv", cells_csv(cells), "cells_csv");
  write_text_artifact(c.out / "compare" / "cells.svg", cells_svg(cells, "P(" + data.outcome().name + " = 1)"));

  GapSpec gap = c.gap.value_or(GapSpec{focal.front(), "", "", GapConvention::reference_minus_comparison});
  const Column& gap_col = data.column(gap.variable);
  if (gap.reference.empty()) gap.reference = gap_col.level_index("0") >= 0 ? "0" : gap_col.levels.front();
  if (gap.comparison.empty()) {
    for (const auto& l : gap_col.levels)
      if (l != gap.reference) {
        gap.comparison = l;
        break;
      }
  }
  if (gap_col.level_index(gap.reference) < 0 || gap_col.level_index(gap.comparison) < 0)
    throw ConfigError("compare.gap: levels '" + gap.reference + "' and '" + gap.comparison + "' must be levels of '" +
                      gap.variable + "'");
  const auto gaps = gap_table(cells, gap.variable, gap.reference, gap.comparison, gap.convention);
  write_csv_artifact(c.out / "compare" / "gaps.csv", gaps_csv(gaps, gap.convention), "gaps_csv");
  return exit_ok;
}

int cmd_report(const RunConfig& c) {
  if (const int rc = cmd_fit(c); rc != exit_ok) return rc;
  if (const int rc = cmd_stack(c); rc != exit_ok) return rc;
  if (const int rc = cmd_ppc(c); rc != exit_ok) return rc;
  if (const int rc = cmd_compare(c); rc != exit_ok) return rc;

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(c.out)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), c.out);
    if (rel == "manifest.json" || rel == "index.html") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());

  std::string html =
      "<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\"><title>bstack report</title></head>\n<body>\n"
      "<h1>bstack report</h1>\n<p><a href=\"stack/brier.csv\">Stacking weights and Brier scores</a></p>\n";
  std::string section;
  nlohmann::json listing = nlohmann::json::array();
  for (const auto& rel : files) {
    const std::string bytes = read_file(c.out / rel, "artifact");
    listing.push_back({{"path", rel.generic_string()}, {"bytes", bytes.size()}, {"fnv1a64", hex64(fnv1a64(bytes))}});
    if (rel.extension() != ".svg") continue;
    const std::string dir = rel.parent_path().generic_string();
    if (dir != section) {
      html += "<h2>" + dir + "</h2>\n";
      section = dir;
    }
    html += "<figure><img src=\"" + rel.generic_string() + "\" alt=\"" + rel.stem().string() + "\"><figcaption>" +
            rel.stem().string() + "</figcaption></figure>\n";
  }
  html += "</body>\n</html>\n";
  write_text_artifact(c.out / "index.html", html);

  const nlohmann::json manifest = {{"seed", c.seed},
                                   {"objective", std::string(to_string(c.objective))},
                                   {"models", [&] {
                                      nlohmann::json names = nlohmann::json::array();
                                      for (const auto& m : c.models()) names.push_back(m.name);
                                      return names;
                                    }()},
                                   {"files", listing}};
  write_json_artifact(c.out / "manifest.json", manifest, "manifest");
  return exit_ok;
}

int cmd_synth(const fs::path& dgp, std::uint64_t seed, const fs::path& out) {
  const SyntheticData synth = generate_synthetic(read_json(dgp, "DGP description"), seed);
  const std::string stem = dgp.stem().string();

  nlohmann::json schema = nlohmann::json::object();
  for (const auto& col : synth.data.columns()) {
    nlohmann::json entry = {{"role", std::string(to_string(col.role))},
                            {"type", col.categorical ? "categorical" : "numeric"}};
    if (col.categorical) entry["levels"] = col.levels;
    schema[col.name] = entry;
  }
  write_csv_artifact(out / (stem + ".csv"), to_csv(synth.data), "dataset_csv");
  write_json_artifact(out / (stem + ".schema.json"), schema, "dataset_schema");
  nlohmann::json truth = synth.truth_json();
  truth["seed"] = seed;
  write_json_artifact(out / (stem + ".truth.json"), truth, "truth");
  return exit_ok;
}

int report_failure(const std::exception& e) {
  std::cerr << "bstack: error: " << e.what() << "\n";
  if (dynamic_cast<const DiagnosticsError*>(&e)) return exit_diagnostics;
  if (dynamic_cast<const ConfigError*>(&e)) return exit_config;
  return exit_runtime;
}

}  // namespace bstack
