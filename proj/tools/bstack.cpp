// bstack: fit, stack, check and summarize Bayesian logistic-regression candidates.
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "bstack/error.hpp"
#include "bstack/parallel.hpp"
#include "bstack/workflow.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> objective;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
  std::string dgp;
};

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--config", opt.config, "Run configuration (JSON)")->required();
  cmd->add_option("--seed", opt.seed, "Root seed, overrides the config");
  cmd->add_option("--objective", opt.objective, "Stacking objective")->check(CLI::IsMember({"logscore", "lsq"}));
  cmd->add_option("--threads", opt.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--out", opt.out, "Output directory, overrides the config");
}

bstack::Overrides overrides(const Options& opt) {
  bstack::Overrides o;
  o.seed = opt.seed;
  if (opt.objective) o.objective = bstack::parse_objective(*opt.objective);
  o.threads = opt.threads;
  if (opt.out) o.out = *opt.out;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian stacking of logistic-regression candidates"};
  app.require_subcommand(1);
  Options opt;

  using Step = int (*)(const bstack::RunConfig&);
  const std::map<std::string, std::pair<std::string, Step>> steps = {
      {"fit", {"Sample every model and write draw stores with diagnostics", bstack::cmd_fit}},
      {"stack", {"Compute LOO, stacking weights and the Brier table", bstack::cmd_stack}},
      {"ppc", {"Grouped and holdout posterior predictive checks", bstack::cmd_ppc}},
      {"compare", {"Focal grid, profile predictions and gap posteriors", bstack::cmd_compare}},
      {"report", {"Run every step and write an HTML index", bstack::cmd_report}},
  };
  for (const auto& [name, step] : steps) add_common(app.add_subcommand(name, step.first), opt);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset from a DGP description");
  synth->add_option("--config,dgp", opt.dgp, "DGP description (JSON)")->required();
  synth->add_option("--seed", opt.seed, "Seed");
  synth->add_option("--out", opt.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : bstack::exit_config;
  }

  try {
    if (synth->parsed()) return bstack::cmd_synth(opt.dgp, opt.seed.value_or(0), opt.out.value_or("."));
    for (const auto& [name, step] : steps) {
      if (!app.got_subcommand(name)) continue;
      if (opt.threads) bstack::set_thread_count(*opt.threads);
      const auto config = bstack::load_run_config(opt.config, overrides(opt));
      return step.second(config);
    }
  } catch (const std::exception& e) {
    return bstack::report_failure(e);
  }
  return bstack::exit_runtime;
}
