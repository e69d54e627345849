#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "toughopt.h"

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out = "out";
  long long seed = -1;
  int workers = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "configuration file (INI)");
  cmd->add_option("--set", c.sets, "override, section.key=value (repeatable)");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "master RNG seed (campaign.seed)");
  cmd->add_option("--workers", c.workers, "parallel simulation workers")
      ->capture_default_str();
}

using ConfigPtr = std::unique_ptr<topt_config, decltype(&topt_config_free)>;

ConfigPtr make_config(const Common& c) {
  topt_config* cfg = c.config_path.empty()
                         ? topt_config_new()
                         : topt_config_load(c.config_path.c_str());
  ConfigPtr ptr(cfg, &topt_config_free);
  if (!cfg) {
    std::fprintf(stderr, "error: %s\n", topt_last_error());
    return ptr;
  }
  std::vector<std::string> sets = c.sets;
  if (c.seed >= 0)
    sets.push_back("campaign.seed=" + std::to_string(c.seed));
  for (const auto& s : sets) {
    if (topt_config_set(cfg, s.c_str()) != TOPT_OK) {
      std::fprintf(stderr, "error: %s\n", topt_last_error());
      ptr.reset();
      return ptr;
    }
  }
  return ptr;
}

int finish(int rc, const std::string& out) {
  if (rc != TOPT_OK) {
    std::fprintf(stderr, "error (%d): %s\n", rc, topt_last_error());
    return rc;
  }
  std::printf("ok: artifacts in %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phase-field fracture toughness: simulate, sweep, optimize"};
  app.require_subcommand(1);

  Common sim_c, sweep_c, opt_c, rep_c;
  bool dump_fields = false;
  std::string resume, trace_path;

  CLI::App* sim = app.add_subcommand(
      "simulate", "one surfing run at a fixed design and crack offset");
  add_common(sim, sim_c);
  sim->add_flag("--dump-fields", dump_fields,
                "write per-step VTK field snapshots");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "toughness landscape over a 1- or 2-parameter grid");
  add_common(sweep, sweep_c);

  CLI::App* opt = app.add_subcommand(
      "optimize", "worst-case Bayesian-optimization campaign");
  add_common(opt, opt_c);
  opt->add_option("--resume", resume, "checkpoint file to continue from");

  CLI::App* rep = app.add_subcommand(
      "report", "recompute toughness from an existing trace.csv");
  add_common(rep, rep_c);
  rep->add_option("--trace", trace_path, "trace.csv to reprocess")->required();

  CLI11_PARSE(app, argc, argv);

  if (sim->parsed()) {
    ConfigPtr cfg = make_config(sim_c);
    if (!cfg) return TOPT_E_CONFIG;
    const int rc =
        topt_simulate(cfg.get(), sim_c.out.c_str(), dump_fields ? 1 : 0);
    if (rc == TOPT_E_INFEASIBLE)
      std::fprintf(stderr, "design clearance: %.6g\n",
                   topt_design_clearance(cfg.get()));
    return finish(rc, sim_c.out);
  }
  if (sweep->parsed()) {
    ConfigPtr cfg = make_config(sweep_c);
    if (!cfg) return TOPT_E_CONFIG;
    return finish(topt_sweep(cfg.get(), sweep_c.out.c_str(), sweep_c.workers),
                  sweep_c.out);
  }
  if (opt->parsed()) {
    ConfigPtr cfg = make_config(opt_c);
    if (!cfg) return TOPT_E_CONFIG;
    return finish(topt_optimize(cfg.get(), opt_c.out.c_str(), opt_c.workers,
                                resume.empty() ? nullptr : resume.c_str()),
                  opt_c.out);
  }
  if (rep->parsed()) {
    ConfigPtr cfg = make_config(rep_c);
    if (!cfg) return TOPT_E_CONFIG;
    return finish(
        topt_report(cfg.get(), trace_path.c_str(), rep_c.out.c_str()),
        rep_c.out);
  }
  return TOPT_E_INVALID;
}
