#include "toughopt.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "toughopt/config.hpp"
#include "toughopt/io.hpp"

struct topt_config {
  toughopt::Config cfg;
  std::string last_get;
};

namespace {

using namespace toughopt;

thread_local std::string g_error;

int fail(int code, const std::string& msg) {
  g_error = msg;
  return code;
}

// Fixed task list, each writing only its own slot; worker count affects
// scheduling, never results.
void run_tasks(int workers, std::vector<std::function<void()>>& tasks) {
  if (workers <= 1 || tasks.size() <= 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      tasks[i]();
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(workers, int(tasks.size()));
  pool.reserve(size_t(n));
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

DesignVector to_design(const Eigen::VectorXd& v) {
  DesignVector x;
  for (int i = 0; i < DesignVector::kDim; ++i) x[i] = v[i];
  return x;
}

InclusionLayout layout_for(const Config& cfg, const SimulationConfig& sc,
                           const DesignVector& x, double w) {
  if (!inclusions_enabled(cfg)) return {};
  return build_layout(x, w, layout_options_from(cfg, sc.domain));
}

SimulationResult run_scenario(const Config& cfg, const SimulationConfig& sc,
                              const DesignVector& x, double w) {
  const InclusionLayout layout = layout_for(cfg, sc, x, w);
  return run_surfing_simulation(sc, layout);
}

double scenario_toughness(const Config& cfg, const SimulationConfig& sc,
                          const DesignVector& x, double w) {
  const SimulationResult res = run_scenario(cfg, sc, x, w);
  if (!res.ok)
    throw std::runtime_error("simulation failed: " + res.termination);
  return effective_toughness(res.trace, sc.window_lo, sc.window_hi,
                             sc.smooth_half_width)
      .g_eff;
}

int design_axis_index(const std::string& name) {
  if (name.size() == 2 && name[0] == 'x' && name[1] >= '1' && name[1] <= '9')
    return name[1] - '1';
  throw std::runtime_error("unknown sweep parameter '" + name +
                           "' (expected x1..x9)");
}

}  // namespace

extern "C" {

const char* topt_version(void) { return "1.0.0"; }

const char* topt_last_error(void) { return g_error.c_str(); }

topt_config* topt_config_new(void) { return new topt_config(); }

topt_config* topt_config_load(const char* path) {
  if (!path) {
    g_error = "null path";
    return nullptr;
  }
  try {
    auto* c = new topt_config();
    c->cfg = Config::load(path);
    return c;
  } catch (const std::exception& e) {
    g_error = e.what();
    return nullptr;
  }
}

void topt_config_free(topt_config* cfg) { delete cfg; }

int topt_config_set(topt_config* cfg, const char* assignment) {
  if (!cfg || !assignment) return fail(TOPT_E_INVALID, "null argument");
  try {
    apply_override(cfg->cfg, assignment);
    return TOPT_OK;
  } catch (const std::exception& e) {
    return fail(TOPT_E_CONFIG, e.what());
  }
}

const char* topt_config_get(topt_config* cfg, const char* key) {
  if (!cfg || !key) return nullptr;
  if (!cfg->cfg.has(key)) return nullptr;
  cfg->last_get = cfg->cfg.str(key, "");
  return cfg->last_get.c_str();
}

unsigned long long topt_config_hash(const topt_config* cfg) {
  return cfg ? cfg->cfg.hash() : 0ull;
}

double topt_design_clearance(const topt_config* cfg) {
  if (!cfg) {
    g_error = "null config";
    return std::numeric_limits<double>::quiet_NaN();
  }
  try {
    return design_clearance(design_from(cfg->cfg));
  } catch (const std::exception& e) {
    g_error = e.what();
    return std::numeric_limits<double>::quiet_NaN();
  }
}

int topt_design_feasible(const topt_config* cfg) {
  if (!cfg) {
    g_error = "null config";
    return -1;
  }
  try {
    return is_feasible(design_from(cfg->cfg), min_gap_from(cfg->cfg)) ? 1 : 0;
  } catch (const std::exception& e) {
    g_error = e.what();
    return -1;
  }
}

int topt_simulate(const topt_config* c, const char* out_dir, int dump_fields) {
  if (!c || !out_dir) return fail(TOPT_E_INVALID, "null argument");
  SimulationConfig sc;
  DesignVector x;
  InclusionLayout layout;
  std::uint64_t h = 0;
  try {
    const Config& cfg = c->cfg;
    h = cfg.hash();
    sc = sim_config_from(cfg);
    x = design_from(cfg);
    if (inclusions_enabled(cfg)) {
      const double gap = min_gap_from(cfg);
      const double clear = design_clearance(x);
      if (!is_feasible(x, gap)) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "design infeasible: clearance=%.6g required=%.6g", clear,
                      gap);
        return fail(TOPT_E_INFEASIBLE, buf);
      }
      layout = build_layout(x, crack_offset_from(cfg),
                            layout_options_from(cfg, sc.domain));
    }
  } catch (const std::exception& e) {
    return fail(TOPT_E_CONFIG, e.what());
  }

  const std::string dir(out_dir);
  SimulationResult res;
  try {
    ensure_dir(dir);
    FieldDumpHook hook;
    if (dump_fields) {
      hook = [&dir](int step, const AdaptiveMesh& mesh, const Quadrature& quad,
                    const DofMap& dofs, const Eigen::VectorXd& xvec) {
        char name[32];
        std::snprintf(name, sizeof name, "fields_%04d.vtk", step);
        write_vtk_fields(dir + "/" + name, mesh, quad, dofs, xvec);
      };
    }
    res = run_surfing_simulation(sc, layout, hook);
  } catch (const std::exception& e) {
    return fail(TOPT_E_SOLVE, e.what());
  }

  std::vector<ToughnessRow> tough;
  std::string tough_err;
  if (res.ok) {
    try {
      ToughnessRow row;
      row.design = 0;
      row.w = c->cfg.num("design.w", 0.0);
      row.rep = effective_toughness(res.trace, sc.window_lo, sc.window_hi,
                                    sc.smooth_half_width);
      tough.push_back(row);
    } catch (const std::exception& e) {
      tough_err = e.what();
    }
  }
  try {
    write_trace_csv(dir + "/trace.csv", res.trace, h);
    write_layout(layout, dir + "/layout.txt");
    if (!tough.empty()) write_toughness_csv(dir + "/toughness.csv", tough, h);
    write_summary(dir + "/summary.txt", res, tough, h);
  } catch (const std::exception& e) {
    return fail(TOPT_E_IO, e.what());
  }
  if (!res.ok)
    return fail(TOPT_E_SOLVE, "simulation failed: " + res.termination);
  if (!tough_err.empty())
    return fail(TOPT_E_SOLVE, "toughness evaluation failed: " + tough_err);
  return TOPT_OK;
}

int topt_sweep(const topt_config* c, const char* out_dir, int workers) {
  if (!c || !out_dir) return fail(TOPT_E_INVALID, "null argument");
  const Config& cfg = c->cfg;
  SimulationConfig sc;
  std::vector<SweepAxis> axes;
  std::vector<double> scenarios;
  DesignVector base;
  double gap = 1.0;
  std::uint64_t h = 0;
  std::vector<int> axis_idx;
  try {
    h = cfg.hash();
    sc = sim_config_from(cfg);
    axes = sweep_axes_from(cfg);
    scenarios = sweep_scenarios_from(cfg);
    base = design_from(cfg);
    gap = min_gap_from(cfg);
    for (const auto& a : axes) axis_idx.push_back(design_axis_index(a.param));
  } catch (const std::exception& e) {
    return fail(TOPT_E_CONFIG, e.what());
  }

  auto axis_value = [](const SweepAxis& a, int i) {
    return a.n == 1 ? a.lo : a.lo + (a.hi - a.lo) * double(i) / double(a.n - 1);
  };
  const int n1 = axes[0].n;
  const int n2 = axes.size() > 1 ? axes[1].n : 1;
  const int nw = int(scenarios.size());
  std::vector<SweepRow> rows(size_t(n1) * size_t(n2) * size_t(nw));
  std::vector<std::function<void()>> tasks;
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      DesignVector x = base;
      std::vector<double> params{axis_value(axes[0], i)};
      x[axis_idx[0]] = params[0];
      if (axes.size() > 1) {
        params.push_back(axis_value(axes[1], j));
        x[axis_idx[1]] = params[1];
      }
      const bool feas = is_feasible(x, gap);
      for (int wi = 0; wi < nw; ++wi) {
        const size_t r = (size_t(i) * size_t(n2) + size_t(j)) * size_t(nw) +
                         size_t(wi);
        rows[r].params = params;
        rows[r].w = scenarios[size_t(wi)];
        if (!feas) {
          rows[r].note = "infeasible";
          continue;
        }
        tasks.push_back([&cfg, &sc, &rows, x, r]() {
          try {
            rows[r].G_eff = scenario_toughness(cfg, sc, x, rows[r].w);
            rows[r].has_value = true;
          } catch (const std::exception&) {
            rows[r].note = "failed";
          }
        });
      }
    }
  }
  try {
    run_tasks(workers, tasks);
  } catch (const std::exception& e) {
    return fail(TOPT_E_SOLVE, e.what());
  }
  try {
    ensure_dir(out_dir);
    std::vector<std::string> names;
    for (const auto& a : axes) names.push_back(a.param);
    write_sweep_csv(std::string(out_dir) + "/sweep.csv", names, rows, h);
  } catch (const std::exception& e) {
    return fail(TOPT_E_IO, e.what());
  }
  return TOPT_OK;
}

int topt_optimize(const topt_config* c, const char* out_dir, int workers,
                  const char* resume_path) {
  if (!c || !out_dir) return fail(TOPT_E_INVALID, "null argument");
  const Config& cfg = c->cfg;
  SimulationConfig sc;
  CampaignOptions opt;
  BoBounds bounds;
  double gap = 1.0;
  std::uint64_t h = 0;
  try {
    h = cfg.hash();
    sc = sim_config_from(cfg);
    opt = campaign_options_from(cfg);
    const DesignBounds db = design_bounds_from(cfg);
    bounds.lo = Eigen::Map<const Eigen::VectorXd>(db.lo.data(),
                                                  DesignVector::kDim);
    bounds.hi = Eigen::Map<const Eigen::VectorXd>(db.hi.data(),
                                                  DesignVector::kDim);
    gap = min_gap_from(cfg);
  } catch (const std::exception& e) {
    return fail(TOPT_E_CONFIG, e.what());
  }

  const std::string dir(out_dir);
  const std::string resume = resume_path ? resume_path : "";
  if (!resume.empty()) {
    try {
      std::mt19937_64 r1, r2, r3, r4;
      load_checkpoint(resume, opt.config_hash, r1, r2, r3, r4);
    } catch (const std::exception& e) {
      return fail(TOPT_E_RESUME, e.what());
    }
  }

  Feasibility feasible = [gap](const Eigen::VectorXd& v) {
    return is_feasible(to_design(v), gap);
  };
  BatchEvaluator evaluate = [&cfg, &sc, workers](
                                const std::vector<Eigen::VectorXd>& xs) {
    std::vector<std::array<double, 4>> out(
        xs.size(), {std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN()});
    std::vector<std::function<void()>> tasks;
    for (size_t i = 0; i < xs.size(); ++i) {
      const DesignVector x = to_design(xs[i]);
      for (size_t wi = 0; wi < kScenarios.size(); ++wi) {
        tasks.push_back([&cfg, &sc, &out, x, i, wi]() {
          try {
            out[i][wi] = scenario_toughness(cfg, sc, x, kScenarios[wi]);
          } catch (const std::exception&) {
          }
        });
      }
    }
    run_tasks(workers, tasks);
    return out;
  };

  CampaignRecord rec;
  try {
    ensure_dir(dir);
    opt.checkpoint_path = dir + "/checkpoint.txt";
    rec = run_campaign(evaluate, bounds, feasible, opt, resume);
  } catch (const std::exception& e) {
    return fail(TOPT_E_SOLVE, e.what());
  }

  try {
    write_convergence_csv(dir + "/convergence.csv", rec.convergence, h);
    if (rec.best >= 0) {
      const EvalRecord& inc = rec.evals[size_t(rec.best)];
      {
        std::string text;
        char line[64];
        for (int i = 0; i < DesignVector::kDim; ++i) {
          std::snprintf(line, sizeof line, "design.x%d = %.17g\n", i + 1,
                        inc.x[i]);
          text += line;
        }
        std::snprintf(line, sizeof line, "# worst_case = %.17g\n", inc.f);
        text += line;
        std::ofstream os(dir + "/best_design.txt");
        os << text;
        if (!os)
          throw std::runtime_error("cannot write " + dir + "/best_design.txt");
      }
      ensure_dir(dir + "/best");
      const DesignVector xb = to_design(inc.x);
      std::vector<ToughnessRow> tough(kScenarios.size());
      std::vector<std::string> errs(kScenarios.size());
      std::vector<std::function<void()>> tasks;
      for (size_t wi = 0; wi < kScenarios.size(); ++wi) {
        tasks.push_back([&cfg, &sc, &dir, &tough, &errs, xb, wi, h, this_best =
                                                                       rec.best]() {
          char name[32];
          std::snprintf(name, sizeof name, "trace_w%.2f.csv", kScenarios[wi]);
          try {
            const SimulationResult res =
                run_scenario(cfg, sc, xb, kScenarios[wi]);
            write_trace_csv(dir + "/best/" + name, res.trace, h);
            tough[wi].design = this_best;
            tough[wi].w = kScenarios[wi];
            tough[wi].rep =
                effective_toughness(res.trace, sc.window_lo, sc.window_hi,
                                    sc.smooth_half_width);
          } catch (const std::exception& e) {
            errs[wi] = e.what();
          }
        });
      }
      run_tasks(workers, tasks);
      write_toughness_csv(dir + "/best/toughness.csv", tough, h);
    }
  } catch (const std::exception& e) {
    return fail(TOPT_E_IO, e.what());
  }
  return TOPT_OK;
}

int topt_report(const topt_config* c, const char* trace_csv,
                const char* out_dir) {
  if (!c || !trace_csv || !out_dir)
    return fail(TOPT_E_INVALID, "null argument");
  std::vector<TraceRow> trace;
  try {
    trace = read_trace_csv(trace_csv);
  } catch (const std::exception& e) {
    return fail(TOPT_E_IO, e.what());
  }
  try {
    const SimulationConfig sc = sim_config_from(c->cfg);
    ToughnessRow row;
    row.design = 0;
    row.w = c->cfg.num("design.w", 0.0);
    row.rep = effective_toughness(trace, sc.window_lo, sc.window_hi,
                                  sc.smooth_half_width);
    ensure_dir(out_dir);
    write_toughness_csv(std::string(out_dir) + "/toughness.csv", {row},
                        c->cfg.hash());
  } catch (const std::exception& e) {
    return fail(TOPT_E_INVALID, e.what());
  }
  return TOPT_OK;
}

}  // extern "C"
