#include "toughopt/solver.hpp"

#include <Eigen/SparseCholesky>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace toughopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double barrier_value(const Eigen::VectorXd& z, const Eigen::VectorXd& lo,
                     const Eigen::VectorXd& hi, const std::vector<int>& bnd) {
  double b = 0.0;
  for (int i : bnd) {
    if (lo[i] > -kInf) b -= std::log(z[i] - lo[i]);
    if (hi[i] < kInf) b -= std::log(hi[i] - z[i]);
  }
  return b;
}

}  // namespace

SolveStats interior_point_minimize(const Assembler& as, const Constraints& cons,
                                   const Eigen::VectorXd& lo,
                                   const Eigen::VectorXd& hi,
                                   Eigen::VectorXd& z, const NewtonOptions& opt,
                                   KKTReport* kkt) {
  const int n = cons.n_red;
  SolveStats st;
  if (z.size() != n || lo.size() != n || hi.size() != n)
    throw std::logic_error("interior point: size mismatch");

  std::vector<int> bnd;
  for (int i = 0; i < n; ++i) {
    if (lo[i] > -kInf || hi[i] < kInf) bnd.push_back(i);
    if (lo[i] > -kInf && hi[i] < kInf && hi[i] - lo[i] < 0.5 * opt.pin_gap)
      throw std::logic_error("interior point: degenerate bound pair not pinned");
  }
  for (int i : bnd) {
    if (lo[i] > -kInf && hi[i] < kInf) {
      const double m = std::min(1e-8, 1e-3 * (hi[i] - lo[i]));
      z[i] = std::min(std::max(z[i], lo[i] + m), hi[i] - m);
    } else if (lo[i] > -kInf) {
      z[i] = std::max(z[i], lo[i] + 1e-8);
    } else {
      z[i] = std::min(z[i], hi[i] - 1e-8);
    }
  }

  Eigen::VectorXd x = cons.expand(z);
  double E = as.energy(x);
  double mu = bnd.empty() ? 0.0 : opt.mu_init;
  double phi = E + (mu > 0.0 ? mu * barrier_value(z, lo, hi, bnd) : 0.0);

  Eigen::VectorXd grad_full, gtot(n), d(n), bdiag(n);
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::SparseMatrix<double> H(cons.n_total, cons.n_total);
  // The sparsity pattern is fixed for the whole call (same mesh, same
  // constraints, full diagonal), so the fill-reducing analysis runs once.
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool analyzed = false;

  bool all_ok = true;
  for (;;) {  // barrier stages
    bool stage_ok = false;
    for (int iter = 0; iter < opt.max_iter; ++iter) {
      as.gradient(x, grad_full);
      gtot = cons.P.transpose() * grad_full;
      for (int i : bnd) {
        if (lo[i] > -kInf) gtot[i] -= mu / (z[i] - lo[i]);
        if (hi[i] < kInf) gtot[i] += mu / (hi[i] - z[i]);
      }
      st.grad_norm = gtot.lpNorm<Eigen::Infinity>();
      if (st.grad_norm <= opt.tol) {
        stage_ok = true;
        break;
      }
      ++st.newton_iters;
      as.hessian(x, trips);
      H.setFromTriplets(trips.begin(), trips.end());
      Eigen::SparseMatrix<double> Hr = cons.P.transpose() * H * cons.P;
      const Eigen::VectorXd hdiag = Hr.diagonal();
      bdiag.setZero();
      for (int i : bnd) {
        if (lo[i] > -kInf) bdiag[i] += mu / ((z[i] - lo[i]) * (z[i] - lo[i]));
        if (hi[i] < kInf) bdiag[i] += mu / ((hi[i] - z[i]) * (hi[i] - z[i]));
      }

      // Representability floor: a dof hugging its bound has curvature
      // mu/gap^2, and once the Newton correction |g_i| / (H_ii + B_ii) drops
      // below the spacing of doubles at z_i no representable point reduces
      // that residual. Treat the stage as converged when every entry above
      // the tolerance is below its floor.
      bool floored = true;
      for (int i = 0; i < n && floored; ++i) {
        const double gi = std::abs(gtot[i]);
        if (gi <= opt.tol) continue;
        const double quantum = 8.0 * std::numeric_limits<double>::epsilon() *
                               std::max(1.0, std::abs(z[i]));
        if (gi > (std::abs(hdiag[i]) + bdiag[i]) * quantum) floored = false;
      }
      if (floored) {
        stage_ok = true;
        break;
      }

      // Shift scale from the energy block only: the barrier diagonal is
      // positive by construction and can be many orders larger near a bound,
      // which would poison the escalation.
      double dscale = 1.0;
      for (int i = 0; i < n; ++i) dscale = std::max(dscale, std::abs(hdiag[i]));

      double tau = 0.0;
      bool have_dir = false;
      while (!have_dir) {
        std::vector<Eigen::Triplet<double>> dt;
        dt.reserve(size_t(n));
        for (int i = 0; i < n; ++i) dt.emplace_back(i, i, bdiag[i] + tau);
        Eigen::SparseMatrix<double> Dm(n, n);
        Dm.setFromTriplets(dt.begin(), dt.end());
        Eigen::SparseMatrix<double> K = Hr + Dm;
        if (!analyzed) {
          ldlt.analyzePattern(K);
          analyzed = true;
        }
        ldlt.factorize(K);
        if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0) {
          d = ldlt.solve(-gtot);
          have_dir = true;
          break;
        }
        tau = tau == 0.0 ? 1e-8 * dscale : tau * 10.0;
        if (tau > 1e10 * dscale) break;
      }
      if (!have_dir) {
        all_ok = false;
        break;
      }

      double amax = 1.0;
      for (int i : bnd) {
        if (d[i] < 0.0 && lo[i] > -kInf)
          amax = std::min(amax, opt.ftb * (z[i] - lo[i]) / (-d[i]));
        if (d[i] > 0.0 && hi[i] < kInf)
          amax = std::min(amax, opt.ftb * (hi[i] - z[i]) / d[i]);
      }
      const double slope = gtot.dot(d);
      // The Armijo test compares energies; once the predicted decrease over
      // the whole admissible step sinks below the roundoff of evaluating the
      // assembled objective, no descent can be verified and the iterate is
      // converged to evaluation precision.
      const double eval_noise = 256.0 * std::numeric_limits<double>::epsilon() *
                                std::max(1.0, std::abs(phi));
      if (std::abs(slope) * amax <= eval_noise) {
        stage_ok = true;
        break;
      }
      double step = amax;
      bool accepted = false;
      for (int bt = 0; bt < opt.max_backtrack; ++bt) {
        Eigen::VectorXd zt = z + step * d;
        Eigen::VectorXd xt = cons.expand(zt);
        const double Et = as.energy(xt);
        const double phit =
            Et + (mu > 0.0 ? mu * barrier_value(zt, lo, hi, bnd) : 0.0);
        if (std::isfinite(phit) && phit <= phi + opt.armijo * step * slope) {
          z.swap(zt);
          x.swap(xt);
          E = Et;
          phi = phit;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        all_ok = false;
        break;
      }
    }
    if (!all_ok) break;
    if (!stage_ok) {
      all_ok = false;
      break;
    }
    if (bnd.empty() || mu <= opt.mu_min * (1.0 + 1e-12)) break;
    mu = std::max(mu * opt.mu_factor, opt.mu_min);
    phi = E + mu * barrier_value(z, lo, hi, bnd);
  }

  st.ok = all_ok;
  st.energy = E;
  if (kkt) {
    kkt->mu_final = mu;
    kkt->lambda_lo = Eigen::VectorXd::Zero(n);
    kkt->lambda_hi = Eigen::VectorXd::Zero(n);
    for (int i : bnd) {
      if (lo[i] > -kInf) kkt->lambda_lo[i] = mu / (z[i] - lo[i]);
      if (hi[i] < kInf) kkt->lambda_hi[i] = mu / (hi[i] - z[i]);
    }
  }
  return st;
}

double crack_length(const AdaptiveMesh& mesh, const Quadrature& quad,
                    double eps, const Eigen::VectorXd& alpha) {
  double acc = 0.0;
  const auto& active = mesh.active_cells();
  for (size_t row = 0; row < quad.cells.size(); ++row) {
    const Rect r = mesh.cell_rect(active[row]);
    const double invh = 1.0 / r.width();
    const auto vs = mesh.cell_vertices(active[row]);
    for (const auto& bp : quad.cells[row].bulk) {
      const double xi = (bp.p.x() - r.x0) * invh;
      const double eta = (bp.p.y() - r.y0) * invh;
      const double N[4] = {(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), xi * eta,
                           (1.0 - xi) * eta};
      const double dNx[4] = {-(1.0 - eta) * invh, (1.0 - eta) * invh,
                             eta * invh, -eta * invh};
      const double dNy[4] = {-(1.0 - xi) * invh, -xi * invh, xi * invh,
                             (1.0 - xi) * invh};
      double a = 0.0, gx = 0.0, gy = 0.0;
      for (int k = 0; k < 4; ++k) {
        const double cv = alpha[vs[size_t(k)]];
        a += cv * N[k];
        gx += cv * dNx[k];
        gy += cv * dNy[k];
      }
      acc += bp.w * (crack_density(a) / eps + eps * (gx * gx + gy * gy));
    }
  }
  return acc / kCw;
}

// ---------------------------------------------------------------------------
// time-stepping driver
// ---------------------------------------------------------------------------

namespace {

struct BStore {
  std::uint64_t gen = ~0ull;
  std::unordered_map<long long, double> bx, by;
  void invalidate() {
    gen = ~0ull;
    bx.clear();
    by.clear();
  }
};

long long bkey(int v, int incl) {
  return (static_cast<long long>(v) << 20) | static_cast<long long>(incl);
}

}  // namespace

SimulationResult run_surfing_simulation(const SimulationConfig& cfg,
                                        const InclusionLayout& layout,
                                        const FieldDumpHook& dump) {
  using Clock = std::chrono::steady_clock;
  const auto wall0 = Clock::now();
  SimulationResult res;

  MeshConfig mc = cfg.mesh;
  mc.domain = cfg.domain;
  AdaptiveMesh mesh(mc);
  const MaterialSet mat = make_materials(cfg.materials, cfg.eps);
  const double margin =
      cfg.refine_margin > 0.0 ? cfg.refine_margin : 2.0 * kPi * cfg.eps;
  const int iface = cfg.interface_level >= 0
                        ? std::min(cfg.interface_level, mc.max_level)
                        : mc.max_level;
  const StepControls& sc = cfg.controls;

  Eigen::VectorXd c = Eigen::VectorXd::Zero(mesh.n_vertices());
  Eigen::VectorXd c_prev = c, ax = c, ay = c, acc_ax = c, acc_ay = c;
  const std::vector<Eigen::VectorXd*> fields{&c,      &c_prev, &ax,
                                             &ay,     &acc_ax, &acc_ay};
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    const Vec2 p = mesh.vertex_pos(v);
    if (std::abs(p.y()) <= 1e-9 && p.x() <= sc.notch_len + 1e-9) {
      c[v] = 1.0;
      c_prev[v] = 1.0;
    }
  }

  Quadrature quad;
  DofMap dofs;
  std::unique_ptr<Assembler> as;
  BStore bstore;

  auto abort_run = [&](const std::string& why) {
    res.ok = false;
    res.termination = "aborted: " + why;
    res.final_cells = int(mesh.active_cells().size());
    res.final_dofs = dofs.total();
    res.wall_seconds =
        std::chrono::duration<double>(Clock::now() - wall0).count();
    return res;
  };

  // Geometry-driven refinement: cut cells are forced to the interface level
  // and unresolved cuts request refinement until they split cleanly.
  auto rebuild_disc = [&]() -> std::string {
    for (int guard = 0; guard < 8 * (mc.max_level + 1); ++guard) {
      quad = build_quadrature(mesh, layout);
      std::vector<int> need;
      for (int cell : quad.ambiguous) {
        if (mesh.cell_level(cell) >= mc.max_level)
          return "unresolvable interface cut at maximum refinement";
        need.push_back(cell);
      }
      const auto& active = mesh.active_cells();
      for (int row : quad.cut_rows) {
        const int cell = active[size_t(row)];
        if (mesh.cell_level(cell) < iface) need.push_back(cell);
      }
      if (need.empty()) {
        dofs = build_dofs(mesh, quad, layout, cfg.min_support);
        as = std::make_unique<Assembler>(mesh, mat, quad, dofs);
        return std::string();
      }
      mesh.adapt(need, {}, fields);
      bstore.invalidate();
    }
    return "interface refinement loop failed to settle";
  };

  auto make_x = [&]() {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(dofs.total());
    for (int v = 0; v < dofs.nv; ++v) {
      x[dofs.a_dof(v, 0)] = ax[v];
      x[dofs.a_dof(v, 1)] = ay[v];
      x[dofs.c_dof(v)] = c[v];
    }
    if (bstore.gen == mesh.generation()) {
      for (size_t p = 0; p < dofs.pairs.size(); ++p) {
        const long long key = bkey(dofs.pairs[p].first, dofs.pairs[p].second);
        auto it = bstore.bx.find(key);
        if (it != bstore.bx.end()) x[dofs.b_dof(int(p), 0)] = it->second;
        it = bstore.by.find(key);
        if (it != bstore.by.end()) x[dofs.b_dof(int(p), 1)] = it->second;
      }
    }
    return x;
  };

  auto save_state = [&](const Eigen::VectorXd& x) {
    for (int v = 0; v < dofs.nv; ++v) {
      ax[v] = x[dofs.a_dof(v, 0)];
      ay[v] = x[dofs.a_dof(v, 1)];
      c[v] = x[dofs.c_dof(v)];
    }
    bstore.gen = mesh.generation();
    bstore.bx.clear();
    bstore.by.clear();
    for (size_t p = 0; p < dofs.pairs.size(); ++p) {
      const long long key = bkey(dofs.pairs[p].first, dofs.pairs[p].second);
      bstore.bx.emplace(key, x[dofs.b_dof(int(p), 0)]);
      bstore.by.emplace(key, x[dofs.b_dof(int(p), 1)]);
    }
  };

  double t = 0.0, t_acc = 0.0, dt_cur = sc.dt, len = 0.0;
  int k = 0, halv_step = 0, coarsen_flag = 1;
  Vec2 tip_prev(sc.notch_len, 0.0);

  // Reset to the last accepted state and retry the step at half the
  // increment; false when the halving budget is exhausted.
  auto recover = [&]() {
    if (halv_step >= sc.max_dt_halvings) return false;
    ++halv_step;
    ++res.n_dt_halvings;
    dt_cur *= 0.5;
    t = t_acc + dt_cur;
    c = c_prev;
    ax = acc_ax;
    ay = acc_ay;
    bstore.invalidate();
    return true;
  };

  while (t <= sc.t_max + 1e-12 && len < sc.target_crack_length) {
    const auto step0 = Clock::now();
    bool step_done = false;
    while (!step_done) {
      const std::string gerr = rebuild_disc();
      if (!gerr.empty()) return abort_run(gerr);

      BCParams bc;
      bc.t = t;
      bc.tip_y = tip_prev.y();
      bc.surf = cfg.surf;
      bc.notch_len = sc.notch_len;
      bc.mouth_halfwidth = 0.5 * kPi * mat.eps + mesh.config().root_cell;

      Eigen::VectorXd x = make_x();
      {
        Constraints cp = build_constraints(mesh, dofs, bc, &c, nullptr);
        Eigen::VectorXd plo = Eigen::VectorXd::Constant(cp.n_red, -kInf);
        Eigen::VectorXd phi_b = Eigen::VectorXd::Constant(cp.n_red, kInf);
        Eigen::VectorXd z = cp.reduce(x);
        const SolveStats ps =
            interior_point_minimize(*as, cp, plo, phi_b, z, cfg.newton);
        if (!ps.ok) {
          if (!recover()) return abort_run("displacement presolve failed");
          continue;
        }
        x = cp.expand(z);
      }

      std::vector<std::pair<int, double>> pins;
      for (int v = 0; v < dofs.nv; ++v) {
        const double lov =
            c_prev[v] >= sc.irrev_threshold ? std::min(c_prev[v], 1.0) : 0.0;
        if (1.0 - lov < cfg.newton.pin_gap) pins.emplace_back(v, lov);
      }
      Constraints cons = build_constraints(mesh, dofs, bc, nullptr, &pins);
      Eigen::VectorXd lo = Eigen::VectorXd::Constant(cons.n_red, -kInf);
      Eigen::VectorXd hi = Eigen::VectorXd::Constant(cons.n_red, kInf);
      for (const auto& [red, v] : cons.c_free) {
        lo[red] =
            c_prev[v] >= sc.irrev_threshold ? std::min(c_prev[v], 1.0) : 0.0;
        hi[red] = 1.0;
      }

      Eigen::VectorXd z = cons.reduce(x);
      KKTReport kkt;
      SolveStats st = interior_point_minimize(*as, cons, lo, hi, z, cfg.newton, &kkt);
      if (!st.ok) {
        if (!recover()) return abort_run("coupled solve failed");
        continue;
      }
      x = cons.expand(z);
      save_state(x);
      Vec2 tip = mesh.find_crack_tip(c, tip_prev);

      const double min_t = k == 0 ? 0.0 : t_acc + 1e-3 * sc.dt;
      bool bt_fail = false;
      while (tip.x() - tip_prev.x() > sc.max_crack_advance + 1e-12) {
        ++res.n_backtracks;
        const bool at_floor = t <= min_t + 1e-15;
        if (at_floor) {
          // load cannot drop further: restart from the accepted state
          c = c_prev;
          ax = acc_ax;
          ay = acc_ay;
          bstore.invalidate();
          x = make_x();
        } else {
          t = std::max(t - dt_cur, min_t);
          bc.t = t;
          cons = build_constraints(mesh, dofs, bc, nullptr, &pins);
        }
        z = cons.reduce(x);
        const SolveStats bs =
            interior_point_minimize(*as, cons, lo, hi, z, cfg.newton, &kkt);
        if (!bs.ok) {
          bt_fail = true;
          break;
        }
        st = bs;
        x = cons.expand(z);
        save_state(x);
        tip = mesh.find_crack_tip(c, tip_prev);
        if (at_floor) break;
      }
      if (bt_fail) {
        if (!recover()) return abort_run("coupled solve failed in backtracking");
        continue;
      }

      bool changed = false;
      std::vector<int> cmarks;
      if (coarsen_flag) {
        cmarks = mesh.mark_coarsen(c, tip, margin);
        std::unordered_set<int> cut;
        const auto& active = mesh.active_cells();
        for (int row : quad.cut_rows) cut.insert(active[size_t(row)]);
        std::erase_if(cmarks, [&](int cell) { return cut.count(cell) > 0; });
        coarsen_flag = 0;
      }
      for (int pass = 0; pass <= mc.max_level + 1; ++pass) {
        std::vector<int> rmarks = mesh.mark_refine(c, tip, margin);
        if (rmarks.empty() && cmarks.empty()) break;
        if (mesh.adapt(rmarks, cmarks, fields)) {
          changed = true;
          bstore.invalidate();
        }
        cmarks.clear();
      }
      if (changed) {
        ++res.n_adapts;
        continue;  // re-solve the same t on the adapted mesh
      }

      c_prev = c;
      acc_ax = ax;
      acc_ay = ay;
      tip_prev = tip;
      t_acc = t;
      len = crack_length(mesh, quad, cfg.eps, c);
      const double J = j_integral_boundary(mesh, quad, dofs, mat, x);
      TraceRow row;
      row.step = k;
      row.t = t;
      row.tip_x = tip.x();
      row.tip_y = tip.y();
      row.crack_length = len;
      row.J = J;
      row.energy = st.energy;
      row.n_dofs = dofs.total();
      res.trace.push_back(row);
      if (dump) dump(k, mesh, quad, dofs, x);
      res.step_seconds.push_back(
          std::chrono::duration<double>(Clock::now() - step0).count());

      coarsen_flag = 1;
      dt_cur = sc.dt;
      halv_step = 0;
      t += dt_cur;
      ++k;
      step_done = true;
    }
  }

  res.ok = true;
  res.termination =
      len >= sc.target_crack_length ? "target_reached" : "time_cap";
  res.final_cells = int(mesh.active_cells().size());
  res.final_dofs = dofs.total();
  res.wall_seconds =
      std::chrono::duration<double>(Clock::now() - wall0).count();
  return res;
}

}  // namespace toughopt
