#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "toughopt/assembly.hpp"
#include "toughopt/postproc.hpp"

namespace toughopt {

struct NewtonOptions {
  double tol = 1e-7;       // inf-norm of the reduced (barrier) gradient
  int max_iter = 120;      // Newton iterations per barrier stage
  double mu_init = 1e-9;   // initial barrier parameter, decreased monotonically
  double mu_min = 1e-9;    // already tight at mu_init; extra stages only polish
  double mu_factor = 0.1;
  double ftb = 0.995;      // fraction-to-boundary step cap
  double armijo = 1e-4;
  int max_backtrack = 50;
  double pin_gap = 1e-6;   // bound pairs closer than this must be pinned upstream
};

struct KKTReport {
  // Multiplier estimates mu/(z-lo), mu/(hi-z) on the reduced variables
  // (zero where unbounded). Complementarity residual equals the final mu.
  Eigen::VectorXd lambda_lo, lambda_hi;
  double mu_final = 0.0;
};

struct SolveStats {
  bool ok = false;
  int newton_iters = 0;
  double grad_norm = 0.0;
  double energy = 0.0;
};

// Minimize the assembled energy over the reduced variables, z entering as
// the warm start and leaving as the solution, subject to lo <= z <= hi
// (entries may be +-infinity; equal bounds are not allowed here — pin such
// dofs through the constraint builder instead). Primal log-barrier Newton
// with a direct symmetric factorization, diagonal-shift fallback on
// indefiniteness, fraction-to-boundary cap and Armijo line search.
SolveStats interior_point_minimize(const Assembler& as, const Constraints& cons,
                                   const Eigen::VectorXd& lo,
                                   const Eigen::VectorXd& hi,
                                   Eigen::VectorXd& z, const NewtonOptions& opt,
                                   KKTReport* kkt = nullptr);

// Regularized crack-surface measure of a nodal damage field.
double crack_length(const AdaptiveMesh& mesh, const Quadrature& quad,
                    double eps, const Eigen::VectorXd& alpha);

struct StepControls {
  double dt = 0.01;
  double t_max = 2.0;
  double max_crack_advance = 2.0;
  double target_crack_length = 80.0;
  double irrev_threshold = 0.5;  // history enters the lower bound above this
  double notch_len = 5.0;
  int max_dt_halvings = 4;
};

struct SimulationConfig {
  Rect domain{0.0, -15.2, 100.0, 15.2};
  MeshConfig mesh;
  MaterialParams materials;
  double eps = 0.5;
  SurfingParams surf;
  StepControls controls;
  NewtonOptions newton;
  double refine_margin = 0.0;  // <= 0: 2*pi*eps
  int interface_level = -1;    // quadtree level forced on cut cells; <0: max
  double min_support = 1e-8;
  double window_lo = 50.0, window_hi = 80.0;  // toughness window on tip_x
  int smooth_half_width = 3;
};

struct SimulationResult {
  std::vector<TraceRow> trace;
  std::string termination;  // target_reached | time_cap | aborted: <why>
  bool ok = false;
  int n_backtracks = 0;
  int n_dt_halvings = 0;
  int n_adapts = 0;
  int final_cells = 0;
  int final_dofs = 0;
  double wall_seconds = 0.0;
  std::vector<double> step_seconds;  // per accepted step
};

// Optional per-accepted-step dump of the discrete state.
using FieldDumpHook =
    std::function<void(int step, const AdaptiveMesh&, const Quadrature&,
                       const DofMap&, const Eigen::VectorXd&)>;

// Time-stepping driver: per step build constraints at t, presolve the
// displacements at frozen damage, solve the coupled bound-constrained
// problem, locate the tip, decrement t while the advance exceeds the cap
// (re-solving without adaptation), then run the marking/adaptation loop and
// re-solve at the same t whenever the mesh changed; accepted steps record
// the J-integral and crack measures. Solve failures halve dt a limited
// number of times before aborting.
SimulationResult run_surfing_simulation(const SimulationConfig& cfg,
                                        const InclusionLayout& layout,
                                        const FieldDumpHook& dump = {});

}  // namespace toughopt
