#pragma once

#include <vector>

#include "toughopt/assembly.hpp"

namespace toughopt {

// Pointwise evaluation of the discrete fields, including the enrichment on
// cut cells. Continuous quantities are well defined on cell boundaries.
struct FieldSample {
  Vec2 u = Vec2::Zero();
  Eigen::Matrix2d grad_u = Eigen::Matrix2d::Zero();
  double alpha = 0.0;
  Vec2 grad_alpha = Vec2::Zero();
  std::int8_t side = 1;  // +1 matrix, -1 inclusion
};

class FieldProbe {
 public:
  FieldProbe(const AdaptiveMesh& mesh, const Quadrature& quad,
             const DofMap& dofs, const InclusionLayout& layout,
             const Eigen::VectorXd& x);

  FieldSample operator()(const Vec2& p) const;
  FieldSample sample_in_cell(int row, const Vec2& p) const;

 private:
  const AdaptiveMesh& mesh_;
  const Quadrature& quad_;
  const DofMap& dofs_;
  const InclusionLayout& layout_;
  const Eigen::VectorXd& x_;
  std::unordered_map<int, int> row_of_;
};

// J = closed integral of e1 . [W I - (grad u)^T sigma] . n over the domain
// boundary, with the degraded matrix energy density. Wherever the phase
// field is pinned to zero on the boundary this equals the elastic density;
// where the crack band crosses the upstream edge the degradation removes
// the spurious notch-face contribution.
double j_integral_boundary(const AdaptiveMesh& mesh, const Quadrature& quad,
                           const DofMap& dofs, const MaterialSet& mat,
                           const Eigen::VectorXd& x);

// Same integrand on an interior axis-aligned contour (degraded density,
// material taken from the side of the sample point). Path-independence
// check; each side is split into `segments_per_side` 2-point Gauss pieces.
double j_integral_rect(const AdaptiveMesh& mesh, const Quadrature& quad,
                       const DofMap& dofs, const MaterialSet& mat,
                       const InclusionLayout& layout, const Eigen::VectorXd& x,
                       const Rect& contour, int segments_per_side = 256);

struct TraceRow {
  int step = 0;
  double t = 0.0;
  double tip_x = 0.0, tip_y = 0.0;
  double crack_length = 0.0;
  double J = 0.0;
  double energy = 0.0;
  int n_dofs = 0;
};

struct ToughnessReport {
  double g_eff = 0.0;
  double x_lo = 0.0, x_hi = 0.0;
  int half_width = 3;
};

// Restrict the trace to tip_x in [x_lo, x_hi], smooth J with a centered
// moving average of the given half-width (truncated at the ends, so
// constants are preserved exactly), and report the filtered maximum.
// Throws if no sample falls inside the window.
ToughnessReport effective_toughness(const std::vector<TraceRow>& trace,
                                    double x_lo, double x_hi,
                                    int half_width = 3);

// Worst case over the four crack-offset scenarios; expects exactly four
// finite values and throws otherwise.
double worst_case_objective(const std::vector<double>& per_scenario);

}  // namespace toughopt
