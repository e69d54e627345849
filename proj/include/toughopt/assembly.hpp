#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "toughopt/geometry.hpp"
#include "toughopt/mesh.hpp"
#include "toughopt/model.hpp"

namespace toughopt {

struct SurfingParams {
  double K_I = 1.1;
  double v = 50.0;
  double E = 1.0;  // matrix modulus entering the K-field
  double nu = 0.3;
};

// Dirichlet data dragging the crack: K-field about the center (v*t, tip_y).
Vec2 surfing_displacement(const Vec2& p, double t, double tip_y,
                          const SurfingParams& sp);

struct MaterialSet {
  Lame matrix;
  Lame inclusion;
  double k_interface = 100.0;
  double G_c = 1.0;
  double eps = 0.5;
  double a1 = 0.0;       // 4*l_ch/(pi*eps)
  double g_floor = 1e-9; // residual stiffness blended into g (assembly only)
};

MaterialSet make_materials(const MaterialParams& mp, double eps,
                           double g_floor = 1e-9);

// ---------------------------------------------------------------------------
// quadrature
// ---------------------------------------------------------------------------

struct CellQuadrature {
  struct BulkPt {
    Vec2 p;
    double w;
    std::int8_t side;  // +1 matrix, -1 inclusion
  };
  struct FacePt {
    Vec2 p;
    double w;   // arc-length weight
    Vec2 n;     // unit normal pointing away from the inclusion
  };
  bool cut = false;
  int incl = -1;
  double minority = 0.0;  // smaller side's area fraction (cut cells)
  std::vector<BulkPt> bulk;
  std::vector<FacePt> face;
};

struct Quadrature {
  std::vector<CellQuadrature> cells;  // parallel to mesh.active_cells()
  std::vector<int> cut_rows;          // indices into active_cells()
  std::vector<int> ambiguous;         // mesh cell ids needing refinement
  std::uint64_t mesh_generation = 0;
};

// Classify every active cell against the layout and build bulk + interface
// rules. Uncut cells get 2x2 tensor Gauss; cut cells are split along a
// straight chord between edge roots of the level set (roots by bisection),
// each side fan-triangulated with a 3-point degree-2 rule per triangle.
// Cells cut by more than one inclusion, or with a checkerboard sign pattern,
// or fully containing an inclusion, are reported in `ambiguous`.
Quadrature build_quadrature(const AdaptiveMesh& mesh,
                            const InclusionLayout& layout);

// ---------------------------------------------------------------------------
// dof layout
// ---------------------------------------------------------------------------

// Global vector layout: [a (2 per vertex) | b (2 per enriched pair) | c].
struct DofMap {
  int nv = 0;
  int nA = 0, nB = 0, nC = 0;
  std::vector<std::pair<int, int>> pairs;  // (vertex, inclusion), sorted
  std::unordered_map<long long, int> pair_of;
  std::vector<std::int8_t> pair_sign;  // sgn(psi_incl(X_v))

  int total() const { return nA + nB + nC; }
  int a_dof(int v, int comp) const { return 2 * v + comp; }
  int b_dof(int pair, int comp) const { return nA + 2 * pair + comp; }
  int c_dof(int v) const { return nA + nB + v; }
  int pair_index(int v, int incl) const;
};

// Enrichment pairs live on vertices of cut cells; pairs whose support sees a
// minority-side area fraction below `min_support` are dropped (conditioning).
DofMap build_dofs(const AdaptiveMesh& mesh, const Quadrature& quad,
                  const InclusionLayout& layout, double min_support = 1e-8);

// ---------------------------------------------------------------------------
// constraints
// ---------------------------------------------------------------------------

struct BCParams {
  double t = 0.0;
  double tip_y = 0.0;
  SurfingParams surf;
  double notch_len = 5.0;     // seed band: y = 0, x <= notch_len gets c = 1
  // Half-width of the strip around the seed line on the upstream edge where
  // the boundary alpha pin is lifted. The notch crosses that edge, so pinning
  // alpha = 0 next to the seed would leave a stiff one-cell ligament that
  // fights the imposed crack-opening jump and pollutes the boundary J.
  double mouth_halfwidth = 0.0;
  bool pin_alpha_boundary = true;
  bool surfing = true;        // false: homogeneous zero Dirichlet on u
};

// Affine reduction x_full = P z + g condensing hanging-node averages,
// Dirichlet displacement data, boundary-pinned alpha and b dofs, the crack
// seed, optional per-vertex pinned alpha values, or a full alpha freeze.
struct Constraints {
  int n_total = 0, n_red = 0;
  Eigen::SparseMatrix<double> P;
  Eigen::VectorXd g;
  std::vector<int> red_of;  // full dof -> reduced index, -1 if constrained
  // Free phase-field dofs: (reduced index, vertex id), for box bounds.
  std::vector<std::pair<int, int>> c_free;

  Eigen::VectorXd expand(const Eigen::VectorXd& z) const { return P * z + g; }
  Eigen::VectorXd reduce(const Eigen::VectorXd& x_full) const;
};

Constraints build_constraints(
    const AdaptiveMesh& mesh, const DofMap& dofs, const BCParams& bc,
    const Eigen::VectorXd* freeze_c = nullptr,
    const std::vector<std::pair<int, double>>* pin_c = nullptr);

// ---------------------------------------------------------------------------
// energy / derivatives
// ---------------------------------------------------------------------------

struct EnergyBreakdown {
  double bulk_matrix = 0.0;
  double bulk_inclusion = 0.0;
  double surface = 0.0;    // (G_c/c_w) * regularization term
  double interface = 0.0;
  double total() const {
    return bulk_matrix + bulk_inclusion + surface + interface;
  }
};

class Assembler {
 public:
  Assembler(const AdaptiveMesh& mesh, const MaterialSet& mat,
            const Quadrature& quad, const DofMap& dofs);

  double energy(const Eigen::VectorXd& x, EnergyBreakdown* parts = nullptr) const;
  void gradient(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;
  void hessian(const Eigen::VectorXd& x,
               std::vector<Eigen::Triplet<double>>& out) const;
  // Regularized crack-surface measure (1/c_w) int [w(a)/eps + eps|grad a|^2].
  double crack_surface(const Eigen::VectorXd& x) const;

  const DofMap& dofs() const { return dofs_; }

 private:
  struct LocalDofs;
  void gather(int row, LocalDofs& ld) const;

  const AdaptiveMesh& mesh_;
  const MaterialSet& mat_;
  const Quadrature& quad_;
  const DofMap& dofs_;
};

}  // namespace toughopt
