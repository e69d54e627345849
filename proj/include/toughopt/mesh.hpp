#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "toughopt/geometry.hpp"

namespace toughopt {

struct MeshConfig {
  Rect domain;
  double root_cell = 0.8;
  int max_level = 2;
  // Damage thresholds driving refinement/coarsening and tip tracking.
  double alpha_refine = 1e-3;
  double alpha_coarsen = 0.8;
  double alpha_tip = 0.95;
};

// Quadtree forest of square cells over a rectangular domain. Geometry is
// exact: cell anchors live on an integer grid in units of the finest cell
// size, so vertex identification and transfer weights carry no roundoff.
// 2:1 balance across edges is enforced on every adaptation.
class AdaptiveMesh {
 public:
  explicit AdaptiveMesh(const MeshConfig& cfg);

  const MeshConfig& config() const { return cfg_; }
  double unit() const { return unit_; }
  double min_cell() const { return unit_; }
  std::uint64_t generation() const { return generation_; }

  int n_active() const { return int(active_.size()); }
  const std::vector<int>& active_cells() const { return active_; }
  int cell_level(int c) const { return cells_[size_t(c)].level; }
  double cell_size(int c) const;
  Rect cell_rect(int c) const;
  // Corner vertex ids, counter-clockwise from the lower-left: SW,SE,NE,NW.
  std::array<int, 4> cell_vertices(int c) const;

  int n_vertices() const { return int(vcoord_.size()); }
  Vec2 vertex_pos(int v) const;
  bool is_boundary_vertex(int v) const;

  struct BoundaryFace {
    int cell;
    int side;  // 0=S, 1=E, 2=N, 3=W
  };
  const std::vector<BoundaryFace>& boundary_faces() const { return bfaces_; }

  // Hanging vertex constraints: value(mid) = (value(a) + value(b)) / 2.
  struct Hanging {
    int mid, a, b;
  };
  const std::vector<Hanging>& hanging() const { return hanging_; }
  bool is_hanging(int v) const { return hang_of_[size_t(v)] >= 0; }

  // Active cell containing p (clamped into the domain).
  int locate(const Vec2& p) const;

  // Active cells sharing the given edge of c (one coarser-or-equal cell, or
  // the row of finer cells). Used for marking rings and balance checks.
  void edge_neighbors(int c, int side, std::vector<int>& out) const;

  // Refine/coarsen in one transaction. The refine set is expanded to keep
  // 2:1 balance; coarsen requests that conflict with refinement, grouping or
  // balance are dropped. Vertex fields passed in are interpolated onto the
  // new vertex set (exact for continuous piecewise-bilinear data). Returns
  // true if the topology changed. `coarsened` reports whether any coarsening
  // was actually applied.
  bool adapt(const std::vector<int>& refine_cells,
             const std::vector<int>& coarsen_cells,
             const std::vector<Eigen::VectorXd*>& fields,
             bool* coarsened = nullptr);

  // Damage-driven marking. Refine: cells below max level ahead of
  // tip.x - margin with any corner damage above alpha_refine, expanded by
  // two rings of edge neighbors. Coarsen: cells above root level fully
  // behind tip.x - margin with all corners above alpha_coarsen.
  std::vector<int> mark_refine(const Eigen::VectorXd& alpha, const Vec2& tip,
                               double margin) const;
  std::vector<int> mark_coarsen(const Eigen::VectorXd& alpha, const Vec2& tip,
                                double margin) const;

  // Rightmost fully damaged vertex (alpha >= alpha_tip); y is averaged over
  // qualifying vertices within half a fine cell of the max x. Returns
  // `fallback` when nothing qualifies.
  Vec2 find_crack_tip(const Eigen::VectorXd& alpha, const Vec2& fallback) const;

 private:
  struct Cell {
    int level = 0;
    long ix = 0, iy = 0;  // anchor in finest units
    int parent = -1;
    int child = -1;  // first of 4 contiguous children; -1 = leaf
    bool active = false;
  };

  int cell_units(int level) const { return 1 << (cfg_.max_level - level); }
  int locate_int(long ix, long iy) const;
  int split(int c);
  void merge(int c);
  void rebuild();
  void expand_refine_set(std::vector<char>& inref) const;

  MeshConfig cfg_;
  double unit_ = 0.0;
  long nx_ = 0, ny_ = 0;  // domain size in finest units
  int n_roots_x_ = 0, n_roots_y_ = 0;

  std::vector<Cell> cells_;
  std::vector<int> free_blocks_;  // reusable 4-child blocks
  std::vector<int> active_;
  std::uint64_t generation_ = 0;

  std::unordered_map<long long, int> vmap_;
  std::vector<std::array<long, 2>> vcoord_;
  std::vector<Hanging> hanging_;
  std::vector<int> hang_of_;  // vertex -> index into hanging_, -1 if none
  std::vector<BoundaryFace> bfaces_;
};

}  // namespace toughopt
