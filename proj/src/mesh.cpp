#include "toughopt/mesh.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <set>
#include <stdexcept>

namespace toughopt {

namespace {
inline long long vkey(long ix, long iy) {
  return (static_cast<long long>(iy) << 32) | static_cast<long long>(ix);
}
}  // namespace

AdaptiveMesh::AdaptiveMesh(const MeshConfig& cfg) : cfg_(cfg) {
  if (cfg_.max_level < 0 || cfg_.max_level > 12)
    throw std::invalid_argument("mesh: max_level out of range");
  const double w = cfg_.domain.width(), h = cfg_.domain.height();
  n_roots_x_ = int(std::lround(w / cfg_.root_cell));
  n_roots_y_ = int(std::lround(h / cfg_.root_cell));
  if (n_roots_x_ < 1 || n_roots_y_ < 1 ||
      std::abs(n_roots_x_ * cfg_.root_cell - w) > 1e-9 * std::max(1.0, w) ||
      std::abs(n_roots_y_ * cfg_.root_cell - h) > 1e-9 * std::max(1.0, h))
    throw std::invalid_argument("mesh: domain not divisible by root_cell");
  unit_ = cfg_.root_cell / double(1 << cfg_.max_level);
  const long ru = cell_units(0);
  nx_ = long(n_roots_x_) * ru;
  ny_ = long(n_roots_y_) * ru;

  cells_.reserve(size_t(n_roots_x_) * size_t(n_roots_y_) * 2);
  for (int j = 0; j < n_roots_y_; ++j) {
    for (int i = 0; i < n_roots_x_; ++i) {
      Cell c;
      c.level = 0;
      c.ix = long(i) * ru;
      c.iy = long(j) * ru;
      c.active = true;
      cells_.push_back(c);
    }
  }
  rebuild();
}

double AdaptiveMesh::cell_size(int c) const {
  return unit_ * double(cell_units(cells_[size_t(c)].level));
}

Rect AdaptiveMesh::cell_rect(int c) const {
  const Cell& cl = cells_[size_t(c)];
  const double s = unit_ * double(cell_units(cl.level));
  const double x0 = cfg_.domain.x0 + unit_ * double(cl.ix);
  const double y0 = cfg_.domain.y0 + unit_ * double(cl.iy);
  return Rect{x0, y0, x0 + s, y0 + s};
}

std::array<int, 4> AdaptiveMesh::cell_vertices(int c) const {
  const Cell& cl = cells_[size_t(c)];
  const long s = cell_units(cl.level);
  const auto at = [&](long x, long y) {
    auto it = vmap_.find(vkey(x, y));
    assert(it != vmap_.end());
    return it->second;
  };
  return {at(cl.ix, cl.iy), at(cl.ix + s, cl.iy), at(cl.ix + s, cl.iy + s),
          at(cl.ix, cl.iy + s)};
}

Vec2 AdaptiveMesh::vertex_pos(int v) const {
  const auto& c = vcoord_[size_t(v)];
  return Vec2(cfg_.domain.x0 + unit_ * double(c[0]),
              cfg_.domain.y0 + unit_ * double(c[1]));
}

bool AdaptiveMesh::is_boundary_vertex(int v) const {
  const auto& c = vcoord_[size_t(v)];
  return c[0] == 0 || c[0] == nx_ || c[1] == 0 || c[1] == ny_;
}

int AdaptiveMesh::locate_int(long ix, long iy) const {
  if (ix < 0 || iy < 0 || ix >= nx_ || iy >= ny_) return -1;
  const long ru = cell_units(0);
  int c = int((iy / ru) * n_roots_x_ + (ix / ru));
  while (cells_[size_t(c)].child >= 0) {
    const Cell& cl = cells_[size_t(c)];
    const long half = cell_units(cl.level) / 2;
    const int dx = (ix - cl.ix) >= half ? 1 : 0;
    const int dy = (iy - cl.iy) >= half ? 1 : 0;
    c = cl.child + dy * 2 + dx;
  }
  assert(cells_[size_t(c)].active);
  return c;
}

int AdaptiveMesh::locate(const Vec2& p) const {
  long ix = long(std::floor((p.x() - cfg_.domain.x0) / unit_));
  long iy = long(std::floor((p.y() - cfg_.domain.y0) / unit_));
  ix = std::clamp(ix, 0L, nx_ - 1);
  iy = std::clamp(iy, 0L, ny_ - 1);
  return locate_int(ix, iy);
}

void AdaptiveMesh::edge_neighbors(int c, int side, std::vector<int>& out) const {
  out.clear();
  const Cell& cl = cells_[size_t(c)];
  const long s = cell_units(cl.level);
  long px = cl.ix, py = cl.iy;
  // First integer point just across the edge.
  switch (side) {
    case 0: py = cl.iy - 1; break;          // S
    case 1: px = cl.ix + s; break;          // E
    case 2: py = cl.iy + s; break;          // N
    default: px = cl.ix - 1; break;         // W
  }
  const bool horizontal = (side == 0 || side == 2);
  long t = horizontal ? cl.ix : cl.iy;
  const long tEnd = t + s;
  while (t < tEnd) {
    const int n = horizontal ? locate_int(t, py) : locate_int(px, t);
    if (n < 0) return;  // domain boundary
    out.push_back(n);
    t += cell_units(cells_[size_t(n)].level);
  }
}

int AdaptiveMesh::split(int c) {
  Cell& cl = cells_[size_t(c)];
  assert(cl.active && cl.child < 0 && cl.level < cfg_.max_level);
  int base;
  if (!free_blocks_.empty()) {
    base = free_blocks_.back();
    free_blocks_.pop_back();
  } else {
    base = int(cells_.size());
    cells_.resize(cells_.size() + 4);
  }
  Cell& p = cells_[size_t(c)];  // re-reference after potential realloc
  const long half = cell_units(p.level) / 2;
  for (int k = 0; k < 4; ++k) {
    Cell& ch = cells_[size_t(base + k)];
    ch.level = p.level + 1;
    ch.ix = p.ix + (k & 1 ? half : 0);
    ch.iy = p.iy + (k & 2 ? half : 0);
    ch.parent = c;
    ch.child = -1;
    ch.active = true;
  }
  p.child = base;
  p.active = false;
  return base;
}

void AdaptiveMesh::merge(int c) {
  Cell& p = cells_[size_t(c)];
  assert(p.child >= 0);
  for (int k = 0; k < 4; ++k) {
    Cell& ch = cells_[size_t(p.child + k)];
    assert(ch.active && ch.child < 0);
    ch.active = false;
    ch.parent = -1;
  }
  free_blocks_.push_back(p.child);
  p.child = -1;
  p.active = true;
}

void AdaptiveMesh::rebuild() {
  active_.clear();
  for (int c = 0; c < int(cells_.size()); ++c)
    if (cells_[size_t(c)].active) active_.push_back(c);

  vmap_.clear();
  vcoord_.clear();
  auto vertex_id = [&](long x, long y) {
    const long long k = vkey(x, y);
    auto [it, inserted] = vmap_.emplace(k, int(vcoord_.size()));
    if (inserted) vcoord_.push_back({x, y});
    return it->second;
  };
  for (int c : active_) {
    const Cell& cl = cells_[size_t(c)];
    const long s = cell_units(cl.level);
    vertex_id(cl.ix, cl.iy);
    vertex_id(cl.ix + s, cl.iy);
    vertex_id(cl.ix + s, cl.iy + s);
    vertex_id(cl.ix, cl.iy + s);
  }

  // Hanging constraints: a coarse edge whose midpoint exists as a vertex.
  hanging_.clear();
  hang_of_.assign(vcoord_.size(), -1);
  for (int c : active_) {
    const Cell& cl = cells_[size_t(c)];
    if (cl.level == cfg_.max_level) continue;
    const long s = cell_units(cl.level);
    const long h = s / 2;
    const std::array<std::array<long, 4>, 4> edges = {{
        {cl.ix, cl.iy, cl.ix + s, cl.iy},          // S
        {cl.ix + s, cl.iy, cl.ix + s, cl.iy + s},  // E
        {cl.ix, cl.iy + s, cl.ix + s, cl.iy + s},  // N
        {cl.ix, cl.iy, cl.ix, cl.iy + s},          // W
    }};
    (void)h;
    for (int e = 0; e < 4; ++e) {
      const long mx = (edges[size_t(e)][0] + edges[size_t(e)][2]) / 2;
      const long my = (edges[size_t(e)][1] + edges[size_t(e)][3]) / 2;
      auto it = vmap_.find(vkey(mx, my));
      if (it == vmap_.end()) continue;
      const int mid = it->second;
      if (hang_of_[size_t(mid)] >= 0) continue;
      const int a = vmap_.at(vkey(edges[size_t(e)][0], edges[size_t(e)][1]));
      const int b = vmap_.at(vkey(edges[size_t(e)][2], edges[size_t(e)][3]));
      hang_of_[size_t(mid)] = int(hanging_.size());
      hanging_.push_back({mid, a, b});
    }
  }

  bfaces_.clear();
  for (int c : active_) {
    const Cell& cl = cells_[size_t(c)];
    const long s = cell_units(cl.level);
    if (cl.iy == 0) bfaces_.push_back({c, 0});
    if (cl.ix + s == nx_) bfaces_.push_back({c, 1});
    if (cl.iy + s == ny_) bfaces_.push_back({c, 2});
    if (cl.ix == 0) bfaces_.push_back({c, 3});
  }
  ++generation_;
}

void AdaptiveMesh::expand_refine_set(std::vector<char>& inref) const {
  // Refining a cell requires every strictly coarser edge neighbor to refine
  // as well; iterate to a fixed point.
  std::vector<int> work;
  for (int c = 0; c < int(inref.size()); ++c)
    if (inref[size_t(c)]) work.push_back(c);
  std::vector<int> nbrs;
  while (!work.empty()) {
    const int c = work.back();
    work.pop_back();
    const int lvl = cells_[size_t(c)].level;
    for (int side = 0; side < 4; ++side) {
      edge_neighbors(c, side, nbrs);
      for (int n : nbrs) {
        if (cells_[size_t(n)].level < lvl && !inref[size_t(n)]) {
          inref[size_t(n)] = 1;
          work.push_back(n);
        }
      }
    }
  }
}

bool AdaptiveMesh::adapt(const std::vector<int>& refine_cells,
                         const std::vector<int>& coarsen_cells,
                         const std::vector<Eigen::VectorXd*>& fields,
                         bool* coarsened) {
  if (coarsened) *coarsened = false;
  std::vector<char> inref(cells_.size(), 0);
  for (int c : refine_cells)
    if (c >= 0 && c < int(cells_.size()) && cells_[size_t(c)].active &&
        cells_[size_t(c)].level < cfg_.max_level)
      inref[size_t(c)] = 1;
  expand_refine_set(inref);

  // Coarsen candidates: all four siblings active, marked, not being refined.
  std::vector<int> parents;
  {
    std::set<int> seen;
    std::vector<char> inco(cells_.size(), 0);
    for (int c : coarsen_cells)
      if (c >= 0 && c < int(cells_.size()) && cells_[size_t(c)].active &&
          cells_[size_t(c)].level > 0)
        inco[size_t(c)] = 1;
    for (int c : coarsen_cells) {
      if (c < 0 || c >= int(cells_.size())) continue;
      const int p = cells_[size_t(c)].parent;
      if (p < 0 || !seen.insert(p).second) continue;
      const int base = cells_[size_t(p)].child;
      bool ok = base >= 0;
      for (int k = 0; ok && k < 4; ++k) {
        const Cell& ch = cells_[size_t(base + k)];
        ok = ch.active && ch.child < 0 && inco[size_t(base + k)] &&
             !inref[size_t(base + k)];
      }
      if (!ok) continue;
      // Balance: neighbors of the parent may end at most one level finer.
      const int plvl = cells_[size_t(p)].level;
      bool bal = true;
      std::vector<int> nbrs;
      for (int k = 0; bal && k < 4; ++k) {
        for (int side = 0; bal && side < 4; ++side) {
          edge_neighbors(base + k, side, nbrs);
          for (int n : nbrs) {
            if (n == base || (n > base && n < base + 4)) continue;
            const int eff = cells_[size_t(n)].level + (inref[size_t(n)] ? 1 : 0);
            if (eff > plvl + 1) {
              bal = false;
              break;
            }
          }
        }
      }
      if (bal) parents.push_back(p);
    }
  }

  bool any_ref = false;
  for (size_t c = 0; c < inref.size(); ++c)
    if (inref[c]) any_ref = true;
  if (!any_ref && parents.empty()) return false;

  // Snapshot for field transfer.
  struct Snapshot {
    std::vector<Cell> cells;
    std::unordered_map<long long, int> vmap;
    int n_roots_x;
    int max_level;
  };
  Snapshot old{cells_, vmap_, n_roots_x_, cfg_.max_level};
  std::vector<Eigen::VectorXd> old_fields;
  old_fields.reserve(fields.size());
  for (const Eigen::VectorXd* f : fields) old_fields.push_back(*f);

  for (size_t c = 0; c < inref.size(); ++c)
    if (inref[c]) split(int(c));
  for (int p : parents) merge(p);
  if (coarsened) *coarsened = !parents.empty();
  rebuild();

  // Interpolate each field at the new vertex positions from the old forest.
  auto old_locate = [&](long ix, long iy) {
    const long ru = 1L << old.max_level;
    int c = int((iy / ru) * old.n_roots_x + (ix / ru));
    while (old.cells[size_t(c)].child >= 0) {
      const Cell& cl = old.cells[size_t(c)];
      const long half = (1L << (old.max_level - cl.level)) / 2;
      const int dx = (ix - cl.ix) >= half ? 1 : 0;
      const int dy = (iy - cl.iy) >= half ? 1 : 0;
      c = cl.child + dy * 2 + dx;
    }
    return c;
  };
  const int nv = n_vertices();
  for (size_t fi = 0; fi < fields.size(); ++fi) {
    Eigen::VectorXd& dst = *fields[size_t(fi)];
    const Eigen::VectorXd& src = old_fields[fi];
    dst.resize(nv);
    for (int v = 0; v < nv; ++v) {
      const long ix = vcoord_[size_t(v)][0], iy = vcoord_[size_t(v)][1];
      const int oc = old_locate(std::min(ix, nx_ - 1), std::min(iy, ny_ - 1));
      const Cell& cl = old.cells[size_t(oc)];
      const long s = 1L << (old.max_level - cl.level);
      const double tx = double(ix - cl.ix) / double(s);
      const double ty = double(iy - cl.iy) / double(s);
      const auto vid = [&](long x, long y) { return old.vmap.at(vkey(x, y)); };
      const double f00 = src[vid(cl.ix, cl.iy)];
      const double f10 = src[vid(cl.ix + s, cl.iy)];
      const double f11 = src[vid(cl.ix + s, cl.iy + s)];
      const double f01 = src[vid(cl.ix, cl.iy + s)];
      dst[v] = (1.0 - tx) * (1.0 - ty) * f00 + tx * (1.0 - ty) * f10 +
               tx * ty * f11 + (1.0 - tx) * ty * f01;
    }
  }
  return true;
}

std::vector<int> AdaptiveMesh::mark_refine(const Eigen::VectorXd& alpha,
                                           const Vec2& tip, double margin) const {
  std::vector<char> mark(cells_.size(), 0);
  std::vector<int> base;
  for (int c : active_) {
    if (cells_[size_t(c)].level >= cfg_.max_level) continue;
    const Rect r = cell_rect(c);
    if (r.x1 < tip.x() - margin) continue;
    const auto vs = cell_vertices(c);
    bool hit = false;
    for (int v : vs)
      if (alpha[v] > cfg_.alpha_refine) hit = true;
    if (hit) {
      mark[size_t(c)] = 1;
      base.push_back(c);
    }
  }
  // Two rings of edge neighbors around the base set.
  std::vector<int> ring = base, next, nbrs;
  for (int pass = 0; pass < 2; ++pass) {
    next.clear();
    for (int c : ring) {
      for (int side = 0; side < 4; ++side) {
        edge_neighbors(c, side, nbrs);
        for (int n : nbrs) {
          if (mark[size_t(n)]) continue;
          mark[size_t(n)] = 1;
          if (cells_[size_t(n)].level < cfg_.max_level) base.push_back(n);
          next.push_back(n);
        }
      }
    }
    ring.swap(next);
  }
  std::vector<int> out;
  for (int c : base)
    if (cells_[size_t(c)].level < cfg_.max_level) out.push_back(c);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> AdaptiveMesh::mark_coarsen(const Eigen::VectorXd& alpha,
                                            const Vec2& tip, double margin) const {
  std::vector<int> out;
  for (int c : active_) {
    if (cells_[size_t(c)].level == 0) continue;
    const Rect r = cell_rect(c);
    if (r.x1 >= tip.x() - margin) continue;
    const auto vs = cell_vertices(c);
    bool all = true;
    for (int v : vs)
      if (alpha[v] < cfg_.alpha_coarsen) all = false;
    if (all) out.push_back(c);
  }
  return out;
}

Vec2 AdaptiveMesh::find_crack_tip(const Eigen::VectorXd& alpha,
                                  const Vec2& fallback) const {
  double xmax = -std::numeric_limits<double>::infinity();
  for (int v = 0; v < n_vertices(); ++v) {
    if (alpha[v] >= cfg_.alpha_tip) xmax = std::max(xmax, vertex_pos(v).x());
  }
  if (!std::isfinite(xmax)) return fallback;
  double ysum = 0.0;
  int ny = 0;
  for (int v = 0; v < n_vertices(); ++v) {
    if (alpha[v] < cfg_.alpha_tip) continue;
    const Vec2 p = vertex_pos(v);
    if (p.x() >= xmax - 0.5 * unit_) {
      ysum += p.y();
      ++ny;
    }
  }
  return Vec2(xmax, ysum / double(ny));
}

}  // namespace toughopt
