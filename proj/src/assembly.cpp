#include "toughopt/assembly.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>

namespace toughopt {

Vec2 surfing_displacement(const Vec2& p, double t, double tip_y,
                          const SurfingParams& sp) {
  return surfing_displacement(p, Vec2(sp.v * t, tip_y), sp.K_I, sp.E, sp.nu);
}

MaterialSet make_materials(const MaterialParams& mp, double eps, double g_floor) {
  MaterialSet m;
  m.matrix = lame_constants(mp.E_matrix, mp.nu);
  m.inclusion = lame_constants(mp.E_inclusion, mp.nu);
  m.k_interface = mp.k_interface;
  m.G_c = mp.G_c;
  m.eps = eps;
  m.a1 = czm_a1(mp.l_ch, eps);
  m.g_floor = g_floor;
  return m;
}

// ---------------------------------------------------------------------------
// shape functions (bilinear on a square cell, corners SW,SE,NE,NW)
// ---------------------------------------------------------------------------

namespace {

struct Shapes {
  double N[4];
  double dNx[4];
  double dNy[4];
};

inline void eval_shapes(const Rect& r, double invh, const Vec2& p, Shapes& s) {
  const double xi = (p.x() - r.x0) * invh;
  const double eta = (p.y() - r.y0) * invh;
  s.N[0] = (1.0 - xi) * (1.0 - eta);
  s.N[1] = xi * (1.0 - eta);
  s.N[2] = xi * eta;
  s.N[3] = (1.0 - xi) * eta;
  s.dNx[0] = -(1.0 - eta) * invh;
  s.dNx[1] = (1.0 - eta) * invh;
  s.dNx[2] = eta * invh;
  s.dNx[3] = -eta * invh;
  s.dNy[0] = -(1.0 - xi) * invh;
  s.dNy[1] = -xi * invh;
  s.dNy[2] = xi * invh;
  s.dNy[3] = (1.0 - xi) * invh;
}

double polygon_area(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

// Root of the level set along segment [pa, pb]; fa, fb have opposite signs.
Vec2 edge_root(const Ellipse& e, const Vec2& pa, const Vec2& pb, double fa) {
  double lo = 0.0, hi = 1.0;
  const bool lo_neg = fa < 0.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = e.level_set(pa + mid * (pb - pa));
    if ((fm < 0.0) == lo_neg)
      lo = mid;
    else
      hi = mid;
  }
  const double t = 0.5 * (lo + hi);
  return pa + t * (pb - pa);
}

void add_triangle_rule(const Vec2& A, const Vec2& B, const Vec2& C,
                       std::int8_t side, std::vector<CellQuadrature::BulkPt>& out) {
  const double area =
      0.5 * std::abs((B.x() - A.x()) * (C.y() - A.y()) -
                     (C.x() - A.x()) * (B.y() - A.y()));
  if (area <= 0.0) return;
  const double w = area / 3.0;
  out.push_back({0.5 * (A + B), w, side});
  out.push_back({0.5 * (B + C), w, side});
  out.push_back({0.5 * (C + A), w, side});
}

}  // namespace

// ---------------------------------------------------------------------------
// quadrature
// ---------------------------------------------------------------------------

Quadrature build_quadrature(const AdaptiveMesh& mesh,
                            const InclusionLayout& layout) {
  Quadrature out;
  out.mesh_generation = mesh.generation();
  const auto& active = mesh.active_cells();
  out.cells.resize(active.size());

  const double gp = 0.5 / std::sqrt(3.0);  // 2x2 Gauss offset from center

  for (size_t row = 0; row < active.size(); ++row) {
    const int c = active[row];
    CellQuadrature& q = out.cells[row];
    const Rect r = mesh.cell_rect(c);
    const double h = r.width();
    const Vec2 corner[4] = {Vec2(r.x0, r.y0), Vec2(r.x1, r.y0),
                            Vec2(r.x1, r.y1), Vec2(r.x0, r.y1)};

    // Candidate inclusions overlapping this cell.
    std::vector<int> cutters;
    int inside_of = -1;
    bool contains_center = false;
    const Vec2 cc(0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1));
    double sgn[4] = {1.0, 1.0, 1.0, 1.0};
    for (size_t l = 0; l < layout.ellipses.size(); ++l) {
      const Ellipse& e = layout.ellipses[l];
      const Vec2 hw = e.bbox_halfwidth();
      if (std::abs(e.center.x() - cc.x()) > hw.x() + 0.51 * h) continue;
      if (std::abs(e.center.y() - cc.y()) > hw.y() + 0.51 * h) continue;
      double s[4];
      int neg = 0;
      for (int k = 0; k < 4; ++k) {
        s[k] = e.level_set(corner[k]) >= 0.0 ? 1.0 : -1.0;
        if (s[k] < 0.0) ++neg;
      }
      if (neg == 4) {
        inside_of = int(l);
      } else if (neg > 0) {
        cutters.push_back(int(l));
        for (int k = 0; k < 4; ++k) sgn[k] = s[k];
      } else if (r.contains(e.center)) {
        contains_center = true;  // inclusion inside an uncut cell
      }
    }

    auto tensor_rule = [&](std::int8_t side) {
      const double w = 0.25 * h * h;
      for (int k = 0; k < 4; ++k) {
        const double ox = (k & 1) ? gp : -gp;
        const double oy = (k & 2) ? gp : -gp;
        q.bulk.push_back({Vec2(cc.x() + ox * h, cc.y() + oy * h), w, side});
      }
    };

    if (cutters.size() != 1) {
      // Uncut, fully interior, or unresolved multi-cut cell.
      tensor_rule(inside_of >= 0 ? std::int8_t(-1) : std::int8_t(1));
      if (cutters.size() > 1 || contains_center) out.ambiguous.push_back(c);
      continue;
    }

    const int l = cutters[0];
    const Ellipse& e = layout.ellipses[size_t(l)];
    int crossed[4];
    int ncross = 0;
    for (int k = 0; k < 4; ++k)
      if (sgn[k] * sgn[(k + 1) % 4] < 0.0) crossed[ncross++] = k;
    if (ncross != 2) {
      tensor_rule(e.level_set(cc) >= 0.0 ? std::int8_t(1) : std::int8_t(-1));
      out.ambiguous.push_back(c);
      continue;
    }

    // Ring of corners with roots inserted on the two crossed edges.
    struct RingPt {
      Vec2 p;
      int tag;  // +1/-1 corner side, 0 root
    };
    std::vector<RingPt> ring;
    ring.reserve(6);
    Vec2 roots[2];
    int nroot = 0;
    for (int k = 0; k < 4; ++k) {
      ring.push_back({corner[k], int(sgn[k])});
      if (nroot < 2 && (crossed[nroot] == k)) {
        const Vec2 rt = edge_root(e, corner[k], corner[(k + 1) % 4],
                                  e.level_set(corner[k]));
        roots[nroot++] = rt;
        ring.push_back({rt, 0});
      }
    }
    std::vector<Vec2> plus, minus;
    for (const RingPt& rp : ring) {
      if (rp.tag >= 0) plus.push_back(rp.p);
      if (rp.tag <= 0) minus.push_back(rp.p);
    }
    const double a_plus = std::abs(polygon_area(plus));
    const double a_minus = std::abs(polygon_area(minus));
    q.cut = true;
    q.incl = l;
    q.minority = std::min(a_plus, a_minus) / (h * h);
    for (size_t k = 1; k + 1 < plus.size(); ++k)
      add_triangle_rule(plus[0], plus[k], plus[k + 1], +1, q.bulk);
    for (size_t k = 1; k + 1 < minus.size(); ++k)
      add_triangle_rule(minus[0], minus[k], minus[k + 1], -1, q.bulk);

    // Interface rule: 2-point Gauss on the chord, normal toward the matrix.
    const Vec2 chord = roots[1] - roots[0];
    const double len = chord.norm();
    if (len > 0.0) {
      Vec2 n(chord.y(), -chord.x());
      n /= len;
      Vec2 cplus = Vec2::Zero();
      for (const Vec2& p : plus) cplus += p;
      cplus /= double(plus.size());
      const Vec2 mid = 0.5 * (roots[0] + roots[1]);
      if (n.dot(cplus - mid) < 0.0) n = -n;
      const double t1 = 0.5 - gp, t2 = 0.5 + gp;
      q.face.push_back({roots[0] + t1 * chord, 0.5 * len, n});
      q.face.push_back({roots[0] + t2 * chord, 0.5 * len, n});
    }
    out.cut_rows.push_back(int(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// dofs
// ---------------------------------------------------------------------------

namespace {
inline long long pair_key(int v, int incl) {
  return (static_cast<long long>(v) << 20) | static_cast<long long>(incl);
}
}  // namespace

int DofMap::pair_index(int v, int incl) const {
  auto it = pair_of.find(pair_key(v, incl));
  return it == pair_of.end() ? -1 : it->second;
}

DofMap build_dofs(const AdaptiveMesh& mesh, const Quadrature& quad,
                  const InclusionLayout& layout, double min_support) {
  DofMap dm;
  dm.nv = mesh.n_vertices();
  dm.nA = 2 * dm.nv;
  dm.nC = dm.nv;

  std::unordered_map<long long, double> support;
  const auto& active = mesh.active_cells();
  for (int row : quad.cut_rows) {
    const CellQuadrature& q = quad.cells[size_t(row)];
    const auto vs = mesh.cell_vertices(active[size_t(row)]);
    for (int v : vs) {
      auto [it, fresh] = support.emplace(pair_key(v, q.incl), q.minority);
      if (!fresh) it->second = std::max(it->second, q.minority);
    }
  }
  for (const auto& [key, minority] : support) {
    if (minority < min_support) continue;
    dm.pairs.emplace_back(int(key >> 20), int(key & 0xfffff));
  }
  std::sort(dm.pairs.begin(), dm.pairs.end());
  dm.pair_sign.resize(dm.pairs.size());
  for (size_t i = 0; i < dm.pairs.size(); ++i) {
    dm.pair_of.emplace(pair_key(dm.pairs[i].first, dm.pairs[i].second), int(i));
    const double psi = layout.ellipses[size_t(dm.pairs[i].second)].level_set(
        mesh.vertex_pos(dm.pairs[i].first));
    dm.pair_sign[i] = psi >= 0.0 ? std::int8_t(1) : std::int8_t(-1);
  }
  dm.nB = 2 * int(dm.pairs.size());
  return dm;
}

// ---------------------------------------------------------------------------
// constraints
// ---------------------------------------------------------------------------

Eigen::VectorXd Constraints::reduce(const Eigen::VectorXd& x_full) const {
  Eigen::VectorXd z(n_red);
  for (int i = 0; i < n_total; ++i)
    if (red_of[size_t(i)] >= 0) z[red_of[size_t(i)]] = x_full[i];
  return z;
}

Constraints build_constraints(
    const AdaptiveMesh& mesh, const DofMap& dofs, const BCParams& bc,
    const Eigen::VectorXd* freeze_c,
    const std::vector<std::pair<int, double>>* pin_c) {
  const int n = dofs.total();
  // 0 = free, 1 = fixed value, 2 = hanging average of two master dofs.
  std::vector<std::int8_t> kind(size_t(n), 0);
  std::vector<double> value(size_t(n), 0.0);
  std::vector<std::array<int, 2>> masters(size_t(n), {-1, -1});

  const int nv = dofs.nv;
  auto is_seed = [&](int v) {
    if (bc.notch_len <= 0.0) return false;
    const Vec2 p = mesh.vertex_pos(v);
    return std::abs(p.y()) <= 1e-9 && p.x() <= bc.notch_len + 1e-9;
  };
  const double x_mouth = mesh.config().domain.x0;
  auto is_mouth = [&](int v) {
    if (bc.mouth_halfwidth <= 0.0 || bc.notch_len <= 0.0) return false;
    const Vec2 p = mesh.vertex_pos(v);
    return p.x() <= x_mouth + 1e-9 &&
           std::abs(p.y()) <= bc.mouth_halfwidth + 1e-9;
  };

  for (const auto& h : mesh.hanging()) {
    for (int comp = 0; comp < 2; ++comp) {
      const int d = dofs.a_dof(h.mid, comp);
      kind[size_t(d)] = 2;
      masters[size_t(d)] = {dofs.a_dof(h.a, comp), dofs.a_dof(h.b, comp)};
    }
    const int d = dofs.c_dof(h.mid);
    kind[size_t(d)] = 2;
    masters[size_t(d)] = {dofs.c_dof(h.a), dofs.c_dof(h.b)};
  }

  for (int v = 0; v < nv; ++v) {
    if (!mesh.is_boundary_vertex(v)) continue;
    if (kind[size_t(dofs.a_dof(v, 0))] != 2) {
      const Vec2 u = bc.surfing ? surfing_displacement(mesh.vertex_pos(v), bc.t,
                                                       bc.tip_y, bc.surf)
                                : Vec2::Zero();
      for (int comp = 0; comp < 2; ++comp) {
        const int d = dofs.a_dof(v, comp);
        kind[size_t(d)] = 1;
        value[size_t(d)] = u[comp];
      }
    }
    const int cd = dofs.c_dof(v);
    if (kind[size_t(cd)] != 2) {
      if (is_seed(v)) {
        kind[size_t(cd)] = 1;
        value[size_t(cd)] = 1.0;
      } else if (bc.pin_alpha_boundary && !is_mouth(v)) {
        kind[size_t(cd)] = 1;
        value[size_t(cd)] = 0.0;
      }
    }
  }
  // Interior seed band.
  for (int v = 0; v < nv; ++v) {
    const int cd = dofs.c_dof(v);
    if (kind[size_t(cd)] == 0 && is_seed(v)) {
      kind[size_t(cd)] = 1;
      value[size_t(cd)] = 1.0;
    }
  }
  // Enriched dofs on the boundary are pinned (inclusions keep clear of it).
  for (size_t p = 0; p < dofs.pairs.size(); ++p) {
    if (!mesh.is_boundary_vertex(dofs.pairs[p].first)) continue;
    for (int comp = 0; comp < 2; ++comp) {
      const int d = dofs.b_dof(int(p), comp);
      kind[size_t(d)] = 1;
      value[size_t(d)] = 0.0;
    }
  }
  if (pin_c && !freeze_c) {
    for (const auto& [v, val] : *pin_c) {
      const int d = dofs.c_dof(v);
      kind[size_t(d)] = 1;
      value[size_t(d)] = val;
    }
  }
  if (freeze_c) {
    for (int v = 0; v < nv; ++v) {
      const int d = dofs.c_dof(v);
      kind[size_t(d)] = 1;
      value[size_t(d)] = (*freeze_c)[v];
    }
  }

  Constraints cons;
  cons.n_total = n;
  cons.red_of.assign(size_t(n), -1);
  int nr = 0;
  for (int d = 0; d < n; ++d)
    if (kind[size_t(d)] == 0) cons.red_of[size_t(d)] = nr++;
  cons.n_red = nr;

  // Resolve hanging chains onto free dofs + constants.
  struct Expansion {
    std::vector<std::pair<int, double>> terms;  // (reduced dof, weight)
    double c0 = 0.0;
  };
  std::vector<std::optional<Expansion>> memo(static_cast<size_t>(n));
  std::function<const Expansion&(int)> resolve = [&](int d) -> const Expansion& {
    auto& slot = memo[size_t(d)];
    if (slot) return *slot;
    Expansion ex;
    if (kind[size_t(d)] == 0) {
      ex.terms.emplace_back(cons.red_of[size_t(d)], 1.0);
    } else if (kind[size_t(d)] == 1) {
      ex.c0 = value[size_t(d)];
    } else {
      for (int m : masters[size_t(d)]) {
        const Expansion& me = resolve(m);
        for (const auto& t : me.terms) ex.terms.emplace_back(t.first, 0.5 * t.second);
        ex.c0 += 0.5 * me.c0;
      }
    }
    slot = std::move(ex);
    return *slot;
  };

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(size_t(n) + mesh.hanging().size() * 2);
  cons.g = Eigen::VectorXd::Zero(n);
  for (int d = 0; d < n; ++d) {
    const auto& ex = resolve(d);
    for (const auto& t : ex.terms) trip.emplace_back(d, t.first, t.second);
    cons.g[d] = ex.c0;
  }
  cons.P.resize(n, nr);
  cons.P.setFromTriplets(trip.begin(), trip.end());

  for (int v = 0; v < nv; ++v) {
    const int d = dofs.c_dof(v);
    if (cons.red_of[size_t(d)] >= 0)
      cons.c_free.emplace_back(cons.red_of[size_t(d)], v);
  }
  return cons;
}

// ---------------------------------------------------------------------------
// assembler
// ---------------------------------------------------------------------------

struct Assembler::LocalDofs {
  int verts[4];
  int npair = 0;
  int pair_idx[4];       // index into dofs.pairs
  int pair_vert[4];      // local vertex slot 0..3
  double pair_sign[4];
  int n = 0;             // total local dofs
  int gdof[20];          // local -> global
  // layout: a = 2*lv+comp (0..7), b = 8+2*p+comp, c = 8+2*npair+lv
  int b_slot(int p, int comp) const { return 8 + 2 * p + comp; }
  int c_slot(int lv) const { return 8 + 2 * npair + lv; }
};

Assembler::Assembler(const AdaptiveMesh& mesh, const MaterialSet& mat,
                     const Quadrature& quad, const DofMap& dofs)
    : mesh_(mesh), mat_(mat), quad_(quad), dofs_(dofs) {
  if (quad_.mesh_generation != mesh_.generation())
    throw std::logic_error("assembly: quadrature stale for this mesh");
}

void Assembler::gather(int row, LocalDofs& ld) const {
  const int c = mesh_.active_cells()[size_t(row)];
  const auto vs = mesh_.cell_vertices(c);
  const CellQuadrature& q = quad_.cells[size_t(row)];
  ld.npair = 0;
  for (int k = 0; k < 4; ++k) {
    ld.verts[k] = vs[size_t(k)];
    if (q.cut) {
      const int pi = dofs_.pair_index(vs[size_t(k)], q.incl);
      if (pi >= 0) {
        ld.pair_idx[ld.npair] = pi;
        ld.pair_vert[ld.npair] = k;
        ld.pair_sign[ld.npair] = double(dofs_.pair_sign[size_t(pi)]);
        ++ld.npair;
      }
    }
  }
  ld.n = 8 + 2 * ld.npair + 4;
  for (int k = 0; k < 4; ++k) {
    ld.gdof[2 * k] = dofs_.a_dof(vs[size_t(k)], 0);
    ld.gdof[2 * k + 1] = dofs_.a_dof(vs[size_t(k)], 1);
  }
  for (int p = 0; p < ld.npair; ++p) {
    ld.gdof[ld.b_slot(p, 0)] = dofs_.b_dof(ld.pair_idx[p], 0);
    ld.gdof[ld.b_slot(p, 1)] = dofs_.b_dof(ld.pair_idx[p], 1);
  }
  for (int k = 0; k < 4; ++k) ld.gdof[ld.c_slot(k)] = dofs_.c_dof(vs[size_t(k)]);
}

namespace {

// Degradation with the residual-stiffness blend g_eff = (1-d)g + d.
inline void eval_geff(double alpha, double a1, double floor, double& g0,
                      double& g1, double& g2) {
  const double om = 1.0 - floor;
  g0 = om * degradation(alpha, a1) + floor;
  g1 = om * degradation_d(alpha, a1);
  g2 = om * degradation_dd(alpha, a1);
}

}  // namespace

double Assembler::energy(const Eigen::VectorXd& x, EnergyBreakdown* parts) const {
  EnergyBreakdown eb;
  const double sc = mat_.G_c / kCw;
  LocalDofs ld;
  Shapes sh;
  for (size_t row = 0; row < quad_.cells.size(); ++row) {
    const CellQuadrature& q = quad_.cells[row];
    gather(int(row), ld);
    const Rect r = mesh_.cell_rect(mesh_.active_cells()[row]);
    const double invh = 1.0 / r.width();

    for (const auto& bp : q.bulk) {
      eval_shapes(r, invh, bp.p, sh);
      Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
      double alpha = 0.0;
      for (int k = 0; k < 4; ++k) {
        const double ax = x[ld.gdof[2 * k]], ay = x[ld.gdof[2 * k + 1]];
        G(0, 0) += ax * sh.dNx[k];
        G(0, 1) += ax * sh.dNy[k];
        G(1, 0) += ay * sh.dNx[k];
        G(1, 1) += ay * sh.dNy[k];
        alpha += x[ld.gdof[ld.c_slot(k)]] * sh.N[k];
      }
      double gax = 0.0, gay = 0.0;
      for (int k = 0; k < 4; ++k) {
        const double cv = x[ld.gdof[ld.c_slot(k)]];
        gax += cv * sh.dNx[k];
        gay += cv * sh.dNy[k];
      }
      for (int p = 0; p < ld.npair; ++p) {
        const double xi = double(bp.side) - ld.pair_sign[p];
        if (xi == 0.0) continue;
        const int k = ld.pair_vert[p];
        const double bx = x[ld.gdof[ld.b_slot(p, 0)]];
        const double by = x[ld.gdof[ld.b_slot(p, 1)]];
        G(0, 0) += bx * xi * sh.dNx[k];
        G(0, 1) += bx * xi * sh.dNy[k];
        G(1, 0) += by * xi * sh.dNx[k];
        G(1, 1) += by * xi * sh.dNy[k];
      }
      if (bp.side > 0) {
        double g0, g1, g2;
        eval_geff(alpha, mat_.a1, mat_.g_floor, g0, g1, g2);
        eb.bulk_matrix += bp.w * g0 * strain_energy(G, mat_.matrix);
      } else {
        eb.bulk_inclusion += bp.w * strain_energy(G, mat_.inclusion);
      }
      eb.surface += bp.w * sc *
                    (crack_density(alpha) / mat_.eps +
                     mat_.eps * (gax * gax + gay * gay));
    }
    for (const auto& fp : q.face) {
      eval_shapes(r, invh, fp.p, sh);
      Vec2 jump = Vec2::Zero();
      for (int p = 0; p < ld.npair; ++p) {
        const int k = ld.pair_vert[p];
        jump.x() += 2.0 * x[ld.gdof[ld.b_slot(p, 0)]] * sh.N[k];
        jump.y() += 2.0 * x[ld.gdof[ld.b_slot(p, 1)]] * sh.N[k];
      }
      eb.interface += fp.w * 0.5 * mat_.k_interface * jump.squaredNorm();
    }
  }
  if (parts) *parts = eb;
  return eb.total();
}

void Assembler::gradient(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
  out.setZero(dofs_.total());
  const double sc = mat_.G_c / kCw;
  LocalDofs ld;
  Shapes sh;
  for (size_t row = 0; row < quad_.cells.size(); ++row) {
    const CellQuadrature& q = quad_.cells[row];
    gather(int(row), ld);
    const Rect r = mesh_.cell_rect(mesh_.active_cells()[row]);
    const double invh = 1.0 / r.width();

    for (const auto& bp : q.bulk) {
      eval_shapes(r, invh, bp.p, sh);
      Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
      double alpha = 0.0, gax = 0.0, gay = 0.0;
      for (int k = 0; k < 4; ++k) {
        const double ax = x[ld.gdof[2 * k]], ay = x[ld.gdof[2 * k + 1]];
        const double cv = x[ld.gdof[ld.c_slot(k)]];
        G(0, 0) += ax * sh.dNx[k];
        G(0, 1) += ax * sh.dNy[k];
        G(1, 0) += ay * sh.dNx[k];
        G(1, 1) += ay * sh.dNy[k];
        alpha += cv * sh.N[k];
        gax += cv * sh.dNx[k];
        gay += cv * sh.dNy[k];
      }
      double xi_p[4];
      for (int p = 0; p < ld.npair; ++p) {
        xi_p[p] = double(bp.side) - ld.pair_sign[p];
        if (xi_p[p] == 0.0) continue;
        const int k = ld.pair_vert[p];
        const double bx = x[ld.gdof[ld.b_slot(p, 0)]];
        const double by = x[ld.gdof[ld.b_slot(p, 1)]];
        G(0, 0) += bx * xi_p[p] * sh.dNx[k];
        G(0, 1) += bx * xi_p[p] * sh.dNy[k];
        G(1, 0) += by * xi_p[p] * sh.dNx[k];
        G(1, 1) += by * xi_p[p] * sh.dNy[k];
      }
      const bool mtx = bp.side > 0;
      const Lame& lm = mtx ? mat_.matrix : mat_.inclusion;
      double g0 = 1.0, g1 = 0.0, g2 = 0.0;
      if (mtx) eval_geff(alpha, mat_.a1, mat_.g_floor, g0, g1, g2);
      const Eigen::Matrix2d sig = stress(G, lm);
      const double psi = strain_energy(G, lm);

      for (int k = 0; k < 4; ++k) {
        // displacement rows: g_eff * sigma . grad(phi)
        out[ld.gdof[2 * k]] +=
            bp.w * g0 * (sig(0, 0) * sh.dNx[k] + sig(0, 1) * sh.dNy[k]);
        out[ld.gdof[2 * k + 1]] +=
            bp.w * g0 * (sig(1, 0) * sh.dNx[k] + sig(1, 1) * sh.dNy[k]);
        // phase rows
        double gc = bp.w * sc * (crack_density_d(alpha) / mat_.eps * sh.N[k] +
                                 2.0 * mat_.eps *
                                     (gax * sh.dNx[k] + gay * sh.dNy[k]));
        if (mtx) gc += bp.w * g1 * psi * sh.N[k];
        out[ld.gdof[ld.c_slot(k)]] += gc;
      }
      for (int p = 0; p < ld.npair; ++p) {
        if (xi_p[p] == 0.0) continue;
        const int k = ld.pair_vert[p];
        const double dx = xi_p[p] * sh.dNx[k], dy = xi_p[p] * sh.dNy[k];
        out[ld.gdof[ld.b_slot(p, 0)]] +=
            bp.w * g0 * (sig(0, 0) * dx + sig(0, 1) * dy);
        out[ld.gdof[ld.b_slot(p, 1)]] +=
            bp.w * g0 * (sig(1, 0) * dx + sig(1, 1) * dy);
      }
    }
    for (const auto& fp : q.face) {
      eval_shapes(r, invh, fp.p, sh);
      Vec2 jump = Vec2::Zero();
      for (int p = 0; p < ld.npair; ++p) {
        const int k = ld.pair_vert[p];
        jump.x() += 2.0 * x[ld.gdof[ld.b_slot(p, 0)]] * sh.N[k];
        jump.y() += 2.0 * x[ld.gdof[ld.b_slot(p, 1)]] * sh.N[k];
      }
      const double f = fp.w * mat_.k_interface * 2.0;
      for (int p = 0; p < ld.npair; ++p) {
        const int k = ld.pair_vert[p];
        out[ld.gdof[ld.b_slot(p, 0)]] += f * jump.x() * sh.N[k];
        out[ld.gdof[ld.b_slot(p, 1)]] += f * jump.y() * sh.N[k];
      }
    }
  }
}

void Assembler::hessian(const Eigen::VectorXd& x,
                        std::vector<Eigen::Triplet<double>>& out) const {
  out.clear();
  const double sc = mat_.G_c / kCw;
  LocalDofs ld;
  Shapes sh;
  Eigen::Matrix<double, 20, 20> K;
  for (size_t row = 0; row < quad_.cells.size(); ++row) {
    const CellQuadrature& q = quad_.cells[row];
    gather(int(row), ld);
    const Rect r = mesh_.cell_rect(mesh_.active_cells()[row]);
    const double invh = 1.0 / r.width();
    const int n = ld.n;
    K.setZero();

    for (const auto& bp : q.bulk) {
      eval_shapes(r, invh, bp.p, sh);
      Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
      double alpha = 0.0;
      for (int k = 0; k < 4; ++k) {
        const double ax = x[ld.gdof[2 * k]], ay = x[ld.gdof[2 * k + 1]];
        G(0, 0) += ax * sh.dNx[k];
        G(0, 1) += ax * sh.dNy[k];
        G(1, 0) += ay * sh.dNx[k];
        G(1, 1) += ay * sh.dNy[k];
        alpha += x[ld.gdof[ld.c_slot(k)]] * sh.N[k];
      }
      // Effective gradients per displacement-carrying local dof:
      // standard vertices then enriched pairs.
      int nu = 4 + ld.npair;
      double ddx[8], ddy[8];
      int slot0[8];  // local slot of component 0
      for (int k = 0; k < 4; ++k) {
        ddx[k] = sh.dNx[k];
        ddy[k] = sh.dNy[k];
        slot0[k] = 2 * k;
      }
      for (int p = 0; p < ld.npair; ++p) {
        const double xi = double(bp.side) - ld.pair_sign[p];
        const int k = ld.pair_vert[p];
        ddx[4 + p] = xi * sh.dNx[k];
        ddy[4 + p] = xi * sh.dNy[k];
        slot0[4 + p] = ld.b_slot(p, 0);
        if (xi != 0.0) {
          const double bx = x[ld.gdof[ld.b_slot(p, 0)]];
          const double by = x[ld.gdof[ld.b_slot(p, 1)]];
          G(0, 0) += bx * xi * sh.dNx[k];
          G(0, 1) += bx * xi * sh.dNy[k];
          G(1, 0) += by * xi * sh.dNx[k];
          G(1, 1) += by * xi * sh.dNy[k];
        }
      }
      const bool mtx = bp.side > 0;
      const Lame& lm = mtx ? mat_.matrix : mat_.inclusion;
      double g0 = 1.0, g1 = 0.0, g2 = 0.0;
      if (mtx) eval_geff(alpha, mat_.a1, mat_.g_floor, g0, g1, g2);
      const Eigen::Matrix2d sig = stress(G, lm);
      const double psi = strain_energy(G, lm);

      // u-u block.
      for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nu; ++j) {
          const double dot = ddx[i] * ddx[j] + ddy[i] * ddy[j];
          for (int ci = 0; ci < 2; ++ci) {
            for (int cj = 0; cj < 2; ++cj) {
              const double di = (ci == 0 ? ddx[i] : ddy[i]);
              const double dj = (cj == 0 ? ddx[j] : ddy[j]);
              double v = lm.lambda * di * dj;
              if (ci == cj) v += lm.mu * dot;
              v += lm.mu * (cj == 0 ? ddx[i] : ddy[i]) * (ci == 0 ? ddx[j] : ddy[j]);
              K(slot0[i] + ci, slot0[j] + cj) += bp.w * g0 * v;
            }
          }
        }
      }
      // u-c and c-c blocks.
      if (mtx) {
        for (int i = 0; i < nu; ++i) {
          for (int ci = 0; ci < 2; ++ci) {
            const double su = sig(ci, 0) * ddx[i] + sig(ci, 1) * ddy[i];
            for (int k = 0; k < 4; ++k) {
              const double v = bp.w * g1 * su * sh.N[k];
              K(slot0[i] + ci, ld.c_slot(k)) += v;
              K(ld.c_slot(k), slot0[i] + ci) += v;
            }
          }
        }
      }
      for (int k = 0; k < 4; ++k) {
        for (int m = 0; m < 4; ++m) {
          double v = sc * (crack_density_dd() / mat_.eps * sh.N[k] * sh.N[m] +
                           2.0 * mat_.eps * (sh.dNx[k] * sh.dNx[m] +
                                             sh.dNy[k] * sh.dNy[m]));
          if (mtx) v += g2 * psi * sh.N[k] * sh.N[m];
          K(ld.c_slot(k), ld.c_slot(m)) += bp.w * v;
        }
      }
    }
    for (const auto& fp : q.face) {
      eval_shapes(r, invh, fp.p, sh);
      const double f = fp.w * mat_.k_interface * 4.0;
      for (int p = 0; p < ld.npair; ++p) {
        for (int s = 0; s < ld.npair; ++s) {
          const double v = f * sh.N[ld.pair_vert[p]] * sh.N[ld.pair_vert[s]];
          K(ld.b_slot(p, 0), ld.b_slot(s, 0)) += v;
          K(ld.b_slot(p, 1), ld.b_slot(s, 1)) += v;
        }
      }
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (K(i, j) != 0.0) out.emplace_back(ld.gdof[i], ld.gdof[j], K(i, j));
  }
}

double Assembler::crack_surface(const Eigen::VectorXd& x) const {
  double acc = 0.0;
  LocalDofs ld;
  Shapes sh;
  for (size_t row = 0; row < quad_.cells.size(); ++row) {
    const CellQuadrature& q = quad_.cells[row];
    gather(int(row), ld);
    const Rect r = mesh_.cell_rect(mesh_.active_cells()[row]);
    const double invh = 1.0 / r.width();
    for (const auto& bp : q.bulk) {
      eval_shapes(r, invh, bp.p, sh);
      double alpha = 0.0, gax = 0.0, gay = 0.0;
      for (int k = 0; k < 4; ++k) {
        const double cv = x[ld.gdof[ld.c_slot(k)]];
        alpha += cv * sh.N[k];
        gax += cv * sh.dNx[k];
        gay += cv * sh.dNy[k];
      }
      acc += bp.w * (crack_density(alpha) / mat_.eps +
                     mat_.eps * (gax * gax + gay * gay));
    }
  }
  return acc / kCw;
}

}  // namespace toughopt
