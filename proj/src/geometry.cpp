#include "toughopt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "toughopt/model.hpp"

namespace toughopt {

namespace {

inline double cross2(const Vec2& a, const Vec2& b) {
  return a.x() * b.y() - a.y() * b.x();
}

const Vec2& support_point(const std::vector<Vec2>& P, const Vec2& d) {
  int best = 0;
  double bv = P[0].dot(d);
  for (size_t i = 1; i < P.size(); ++i) {
    const double v = P[i].dot(d);
    if (v > bv) {
      bv = v;
      best = int(i);
    }
  }
  return P[size_t(best)];
}

inline Vec2 mink_support(const std::vector<Vec2>& A, const std::vector<Vec2>& B,
                         const Vec2& d) {
  return support_point(A, d) - support_point(B, -d);
}

Vec2 seg_closest_to_origin(const Vec2& a, const Vec2& b, double* t_out = nullptr) {
  const Vec2 ab = b - a;
  const double den = ab.squaredNorm();
  double t = 0.0;
  if (den > 0.0) t = std::clamp(-a.dot(ab) / den, 0.0, 1.0);
  if (t_out) *t_out = t;
  return a + t * ab;
}

// Closest point to the origin on the current simplex; prunes the simplex to
// the supporting face. Sets `enclosed` when the origin lies inside a
// non-degenerate triangle.
Vec2 reduce_simplex(std::array<Vec2, 3>& S, int& n, bool& enclosed) {
  enclosed = false;
  if (n == 1) return S[0];
  if (n == 2) {
    double t;
    const Vec2 p = seg_closest_to_origin(S[0], S[1], &t);
    if (t <= 0.0) {
      n = 1;
    } else if (t >= 1.0) {
      S[0] = S[1];
      n = 1;
    }
    return p;
  }
  const Vec2 a = S[0], b = S[1], c = S[2];
  const double area2 = cross2(b - a, c - a);
  if (std::abs(area2) > 1e-300) {
    const double s = area2 > 0.0 ? 1.0 : -1.0;
    // Barycentric signs of the origin w.r.t. the triangle.
    if (cross2(b, c) * s >= 0.0 && cross2(c, a) * s >= 0.0 &&
        cross2(a, b) * s >= 0.0) {
      enclosed = true;
      return Vec2::Zero();
    }
  }
  const Vec2 edges[3][2] = {{a, b}, {b, c}, {c, a}};
  double best = std::numeric_limits<double>::infinity();
  Vec2 bp = a, e0 = a, e1 = b;
  for (const auto& e : edges) {
    const Vec2 p = seg_closest_to_origin(e[0], e[1]);
    const double d2 = p.squaredNorm();
    if (d2 < best) {
      best = d2;
      bp = p;
      e0 = e[0];
      e1 = e[1];
    }
  }
  S[0] = e0;
  S[1] = e1;
  n = 2;
  return bp;
}

}  // namespace

// ---------------------------------------------------------------------------
// design vector and bounds
// ---------------------------------------------------------------------------

DesignBounds DesignBounds::reference() {
  DesignBounds b;
  b.lo = {0.0, 0.0, 2.5, 2.5, 0.0, 2.5, 2.5, -0.5 * kPi, 6.0};
  b.hi = {0.5, 0.5, 5.0, 5.0, 0.5 * kPi, 5.0, 5.0, 0.5 * kPi, 15.0};
  return b;
}

bool DesignBounds::contains(const DesignVector& x, double tol) const {
  for (int i = 0; i < DesignVector::kDim; ++i)
    if (x[i] < lo[size_t(i)] - tol || x[i] > hi[size_t(i)] + tol) return false;
  return true;
}

// ---------------------------------------------------------------------------
// ellipse
// ---------------------------------------------------------------------------

double Ellipse::level_set(const Vec2& p) const {
  const Vec2 d = p - center;
  const double c = std::cos(angle), s = std::sin(angle);
  const double xi = c * d.x() + s * d.y();
  const double eta = -s * d.x() + c * d.y();
  const double q = (xi / ra) * (xi / ra) + (eta / rb) * (eta / rb);
  if (q < 1e-14) return -std::min(ra, rb);
  // First-order normalization of sqrt(q) - 1; exact distance for circles.
  const double gn = std::sqrt((xi * xi) / (ra * ra * ra * ra) +
                              (eta * eta) / (rb * rb * rb * rb));
  return (q - std::sqrt(q)) / gn;
}

std::vector<Vec2> Ellipse::polygon(int n) const {
  std::vector<Vec2> pts;
  pts.reserve(size_t(n));
  const double c = std::cos(angle), s = std::sin(angle);
  for (int k = 0; k < n; ++k) {
    const double t = 2.0 * kPi * double(k) / double(n);
    const double lx = ra * std::cos(t), ly = rb * std::sin(t);
    pts.emplace_back(center.x() + c * lx - s * ly, center.y() + s * lx + c * ly);
  }
  return pts;
}

Vec2 Ellipse::bbox_halfwidth() const {
  const double c = std::cos(angle), s = std::sin(angle);
  const double wx = std::sqrt(ra * ra * c * c + rb * rb * s * s);
  const double wy = std::sqrt(ra * ra * s * s + rb * rb * c * c);
  return Vec2(wx, wy);
}

// ---------------------------------------------------------------------------
// layout
// ---------------------------------------------------------------------------

double InclusionLayout::level_set(const Vec2& p, int* which) const {
  double best = std::numeric_limits<double>::infinity();
  int arg = -1;
  for (size_t i = 0; i < ellipses.size(); ++i) {
    const Ellipse& e = ellipses[i];
    // Cheap reject: level set of the bounding circle is a lower bound.
    const double lb = (p - e.center).norm() - e.bound_radius();
    if (lb >= best) continue;
    const double v = e.level_set(p);
    if (v < best) {
      best = v;
      arg = int(i);
    }
  }
  if (which) *which = arg;
  return best;
}

InclusionLayout build_layout(const DesignVector& x, double w,
                             const LayoutOptions& opts) {
  InclusionLayout out;
  out.cell_width = DesignVector::kCellWidth;
  out.cell_height = x.cell_height();
  out.crack_offset = w;

  const double W = out.cell_width;
  const double H = out.cell_height;
  const Rect& dom = opts.domain;
  const double clear = opts.boundary_clear;

  struct Proto {
    Vec2 base;
    double ra, rb, angle;
    int set;
  };
  const Proto protos[2] = {
      {Vec2(0.0, w * H), x.r1_major(), x.r1_minor(), x.angle1(), 0},
      {Vec2(x.offset_x() * W, (x.offset_y() + w) * H), x.r2_major(),
       x.r2_minor(), x.angle2(), 1}};

  for (const Proto& pr : protos) {
    Ellipse proto;
    proto.ra = pr.ra;
    proto.rb = pr.rb;
    proto.angle = pr.angle;
    proto.set = pr.set;
    const Vec2 hw = proto.bbox_halfwidth();
    const int i0 = int(std::floor((dom.x0 - pr.base.x() - hw.x()) / W)) - 1;
    const int i1 = int(std::ceil((dom.x1 - pr.base.x() + hw.x()) / W)) + 1;
    const int j0 = int(std::floor((dom.y0 - pr.base.y() - hw.y()) / H)) - 1;
    const int j1 = int(std::ceil((dom.y1 - pr.base.y() + hw.y()) / H)) + 1;
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        Ellipse e = proto;
        e.center = Vec2(pr.base.x() + double(i) * W, pr.base.y() + double(j) * H);
        if (e.center.x() - hw.x() < dom.x0 + clear) continue;
        if (e.center.x() + hw.x() > dom.x1 - clear) continue;
        if (e.center.y() - hw.y() < dom.y0 + clear) continue;
        if (e.center.y() + hw.y() > dom.y1 - clear) continue;
        out.ellipses.push_back(e);
      }
    }
  }
  // Deterministic order independent of loop ranges.
  std::sort(out.ellipses.begin(), out.ellipses.end(),
            [](const Ellipse& a, const Ellipse& b) {
              if (a.set != b.set) return a.set < b.set;
              if (a.center.y() != b.center.y()) return a.center.y() < b.center.y();
              return a.center.x() < b.center.x();
            });
  return out;
}

// ---------------------------------------------------------------------------
// convex distance / penetration
// ---------------------------------------------------------------------------

double convex_distance(const std::vector<Vec2>& A, const std::vector<Vec2>& B) {
  std::array<Vec2, 3> S;
  int n = 1;
  Vec2 d0 = B[0] - A[0];
  if (d0.squaredNorm() < 1e-300) d0 = Vec2(1.0, 0.0);
  S[0] = mink_support(A, B, d0);
  Vec2 v = S[0];
  for (int iter = 0; iter < 200; ++iter) {
    const double vn2 = v.squaredNorm();
    if (vn2 < 1e-24) return 0.0;
    const Vec2 w = mink_support(A, B, -v);
    if (vn2 - v.dot(w) <= 1e-12 * vn2) return std::sqrt(vn2);
    if (n == 3) n = 2;  // should not happen: enclosed case returns above
    S[size_t(n++)] = w;
    bool enclosed = false;
    v = reduce_simplex(S, n, enclosed);
    if (enclosed) return 0.0;
  }
  return v.norm();
}

double convex_penetration(const std::vector<Vec2>& A, const std::vector<Vec2>& B) {
  double best = std::numeric_limits<double>::infinity();
  const std::vector<Vec2>* polys[2] = {&A, &B};
  for (const auto* poly : polys) {
    const std::vector<Vec2>& P = *poly;
    const size_t np = P.size();
    for (size_t i = 0; i < np; ++i) {
      const Vec2 e = P[(i + 1) % np] - P[i];
      Vec2 nrm(-e.y(), e.x());
      const double len = nrm.norm();
      if (len < 1e-300) continue;
      nrm /= len;
      double aLo = std::numeric_limits<double>::infinity(), aHi = -aLo;
      for (const Vec2& p : A) {
        const double t = p.dot(nrm);
        aLo = std::min(aLo, t);
        aHi = std::max(aHi, t);
      }
      double bLo = std::numeric_limits<double>::infinity(), bHi = -bLo;
      for (const Vec2& p : B) {
        const double t = p.dot(nrm);
        bLo = std::min(bLo, t);
        bHi = std::max(bHi, t);
      }
      const double overlap = std::min(aHi, bHi) - std::max(aLo, bLo);
      if (overlap <= 0.0) return 0.0;  // separating axis: not overlapping
      best = std::min(best, overlap);
    }
  }
  return best;
}

double brute_segment_distance(const std::vector<Vec2>& A, const std::vector<Vec2>& B) {
  auto seg_seg = [](const Vec2& p0, const Vec2& p1, const Vec2& q0, const Vec2& q1) {
    const Vec2 u = p1 - p0, v = q1 - q0, w0 = p0 - q0;
    const double a = u.squaredNorm(), b = u.dot(v), c = v.squaredNorm();
    const double d = u.dot(w0), e = v.dot(w0);
    const double den = a * c - b * b;
    double s = 0.0, t = 0.0;
    if (den > 1e-14 * a * c + 1e-300) {
      s = std::clamp((b * e - c * d) / den, 0.0, 1.0);
    }
    t = (c > 0.0) ? std::clamp((b * s + e) / c, 0.0, 1.0) : 0.0;
    // Re-project s for the clamped t.
    s = (a > 0.0) ? std::clamp((b * t - d) / a, 0.0, 1.0) : 0.0;
    return ((p0 + s * u) - (q0 + t * v)).norm();
  };
  double best = std::numeric_limits<double>::infinity();
  const size_t na = A.size(), nb = B.size();
  for (size_t i = 0; i < na; ++i) {
    const Vec2 &p0 = A[i], &p1 = A[(i + 1) % na];
    for (size_t j = 0; j < nb; ++j) {
      best = std::min(best, seg_seg(p0, p1, B[j], B[(j + 1) % nb]));
      if (best == 0.0) return 0.0;
    }
  }
  return best;
}

double pair_clearance(const Ellipse& a, const Ellipse& b, int hull_points) {
  const auto pa = a.polygon(hull_points);
  const auto pb = b.polygon(hull_points);
  const double d = convex_distance(pa, pb);
  if (d > 0.0) return d;
  return -convex_penetration(pa, pb);
}

namespace {

struct PairCand {
  double lower;  // center distance minus bounding radii
  const Ellipse* a;
  const Ellipse* b;
};

double min_clearance_over(std::vector<PairCand>& cands, int hull_points) {
  std::sort(cands.begin(), cands.end(),
            [](const PairCand& l, const PairCand& r) { return l.lower < r.lower; });
  double best = std::numeric_limits<double>::infinity();
  for (const PairCand& pc : cands) {
    if (pc.lower >= best) break;
    best = std::min(best, pair_clearance(*pc.a, *pc.b, hull_points));
  }
  return best;
}

}  // namespace

double clearance(const InclusionLayout& layout, int hull_points) {
  const size_t n = layout.ellipses.size();
  if (n < 2) return std::numeric_limits<double>::infinity();
  std::vector<PairCand> cands;
  cands.reserve(n * (n - 1) / 2);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const Ellipse &a = layout.ellipses[i], &b = layout.ellipses[j];
      cands.push_back({(a.center - b.center).norm() - a.bound_radius() -
                           b.bound_radius(),
                       &a, &b});
    }
  }
  return min_clearance_over(cands, hull_points);
}

double design_clearance(const DesignVector& x, int hull_points) {
  const double W = DesignVector::kCellWidth;
  const double H = x.cell_height();
  Ellipse e1, e2;
  e1.center = Vec2(0.0, 0.0);
  e1.ra = x.r1_major();
  e1.rb = x.r1_minor();
  e1.angle = x.angle1();
  e1.set = 0;
  e2.center = Vec2(x.offset_x() * W, x.offset_y() * H);
  e2.ra = x.r2_major();
  e2.rb = x.r2_minor();
  e2.angle = x.angle2();
  e2.set = 1;

  // Lattice offsets within a window wide enough for the admissible
  // radius/period ranges; clearance along a lattice ray is non-decreasing
  // beyond the window.
  std::vector<Ellipse> shifted;
  shifted.reserve(64);  // pointers into this survive: no reallocation
  std::vector<PairCand> cands;
  auto add_pair = [&](const Ellipse& a, const Ellipse& base, int i, int j) {
    Ellipse b = base;
    b.center += Vec2(double(i) * W, double(j) * H);
    shifted.push_back(b);
    const Ellipse& bs = shifted.back();
    cands.push_back({(a.center - bs.center).norm() - a.bound_radius() -
                         bs.bound_radius(),
                     &a, &bs});
  };
  for (int j = -2; j <= 2; ++j) {
    for (int i = -2; i <= 2; ++i) {
      // Same-set pairs: half window by central symmetry.
      if (j > 0 || (j == 0 && i > 0)) {
        add_pair(e1, e1, i, j);
        add_pair(e2, e2, i, j);
      }
      add_pair(e1, e2, i, j);
    }
  }
  return min_clearance_over(cands, hull_points);
}

bool is_feasible(const DesignVector& x, double min_gap) {
  return design_clearance(x) >= min_gap;
}

// ---------------------------------------------------------------------------
// export
// ---------------------------------------------------------------------------

std::string format_layout(const InclusionLayout& layout) {
  std::string out;
  out += "# cx cy ra rb angle set\n";
  char buf[192];
  for (const Ellipse& e : layout.ellipses) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %d\n",
                  e.center.x(), e.center.y(), e.ra, e.rb, e.angle, e.set);
    out += buf;
  }
  return out;
}

bool write_layout(const InclusionLayout& layout, const std::string& path) {
  std::ofstream f(path);
  if (!f) return false;
  f << format_layout(layout);
  return bool(f);
}

}  // namespace toughopt
