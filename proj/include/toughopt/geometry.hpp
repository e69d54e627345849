#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <string>
#include <vector>

namespace toughopt {

using Vec2 = Eigen::Vector2d;

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool contains(const Vec2& p) const {
    return p.x() >= x0 && p.x() <= x1 && p.y() >= y0 && p.y() <= y1;
  }
};

// Nine-parameter microstructure design:
//   [0] x1  horizontal offset of set 2, fraction of cell width
//   [1] x2  vertical offset of set 2, fraction of cell height
//   [2..4] semi-axes and tilt of set-1 ellipses
//   [5..7] semi-axes and tilt of set-2 ellipses
//   [8] x9  unit-cell height
// Cell width is fixed.
struct DesignVector {
  static constexpr int kDim = 9;
  static constexpr double kCellWidth = 15.0;

  std::array<double, kDim> v{};

  double operator[](int i) const { return v[size_t(i)]; }
  double& operator[](int i) { return v[size_t(i)]; }

  double offset_x() const { return v[0]; }
  double offset_y() const { return v[1]; }
  double r1_major() const { return v[2]; }
  double r1_minor() const { return v[3]; }
  double angle1() const { return v[4]; }
  double r2_major() const { return v[5]; }
  double r2_minor() const { return v[6]; }
  double angle2() const { return v[7]; }
  double cell_height() const { return v[8]; }
};

struct DesignBounds {
  std::array<double, DesignVector::kDim> lo{};
  std::array<double, DesignVector::kDim> hi{};

  static DesignBounds reference();
  bool contains(const DesignVector& x, double tol = 0.0) const;
};

struct Ellipse {
  Vec2 center{0.0, 0.0};
  double ra = 1.0;     // semi-axis along the rotated x direction
  double rb = 1.0;     // semi-axis along the rotated y direction
  double angle = 0.0;  // tilt, radians
  int set = 0;         // which lattice the ellipse belongs to

  // Approximate signed distance: negative inside, zero on the boundary.
  // Exact for circles; for ellipses the algebraic form normalized by its
  // gradient, which keeps the zero set exact and the sign correct everywhere.
  double level_set(const Vec2& p) const;

  bool contains(const Vec2& p) const { return level_set(p) < 0.0; }

  // Counter-clockwise polygonal hull approximation (inscribed n-gon).
  std::vector<Vec2> polygon(int n = 256) const;

  // Half-width of the axis-aligned bounding box, per axis.
  Vec2 bbox_halfwidth() const;
  // Radius of the tightest bounding circle (= max semi-axis).
  double bound_radius() const { return std::max(ra, rb); }
};

// Concrete set of inclusions placed in a domain (one crack-offset instance
// of the doubly periodic design).
struct InclusionLayout {
  std::vector<Ellipse> ellipses;
  double cell_width = DesignVector::kCellWidth;
  double cell_height = 0.0;
  double crack_offset = 0.0;  // w, fraction of cell height

  bool empty() const { return ellipses.empty(); }

  // Signed distance to the nearest inclusion boundary (+inf when empty);
  // negative inside some inclusion. Optionally reports which one.
  double level_set(const Vec2& p, int* which = nullptr) const;
};

struct LayoutOptions {
  Rect domain;
  // Ellipses whose hull comes closer than this to the domain boundary are
  // removed so boundary conditions and the J contour see pure matrix.
  double boundary_clear = 2.0;
  int hull_points = 256;
};

// Instantiate the doubly periodic two-lattice layout for crack offset w
// (the whole pattern is shifted vertically by +w * cell_height so the crack
// plane y = 0 samples a different slice of the unit cell; at w = 0 a set-1
// row sits on the crack plane).
InclusionLayout build_layout(const DesignVector& x, double w,
                             const LayoutOptions& opts);

// Minimum gap between any two distinct inclusion hulls in the layout:
// positive = separation, negative = penetration depth.
double clearance(const InclusionLayout& layout, int hull_points = 256);

// Gap between two ellipse hulls (GJK distance / SAT penetration).
double pair_clearance(const Ellipse& a, const Ellipse& b, int hull_points = 256);

// Reference-tile clearance of the periodic design itself, independent of
// domain and crack offset: minimum over all distinct pairs of the infinite
// tiling (evaluated over a bounded lattice window, which suffices for the
// admissible parameter ranges).
double design_clearance(const DesignVector& x, int hull_points = 256);

// A design is manufacturable when every hull pair keeps at least min_gap
// of matrix between them (and the radii/height box constraints hold).
bool is_feasible(const DesignVector& x, double min_gap = 1.0);

// One "cx cy ra rb angle set" line per ellipse.
std::string format_layout(const InclusionLayout& layout);
bool write_layout(const InclusionLayout& layout, const std::string& path);

// --- low-level helpers, exposed for tests ---

// Distance between two convex polygons (CCW); 0 when touching/overlapping.
double convex_distance(const std::vector<Vec2>& A, const std::vector<Vec2>& B);
// Penetration depth (>0) of two overlapping convex polygons: the smallest
// translation along any face normal that separates them.
double convex_penetration(const std::vector<Vec2>& A, const std::vector<Vec2>& B);
// Brute-force min distance over all segment pairs (test oracle).
double brute_segment_distance(const std::vector<Vec2>& A, const std::vector<Vec2>& B);

}  // namespace toughopt
