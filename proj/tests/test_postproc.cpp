#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "toughopt/assembly.hpp"
#include "toughopt/mesh.hpp"
#include "toughopt/model.hpp"
#include "toughopt/postproc.hpp"

using namespace toughopt;

namespace {

struct Field {
  AdaptiveMesh mesh;
  InclusionLayout layout;
  Quadrature quad;
  DofMap dofs;
  MaterialSet mat;
  Eigen::VectorXd x;

  Field(const Rect& dom, double h, InclusionLayout lay = {})
      : mesh([&] {
          MeshConfig mc;
          mc.domain = dom;
          mc.root_cell = h;
          mc.max_level = 0;
          return mc;
        }()),
        layout(std::move(lay)), quad(build_quadrature(mesh, layout)),
        dofs(build_dofs(mesh, quad, layout)),
        mat(make_materials(MaterialParams{}, 0.5)),
        x(Eigen::VectorXd::Zero(dofs.total())) {}
};

// Interpolated crack-tip field with the band behind the tip fully damaged,
// so the smeared faces are traction free the way a real crack would be.
Field k_field(double h, const Vec2& center, bool kill_wake) {
  Field f(Rect{0.0, -4.0, 20.0, 4.0}, h);
  for (int v = 0; v < f.mesh.n_vertices(); ++v) {
    const Vec2 p = f.mesh.vertex_pos(v);
    const Vec2 u = surfing_displacement(p, center, 1.1, 1.0, 0.3);
    f.x[f.dofs.a_dof(v, 0)] = u.x();
    f.x[f.dofs.a_dof(v, 1)] = u.y();
    if (kill_wake && p.x() <= center.x() + 1e-9 && p.y() <= 1e-9 &&
        p.y() >= -h - 1e-9)
      f.x[f.dofs.c_dof(v)] = 1.0;
  }
  return f;
}

double jb(const Field& f) {
  return j_integral_boundary(f.mesh, f.quad, f.dofs, f.mat, f.x);
}

double jr(const Field& f, const Rect& c, int seg = 64) {
  return j_integral_rect(f.mesh, f.quad, f.dofs, f.mat, f.layout, f.x, c, seg);
}

TraceRow row(double tip_x, double J) {
  TraceRow r;
  r.tip_x = tip_x;
  r.J = J;
  return r;
}

}  // namespace

TEST_CASE("probe reproduces nodal fields and the enriched jump") {
  // Vertical interface chord at x = 1 - 0.00125 inside the left cell.
  InclusionLayout lay;
  Ellipse e;
  e.center = Vec2(-99.0, 0.5);
  e.ra = e.rb = 100.0;
  lay.ellipses.push_back(e);
  Field f(Rect{0.0, 0.0, 2.0, 1.0}, 1.0, lay);
  REQUIRE(f.dofs.nB > 0);

  // Linear displacement, linear damage, uniform jump amplitude.
  const Eigen::Matrix2d G = (Eigen::Matrix2d() << 0.3, 0.1, -0.2, 0.4).finished();
  for (int v = 0; v < f.mesh.n_vertices(); ++v) {
    const Vec2 p = f.mesh.vertex_pos(v);
    const Vec2 u = G * p;
    f.x[f.dofs.a_dof(v, 0)] = u.x();
    f.x[f.dofs.a_dof(v, 1)] = u.y();
    f.x[f.dofs.c_dof(v)] = 0.1 + 0.05 * p.y();
  }
  for (size_t pr = 0; pr < f.dofs.pairs.size(); ++pr)
    f.x[f.dofs.b_dof(int(pr), 0)] = 0.25;

  FieldProbe probe(f.mesh, f.quad, f.dofs, f.layout, f.x);

  // The shifted enrichment vanishes at every node: the probe there returns
  // exactly the nodal displacement.
  for (int v = 0; v < f.mesh.n_vertices(); ++v) {
    const Vec2 p = f.mesh.vertex_pos(v);
    const FieldSample s = probe(p);
    const Vec2 want = G * p;
    CHECK(s.u.x() == doctest::Approx(want.x()).epsilon(1e-10));
    CHECK(s.u.y() == doctest::Approx(want.y()).epsilon(1e-10));
    CHECK(s.alpha == doctest::Approx(0.1 + 0.05 * p.y()).epsilon(1e-10));
  }

  // Damage gradient of the linear nodal field.
  const FieldSample mid = probe(Vec2(1.5, 0.5));
  CHECK(mid.grad_alpha.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(mid.grad_alpha.y() == doctest::Approx(0.05).epsilon(1e-12));
  // Right cell is uncut: grad_u is the imposed matrix, row i = grad of u_i.
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(mid.grad_u(i, j) == doctest::Approx(G(i, j)).epsilon(1e-10));

  // Jump across the true level set (the enrichment sign follows the curve,
  // not the quadrature chord): 2 sum b phi = 0.5 in x.
  const double xc = -99.0 + std::sqrt(100.0 * 100.0 - 0.2 * 0.2);
  const FieldSample left = probe(Vec2(xc - 1e-5, 0.3));
  const FieldSample right = probe(Vec2(xc + 1e-5, 0.3));
  CHECK(left.side == -1);   // inclusion
  CHECK(right.side == 1);   // matrix
  CHECK(right.u.x() - left.u.x() == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(right.u.y() - left.u.y() == doctest::Approx(0.0).epsilon(1e-3));
}

TEST_CASE("boundary J recovers the analytic crack-tip value") {
  // Plane strain: J = K^2 (1 - nu^2) / E.
  const double exact = 1.1 * 1.1 * (1.0 - 0.09);

  // No crack tip inside the domain: the closed integral nearly cancels.
  CHECK(std::abs(jb(k_field(0.25, Vec2(-1.0, 0.0), false))) < 0.02);

  // Tip inside, wake band damaged: converges to the exact release rate.
  double prev = 1e9;
  for (const double h : {0.25, 0.125}) {
    const Field f = k_field(h, Vec2(5.0, 0.0), true);
    const double err = std::abs(jb(f) - exact);
    CHECK(err < 0.7 * prev);  // first-order decay with the band width
    prev = err;
  }
  CHECK(prev < 0.003);
}

TEST_CASE("interior contours are path independent") {
  const double exact = 1.1 * 1.1 * (1.0 - 0.09);
  const Field f = k_field(0.125, Vec2(5.0, 0.0), true);
  const double j0 = jb(f);
  const double j1 = jr(f, Rect{2.0, -3.0, 12.0, 3.0});
  const double j2 = jr(f, Rect{3.5, -2.0, 8.0, 2.0});
  CHECK(std::abs(j1 - exact) < 0.01);
  CHECK(std::abs(j1 - j0) < 0.02 * exact);
  CHECK(std::abs(j2 - j0) < 0.02 * exact);

  // Pure elastic state (no damage anywhere): J scales with the square of
  // the loading amplitude.
  Field g = k_field(0.25, Vec2(5.0, 0.0), false);
  const double j_base = jr(g, Rect{2.0, -3.0, 12.0, 3.0});
  g.x.head(2 * g.dofs.nv) *= 2.0;
  const double j_scaled = jr(g, Rect{2.0, -3.0, 12.0, 3.0});
  CHECK(j_scaled == doctest::Approx(4.0 * j_base).epsilon(1e-12));

  // Zero state carries no flux.
  Field z(Rect{0.0, -4.0, 20.0, 4.0}, 0.5);
  CHECK(jb(z) == 0.0);
  CHECK(jr(z, Rect{2.0, -3.0, 12.0, 3.0}) == 0.0);
}

TEST_CASE("toughness filter is a truncated moving average") {
  // Constant trace: preserved exactly, window bounds echoed back.
  std::vector<TraceRow> trace;
  for (int i = 0; i <= 20; ++i) trace.push_back(row(0.5 * i, 1.5));
  ToughnessReport rep = effective_toughness(trace, 2.0, 8.0, 3);
  CHECK(rep.g_eff == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(rep.x_lo == 2.0);
  CHECK(rep.x_hi == 8.0);
  CHECK(rep.half_width == 3);

  // A lone spike is averaged over the full 2 hw + 1 window.
  std::vector<TraceRow> spiky;
  for (int i = 0; i < 15; ++i) spiky.push_back(row(double(i), i == 7 ? 10.0 : 1.0));
  CHECK(effective_toughness(spiky, 0.0, 14.0, 3).g_eff ==
        doctest::Approx(16.0 / 7.0).epsilon(1e-12));

  // Samples outside the window are invisible.
  CHECK(effective_toughness(spiky, 11.0, 14.0, 3).g_eff ==
        doctest::Approx(1.0).epsilon(1e-15));

  // Pointwise dominance survives the filter.
  std::vector<TraceRow> hi = spiky;
  for (auto& r : hi) r.J += 0.25;
  CHECK(effective_toughness(hi, 0.0, 14.0, 3).g_eff >
        effective_toughness(spiky, 0.0, 14.0, 3).g_eff);

  // Empty window is a hard error.
  CHECK_THROWS(effective_toughness(spiky, 100.0, 200.0, 3));
}

TEST_CASE("worst case takes the minimum of four finite scenarios") {
  CHECK(worst_case_objective({1.2, 0.9, 1.5, 1.1}) == 0.9);
  CHECK(worst_case_objective({2.0, 2.0, 2.0, 2.0}) == 2.0);
  CHECK_THROWS(worst_case_objective({1.0, 2.0, 3.0}));
  CHECK_THROWS(worst_case_objective(
      {1.0, std::numeric_limits<double>::quiet_NaN(), 2.0, 3.0}));
  CHECK_THROWS(worst_case_objective(
      {1.0, std::numeric_limits<double>::infinity(), 2.0, 3.0}));
}
