#include "toughopt/postproc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace toughopt {

namespace {

struct Shapes {
  double N[4];
  double dNx[4];
  double dNy[4];
};

void eval_shapes(const Rect& r, const Vec2& p, Shapes& s) {
  const double invh = 1.0 / r.width();
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

}  // namespace

FieldProbe::FieldProbe(const AdaptiveMesh& mesh, const Quadrature& quad,
                       const DofMap& dofs, const InclusionLayout& layout,
                       const Eigen::VectorXd& x)
    : mesh_(mesh), quad_(quad), dofs_(dofs), layout_(layout), x_(x) {
  const auto& active = mesh_.active_cells();
  row_of_.reserve(active.size());
  for (size_t i = 0; i < active.size(); ++i) row_of_.emplace(active[i], int(i));
}

FieldSample FieldProbe::operator()(const Vec2& p) const {
  const int c = mesh_.locate(p);
  return sample_in_cell(row_of_.at(c), p);
}

FieldSample FieldProbe::sample_in_cell(int row, const Vec2& p) const {
  const int c = mesh_.active_cells()[size_t(row)];
  const Rect r = mesh_.cell_rect(c);
  Shapes sh;
  eval_shapes(r, p, sh);
  const auto vs = mesh_.cell_vertices(c);
  FieldSample out;
  for (int k = 0; k < 4; ++k) {
    const double ax = x_[dofs_.a_dof(vs[size_t(k)], 0)];
    const double ay = x_[dofs_.a_dof(vs[size_t(k)], 1)];
    const double cv = x_[dofs_.c_dof(vs[size_t(k)])];
    out.u.x() += ax * sh.N[k];
    out.u.y() += ay * sh.N[k];
    out.grad_u(0, 0) += ax * sh.dNx[k];
    out.grad_u(0, 1) += ax * sh.dNy[k];
    out.grad_u(1, 0) += ay * sh.dNx[k];
    out.grad_u(1, 1) += ay * sh.dNy[k];
    out.alpha += cv * sh.N[k];
    out.grad_alpha.x() += cv * sh.dNx[k];
    out.grad_alpha.y() += cv * sh.dNy[k];
  }
  const CellQuadrature& q = quad_.cells[size_t(row)];
  if (q.cut && q.incl >= 0 && q.incl < int(layout_.ellipses.size())) {
    const double psi = layout_.ellipses[size_t(q.incl)].level_set(p);
    const double sp = psi >= 0.0 ? 1.0 : -1.0;
    out.side = std::int8_t(sp);
    for (int k = 0; k < 4; ++k) {
      const int pi = dofs_.pair_index(vs[size_t(k)], q.incl);
      if (pi < 0) continue;
      const double xi = sp - double(dofs_.pair_sign[size_t(pi)]);
      if (xi == 0.0) continue;
      const double bx = x_[dofs_.b_dof(pi, 0)];
      const double by = x_[dofs_.b_dof(pi, 1)];
      out.u.x() += bx * xi * sh.N[k];
      out.u.y() += by * xi * sh.N[k];
      out.grad_u(0, 0) += bx * xi * sh.dNx[k];
      out.grad_u(0, 1) += bx * xi * sh.dNy[k];
      out.grad_u(1, 0) += by * xi * sh.dNx[k];
      out.grad_u(1, 1) += by * xi * sh.dNy[k];
    }
  } else if (!q.bulk.empty()) {
    out.side = q.bulk[0].side;
  }
  return out;
}

namespace {

// Contribution W*n1 - (sigma n) . du/dx1 at one sample.
double j_density(const FieldSample& fs, const MaterialSet& mat, const Vec2& n,
                 bool degraded) {
  const Lame& lm = fs.side > 0 ? mat.matrix : mat.inclusion;
  double g0 = 1.0;
  if (degraded && fs.side > 0) {
    const double om = 1.0 - mat.g_floor;
    g0 = om * degradation(fs.alpha, mat.a1) + mat.g_floor;
  }
  const double W = g0 * strain_energy(fs.grad_u, lm);
  const Eigen::Matrix2d sig = g0 * stress(fs.grad_u, lm);
  const Vec2 dudx1(fs.grad_u(0, 0), fs.grad_u(1, 0));
  return W * n.x() - (sig * n).dot(dudx1);
}

}  // namespace

double j_integral_boundary(const AdaptiveMesh& mesh, const Quadrature& quad,
                           const DofMap& dofs, const MaterialSet& mat,
                           const Eigen::VectorXd& x) {
  InclusionLayout empty;
  FieldProbe probe(mesh, quad, dofs, empty, x);
  // Boundary cells are uncut by construction; probe the owning cell directly.
  std::unordered_map<int, int> row_of;
  const auto& active = mesh.active_cells();
  row_of.reserve(active.size());
  for (size_t i = 0; i < active.size(); ++i) row_of.emplace(active[i], int(i));

  const double gp = 0.5 / std::sqrt(3.0);
  double J = 0.0;
  for (const auto& bf : mesh.boundary_faces()) {
    const Rect r = mesh.cell_rect(bf.cell);
    Vec2 a, b, n;
    switch (bf.side) {
      case 0: a = {r.x0, r.y0}; b = {r.x1, r.y0}; n = {0.0, -1.0}; break;
      case 1: a = {r.x1, r.y0}; b = {r.x1, r.y1}; n = {1.0, 0.0}; break;
      case 2: a = {r.x1, r.y1}; b = {r.x0, r.y1}; n = {0.0, 1.0}; break;
      default: a = {r.x0, r.y1}; b = {r.x0, r.y0}; n = {-1.0, 0.0}; break;
    }
    const double len = (b - a).norm();
    const int row = row_of.at(bf.cell);
    for (double tq : {0.5 - gp, 0.5 + gp}) {
      const FieldSample fs = probe.sample_in_cell(row, a + tq * (b - a));
      // Degraded density: identical to the elastic one wherever alpha = 0,
      // and it kills the spurious contribution of the crack band where the
      // notch crosses the left boundary.
      J += 0.5 * len * j_density(fs, mat, n, /*degraded=*/true);
    }
  }
  return J;
}

double j_integral_rect(const AdaptiveMesh& mesh, const Quadrature& quad,
                       const DofMap& dofs, const MaterialSet& mat,
                       const InclusionLayout& layout, const Eigen::VectorXd& x,
                       const Rect& contour, int segments_per_side) {
  FieldProbe probe(mesh, quad, dofs, layout, x);
  const Vec2 corner[4] = {{contour.x0, contour.y0},
                          {contour.x1, contour.y0},
                          {contour.x1, contour.y1},
                          {contour.x0, contour.y1}};
  const Vec2 normal[4] = {{0.0, -1.0}, {1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}};
  const double gp = 0.5 / std::sqrt(3.0);
  double J = 0.0;
  for (int s = 0; s < 4; ++s) {
    const Vec2 a = corner[s], b = corner[(s + 1) % 4];
    const double seg = (b - a).norm() / segments_per_side;
    for (int i = 0; i < segments_per_side; ++i) {
      const Vec2 p0 = a + (double(i) / segments_per_side) * (b - a);
      const Vec2 p1 = a + (double(i + 1) / segments_per_side) * (b - a);
      for (double tq : {0.5 - gp, 0.5 + gp}) {
        const FieldSample fs = probe(p0 + tq * (p1 - p0));
        J += 0.5 * seg * j_density(fs, mat, normal[s], /*degraded=*/true);
      }
    }
  }
  return J;
}

ToughnessReport effective_toughness(const std::vector<TraceRow>& trace,
                                    double x_lo, double x_hi, int half_width) {
  std::vector<double> j;
  for (const auto& row : trace)
    if (row.tip_x >= x_lo && row.tip_x <= x_hi) j.push_back(row.J);
  if (j.empty())
    throw std::runtime_error(
        "toughness window is empty: the crack never reached it");
  const int n = int(j.size());
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const int a = std::max(0, i - half_width);
    const int b = std::min(n - 1, i + half_width);
    double acc = 0.0;
    for (int k = a; k <= b; ++k) acc += j[size_t(k)];
    best = std::max(best, acc / double(b - a + 1));
  }
  ToughnessReport rep;
  rep.g_eff = best;
  rep.x_lo = x_lo;
  rep.x_hi = x_hi;
  rep.half_width = half_width;
  return rep;
}

double worst_case_objective(const std::vector<double>& per_scenario) {
  if (per_scenario.size() != 4)
    throw std::runtime_error("worst-case objective expects 4 scenario values");
  double m = per_scenario[0];
  for (double v : per_scenario) {
    if (!std::isfinite(v))
      throw std::runtime_error("scenario value missing or not finite");
    m = std::min(m, v);
  }
  return m;
}

}  // namespace toughopt
