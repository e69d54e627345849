#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "toughopt/mesh.hpp"

using namespace toughopt;

namespace {

MeshConfig small_cfg() {
  MeshConfig c;
  c.domain = Rect{0.0, -4.0, 12.0, 4.0};
  c.root_cell = 1.0;
  c.max_level = 2;
  return c;
}

bool balanced(const AdaptiveMesh& m) {
  std::vector<int> nb;
  for (int c : m.active_cells())
    for (int s = 0; s < 4; ++s) {
      m.edge_neighbors(c, s, nb);
      for (int o : nb)
        if (std::abs(m.cell_level(o) - m.cell_level(c)) > 1) return false;
    }
  return true;
}

double area_sum(const AdaptiveMesh& m) {
  double a = 0.0;
  for (int c : m.active_cells()) {
    const Rect r = m.cell_rect(c);
    a += r.width() * r.height();
  }
  return a;
}

}  // namespace

TEST_CASE("refinement keeps tiling, balance and hanging averages") {
  AdaptiveMesh m(small_cfg());
  const double area = 12.0 * 8.0;
  CHECK(area_sum(m) == doctest::Approx(area).epsilon(1e-12));

  // Refine a corner cell to max level; balance must expand the set.
  std::vector<int> ref = {m.locate(Vec2(0.3, -3.7))};
  CHECK(m.adapt(ref, {}, {}));
  ref = {m.locate(Vec2(0.1, -3.9))};
  CHECK(m.adapt(ref, {}, {}));
  CHECK(balanced(m));
  CHECK(area_sum(m) == doctest::Approx(area).epsilon(1e-12));

  // Hanging vertices are midpoints of their master edge.
  CHECK(!m.hanging().empty());
  for (const auto& h : m.hanging()) {
    const Vec2 mid = 0.5 * (m.vertex_pos(h.a) + m.vertex_pos(h.b));
    CHECK((m.vertex_pos(h.mid) - mid).norm() < 1e-12);
  }
}

TEST_CASE("field transfer is exact for bilinear data") {
  AdaptiveMesh m(small_cfg());
  auto fill = [&](Eigen::VectorXd& f) {
    f.resize(m.n_vertices());
    for (int v = 0; v < m.n_vertices(); ++v) {
      const Vec2 p = m.vertex_pos(v);
      f[v] = 2.0 + 0.3 * p.x() - 0.7 * p.y() + 0.11 * p.x() * p.y();
    }
  };
  Eigen::VectorXd f;
  fill(f);
  std::vector<int> ref = {m.locate(Vec2(5.5, 0.5)), m.locate(Vec2(6.5, -0.5))};
  CHECK(m.adapt(ref, {}, {&f}));
  Eigen::VectorXd expect;
  fill(expect);
  CHECK((f - expect).lpNorm<Eigen::Infinity>() < 1e-12);

  // Unchanged marks: adapt reports no change and fields stay put.
  Eigen::VectorXd before = f;
  CHECK(!m.adapt({}, {}, {&f}));
  CHECK((f - before).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("refine then coarsen restores the original field") {
  AdaptiveMesh m(small_cfg());
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Eigen::VectorXd f(m.n_vertices());
  for (int v = 0; v < m.n_vertices(); ++v) f[v] = U(rng);
  const Eigen::VectorXd orig = f;
  const std::vector<Vec2> pos = [&] {
    std::vector<Vec2> p;
    for (int v = 0; v < m.n_vertices(); ++v) p.push_back(m.vertex_pos(v));
    return p;
  }();

  const int target = m.locate(Vec2(5.5, 0.5));
  CHECK(m.adapt({target}, {}, {&f}));
  // Coarsen the four children back.
  std::vector<int> kids;
  for (int c : m.active_cells()) {
    const Rect r = m.cell_rect(c);
    if (r.x0 >= 5.0 - 1e-9 && r.x1 <= 6.0 + 1e-9 && r.y0 >= 0.0 - 1e-9 &&
        r.y1 <= 1.0 + 1e-9)
      kids.push_back(c);
  }
  CHECK(kids.size() == 4);
  bool coarsened = false;
  CHECK(m.adapt({}, kids, {&f}, &coarsened));
  CHECK(coarsened);

  // Original vertices carry the original values.
  for (size_t i = 0; i < pos.size(); ++i) {
    int found = -1;
    for (int v = 0; v < m.n_vertices(); ++v)
      if ((m.vertex_pos(v) - pos[i]).norm() < 1e-12) {
        found = v;
        break;
      }
    REQUIRE(found >= 0);
    CHECK(std::abs(f[found] - orig[int(i)]) < 1e-12);
  }
}

TEST_CASE("crack tip location rules") {
  AdaptiveMesh m(small_cfg());
  Eigen::VectorXd a = Eigen::VectorXd::Zero(m.n_vertices());
  const Vec2 fb(5.0, 0.0);
  CHECK((m.find_crack_tip(a, fb) - fb).norm() == 0.0);

  // Horizontal fully damaged band x in [0, 12] at y = 0... capped at 7.
  for (int v = 0; v < m.n_vertices(); ++v) {
    const Vec2 p = m.vertex_pos(v);
    if (std::abs(p.y()) < 1e-9 && p.x() <= 7.0 + 1e-9) a[v] = 1.0;
  }
  const Vec2 tip = m.find_crack_tip(a, fb);
  CHECK(tip.x() == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(tip.y() == doctest::Approx(0.0).epsilon(1e-12));

  // Two disconnected bands: the rightmost one wins.
  for (int v = 0; v < m.n_vertices(); ++v) {
    const Vec2 p = m.vertex_pos(v);
    if (std::abs(p.y() - 2.0) < 1e-9 && p.x() >= 8.0 && p.x() <= 9.0)
      a[v] = 1.0;
  }
  const Vec2 tip2 = m.find_crack_tip(a, fb);
  CHECK(tip2.x() == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(tip2.y() == doctest::Approx(2.0).epsilon(1e-12));

  // Sub-threshold damage does not qualify.
  Eigen::VectorXd weak = Eigen::VectorXd::Constant(m.n_vertices(), 0.5);
  CHECK((m.find_crack_tip(weak, fb) - fb).norm() == 0.0);
}

TEST_CASE("refine marks spread two rings ahead of the tip") {
  AdaptiveMesh m(small_cfg());
  Eigen::VectorXd a = Eigen::VectorXd::Zero(m.n_vertices());
  CHECK(m.mark_refine(a, Vec2(0.0, 0.0), 2.0).empty());

  // One damaged vertex ahead of the tip.
  int vd = -1;
  for (int v = 0; v < m.n_vertices(); ++v)
    if ((m.vertex_pos(v) - Vec2(6.0, 0.0)).norm() < 1e-9) vd = v;
  REQUIRE(vd >= 0);
  a[vd] = 0.01;
  const auto marks = m.mark_refine(a, Vec2(3.0, 0.0), 2.0);
  CHECK(!marks.empty());
  // The four cells at the vertex plus two neighbor rings: everything within
  // three cells of (6,0), nothing farther.
  for (int c : marks) {
    const Rect r = m.cell_rect(c);
    const Vec2 mid(0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1));
    CHECK((mid - Vec2(6.0, 0.0)).lpNorm<Eigen::Infinity>() < 3.0);
  }
  // Behind the tip with margin nothing is marked.
  CHECK(m.mark_refine(a, Vec2(10.0, 0.0), 2.0).empty());
}

TEST_CASE("coarsen marks only fully damaged cells behind the tip") {
  MeshConfig cfg = small_cfg();
  AdaptiveMesh m(cfg);
  // Refine a band so there is something to coarsen.
  std::vector<int> band;
  for (int c : m.active_cells()) {
    const Rect r = m.cell_rect(c);
    if (std::abs(r.y0 + r.height() * 0.5) < 1.0 && r.x1 <= 6.0)
      band.push_back(c);
  }
  CHECK(m.adapt(band, {}, {}));

  Eigen::VectorXd a(m.n_vertices());
  for (int v = 0; v < m.n_vertices(); ++v) {
    const Vec2 p = m.vertex_pos(v);
    a[v] = (std::abs(p.y()) <= 1.0 && p.x() <= 6.0) ? 0.9 : 0.0;
  }
  const Vec2 tip(10.0, 0.0);
  const auto marks = m.mark_coarsen(a, tip, 2.0);
  CHECK(!marks.empty());
  for (int c : marks) {
    const Rect r = m.cell_rect(c);
    CHECK(r.x1 <= tip.x() - 2.0 + 1e-9);
    CHECK(m.cell_level(c) > 0);
    const auto vs = m.cell_vertices(c);
    for (int v : vs) CHECK(a[v] >= 0.8);
  }

  // A partially damaged cell is kept.
  Eigen::VectorXd partial = a;
  for (int c : m.active_cells()) {
    const Rect r = m.cell_rect(c);
    if (r.x0 >= 1.0 && r.x1 <= 2.0 && std::abs(r.y0) < 0.6) {
      partial[m.cell_vertices(c)[0]] = 0.5;
      break;
    }
  }
  const auto marks2 = m.mark_coarsen(partial, tip, 2.0);
  for (int c : marks2) {
    const auto vs = m.cell_vertices(c);
    for (int v : vs) CHECK(partial[v] >= 0.8);
  }

  // Ahead of the tip nothing is marked regardless of damage.
  CHECK(m.mark_coarsen(a, Vec2(0.0, 0.0), 2.0).empty());
}

TEST_CASE("adaptation loop reaches the finest level and terminates") {
  MeshConfig cfg = small_cfg();
  cfg.max_level = 3;
  AdaptiveMesh m(cfg);
  // Damage blob near (6, 0); loop mark+adapt until stable.
  const Vec2 tip(4.0, 0.0);
  int rounds = 0;
  for (; rounds <= cfg.max_level + 1; ++rounds) {
    Eigen::VectorXd a(m.n_vertices());
    for (int v = 0; v < m.n_vertices(); ++v) {
      const Vec2 p = m.vertex_pos(v);
      a[v] = (p - Vec2(6.0, 0.0)).norm() < 1.2 ? 1.0 : 0.0;
    }
    const auto marks = m.mark_refine(a, tip, 2.0);
    std::vector<Eigen::VectorXd*> none;
    if (marks.empty() || !m.adapt(marks, {}, none)) break;
  }
  CHECK(rounds <= cfg.max_level);
  CHECK(balanced(m));
  // Cells holding damage sit at the maximum level now.
  for (int c : m.active_cells()) {
    const Rect r = m.cell_rect(c);
    const Vec2 mid(0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1));
    if ((mid - Vec2(6.0, 0.0)).norm() < 0.8)
      CHECK(m.cell_level(c) == cfg.max_level);
  }
  CHECK(area_sum(m) == doctest::Approx(96.0).epsilon(1e-12));
}
