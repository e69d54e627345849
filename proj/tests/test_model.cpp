#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "toughopt/assembly.hpp"
#include "toughopt/model.hpp"

using namespace toughopt;

namespace {

// Gauss-Legendre nodes via Newton on Legendre polynomials.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(size_t(n));
  w.resize(size_t(n));
  for (int i = 0; i < n; ++i) {
    double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const double dp = n * (t * p1 - p0) / (t * t - 1.0);
    x[size_t(i)] = t;
    w[size_t(i)] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

}  // namespace

TEST_CASE("crack density normalization constant is pi") {
  // 4 int_0^1 sqrt(w(a)) da with a = t^2 so the integrand is smooth.
  std::vector<double> x, w;
  gauss_legendre(60, x, w);
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double t = 0.5 * (x[i] + 1.0);
    acc += 0.5 * w[i] * 2.0 * t * std::sqrt(crack_density(t * t));
  }
  CHECK(std::abs(4.0 * acc - kCw) < 1e-10);
  CHECK(kCw == doctest::Approx(kPi).epsilon(1e-15));
}

TEST_CASE("degradation endpoints and reference value") {
  const double a1 = czm_a1(1.0, 0.5);
  CHECK(degradation(0.0, a1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(degradation(1.0, a1) == doctest::Approx(0.0).epsilon(1e-14));
  // l_ch=1, eps=0.5: denominator 0.25 + (8/pi)*0.375.
  const double denom = 0.25 + (8.0 / kPi) * 0.375;
  CHECK(degradation(0.5, a1) == doctest::Approx(0.25 / denom).epsilon(1e-12));
  CHECK(degradation(0.5, a1) == doctest::Approx(0.207481).epsilon(1e-5));
}

TEST_CASE("degradation is strictly decreasing, w non-decreasing") {
  const double a1 = czm_a1(1.0, 0.5);
  for (int i = 0; i < 1000; ++i) {
    const double a = i * 1e-3;
    CHECK(degradation_d(a, a1) < 0.0);
    CHECK(crack_density_d(a) >= 0.0);
  }
}

TEST_CASE("analytic derivatives match finite differences") {
  const double a1 = czm_a1(1.0, 0.5);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.05, 0.95);
  const double h = 1e-6;
  for (int k = 0; k < 20; ++k) {
    const double a = U(rng);
    const double gd = (degradation(a + h, a1) - degradation(a - h, a1)) / (2 * h);
    const double gdd =
        (degradation_d(a + h, a1) - degradation_d(a - h, a1)) / (2 * h);
    const double wd = (crack_density(a + h) - crack_density(a - h)) / (2 * h);
    CHECK(degradation_d(a, a1) == doctest::Approx(gd).epsilon(1e-6));
    CHECK(degradation_dd(a, a1) == doctest::Approx(gdd).epsilon(1e-6));
    CHECK(crack_density_d(a) == doctest::Approx(wd).epsilon(1e-6));
  }
}

TEST_CASE("plane strain elasticity") {
  const Lame lm = lame_constants(1.0, 0.3);
  CHECK(lm.lambda == doctest::Approx(0.576923).epsilon(1e-5));
  CHECK(lm.mu == doctest::Approx(0.384615).epsilon(1e-5));

  CHECK(strain_energy(Eigen::Matrix2d::Zero(), lm) == 0.0);
  CHECK(stress(Eigen::Matrix2d::Zero(), lm).norm() == 0.0);

  // Pure volumetric strain e*I: Psi = 2 e^2 (lambda + mu).
  const double e = 0.01;
  Eigen::Matrix2d gu = e * Eigen::Matrix2d::Identity();
  CHECK(strain_energy(gu, lm) ==
        doctest::Approx(2.0 * e * e * (lm.lambda + lm.mu)).epsilon(1e-12));
  CHECK(strain_energy(gu, lm) == doctest::Approx(1.92308e-4).epsilon(1e-5));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int k = 0; k < 10; ++k) {
    Eigen::Matrix2d g;
    g << U(rng), U(rng), U(rng), U(rng);
    CHECK(strain_energy(2.0 * g, lm) ==
          doctest::Approx(4.0 * strain_energy(g, lm)).epsilon(1e-12));
    // Stress is the gradient of Psi w.r.t. the symmetric strain.
    const Eigen::Matrix2d s = stress(g, lm);
    const double h = 1e-6;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        Eigen::Matrix2d gp = g, gm = g;
        gp(i, j) += h;
        gm(i, j) -= h;
        const double fd =
            (strain_energy(gp, lm) - strain_energy(gm, lm)) / (2 * h);
        // d Psi / d grad_u(i,j) = sigma(i,j) by symmetry of sigma.
        CHECK(s(i, j) == doctest::Approx(fd).epsilon(1e-5));
      }
  }
}

TEST_CASE("interface spring law") {
  CHECK(interface_energy(Vec2::Zero(), 100.0) == 0.0);
  CHECK(interface_traction(Vec2::Zero(), 100.0).norm() == 0.0);
  CHECK(interface_energy(Vec2(0.01, 0.0), 100.0) ==
        doctest::Approx(0.005).epsilon(1e-14));
  CHECK(interface_traction(Vec2(0.01, 0.0), 100.0).x() ==
        doctest::Approx(1.0).epsilon(1e-14));
  // Isotropy: energy depends on |jump| only.
  const Vec2 j0(0.03, -0.04);
  for (double th : {0.3, 1.1, 2.9}) {
    const Vec2 jr(std::cos(th) * j0.x() - std::sin(th) * j0.y(),
                  std::sin(th) * j0.x() + std::cos(th) * j0.y());
    CHECK(interface_energy(jr, 100.0) ==
          doctest::Approx(interface_energy(j0, 100.0)).epsilon(1e-13));
  }
}

TEST_CASE("optimal damage profile") {
  const double eps = 0.5;
  CHECK(optimal_profile(0.0, eps) == doctest::Approx(1.0));
  CHECK(optimal_profile(kPi * eps / 2.0, eps) == doctest::Approx(0.0));
  CHECK(optimal_profile(kPi * eps / 4.0, eps) ==
        doctest::Approx(1.0 - std::sin(kPi / 4.0)).epsilon(1e-12));
  CHECK(optimal_profile(kPi * eps / 4.0, eps) ==
        doctest::Approx(0.292893).epsilon(1e-5));
  CHECK(optimal_profile(10.0 * eps, eps) == 0.0);
}

TEST_CASE("surfing displacement reference value and symmetry") {
  // r = 2pi, theta = pi about the origin: u_y = K/(2 mu) * (kappa + 1).
  const Vec2 u = surfing_displacement(Vec2(-2.0 * kPi, 0.0), Vec2(0.0, 0.0),
                                      1.1, 1.0, 0.3);
  CHECK(u.y() == doctest::Approx(4.004).epsilon(1e-9));

  // At the center the sqrt(r) factor kills everything.
  const Vec2 u0 =
      surfing_displacement(Vec2(0.3, -0.7), Vec2(0.3, -0.7), 1.1, 1.0, 0.3);
  CHECK(u0.norm() == 0.0);

  // Mode I: u_x even, u_y odd under reflection across the crack line.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  for (int k = 0; k < 20; ++k) {
    const double x = U(rng), y = std::abs(U(rng)) + 1e-3;
    const Vec2 up = surfing_displacement(Vec2(x, y), Vec2::Zero(), 1.1, 1.0, 0.3);
    const Vec2 um =
        surfing_displacement(Vec2(x, -y), Vec2::Zero(), 1.1, 1.0, 0.3);
    CHECK(up.x() == doctest::Approx(um.x()).epsilon(1e-12));
    CHECK(up.y() == doctest::Approx(-um.y()).epsilon(1e-12));
  }
}

TEST_CASE("surfing data translates with the moving center") {
  SurfingParams sp;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> U(-4.0, 4.0);
  for (int k = 0; k < 20; ++k) {
    const Vec2 p(U(rng), U(rng));
    const double t = 0.1 + 0.01 * k, dt = 0.037;
    const Vec2 a = surfing_displacement(p, t, 0.0, sp);
    const Vec2 b =
        surfing_displacement(p - Vec2(sp.v * dt, 0.0), t - dt, 0.0, sp);
    CHECK(a.x() == doctest::Approx(b.x()).epsilon(1e-12));
    CHECK(a.y() == doctest::Approx(b.y()).epsilon(1e-12));
  }
}
