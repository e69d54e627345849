#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "toughopt/de.hpp"
#include "toughopt/gp.hpp"

using namespace toughopt;

namespace {

Eigen::MatrixXd latin_ish(int n, int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = U(rng);
  return X;
}

double smooth2d(double x, double y) {
  return std::sin(3.0 * x) * std::cos(2.0 * y) + 0.5 * x * y;
}

std::vector<Eigen::VectorXd> box_pop(int n, const Eigen::VectorXd& lo,
                                     const Eigen::VectorXd& hi,
                                     std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<Eigen::VectorXd> pop;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(lo.size());
    for (int j = 0; j < lo.size(); ++j)
      x[j] = lo[j] + (hi[j] - lo[j]) * U(rng);
    pop.push_back(x);
  }
  return pop;
}

}  // namespace

TEST_CASE("gp interpolates noise-free training data") {
  std::mt19937_64 rng(11);
  const int n = 30;
  Eigen::MatrixXd X = latin_ish(n, 2, rng);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = smooth2d(X(i, 0), X(i, 1));

  GaussianProcess gp;
  gp.fit(X, y, GPOptions{}, rng);

  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  gp.posterior(X, mean, cov);
  const double yspan = y.maxCoeff() - y.minCoeff();
  for (int i = 0; i < n; ++i) {
    CHECK(std::abs(mean[i] - y[i]) < 1e-6 * std::max(1.0, yspan));
    // Posterior variance collapses to the noise floor at the data.
    CHECK(cov(i, i) >= 0.0);
    CHECK(cov(i, i) < 1e-6 * gp.signal_variance() * gp.output_std() *
                          gp.output_std());
  }

  // Between points the fitted surrogate tracks the smooth target.
  Eigen::MatrixXd Q = latin_ish(40, 2, rng);
  gp.posterior(Q, mean, cov);
  double worst = 0.0;
  for (int i = 0; i < Q.rows(); ++i)
    worst = std::max(worst,
                     std::abs(mean[i] - smooth2d(Q(i, 0), Q(i, 1))));
  CHECK(worst < 0.1 * std::max(1.0, yspan));
}

TEST_CASE("gp reverts to the prior far from the data") {
  std::mt19937_64 rng(13);
  const int n = 20;
  // Cluster all the data in a corner of a much larger normalized box.
  Eigen::MatrixXd X = 0.15 * latin_ish(n, 2, rng);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = 3.0 + smooth2d(X(i, 0), X(i, 1));

  GaussianProcess gp;
  gp.fit(X, y, GPOptions{}, rng);
  REQUIRE(gp.n_train() == n);

  Eigen::MatrixXd far(1, 2);
  far << 40.0, 40.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  gp.posterior(far, mean, cov);
  // Prior mean is the training average; prior variance the signal variance.
  CHECK(std::abs(mean[0] - gp.output_mean()) < 1e-6);
  const double prior_var =
      gp.signal_variance() * gp.output_std() * gp.output_std();
  CHECK(cov(0, 0) == doctest::Approx(prior_var).epsilon(1e-6));

  // Lengthscales respect their bounds.
  GPOptions opt;
  for (int j = 0; j < 2; ++j) {
    CHECK(gp.lengthscales()[j] >= opt.len_lo);
    CHECK(gp.lengthscales()[j] <= opt.len_hi);
  }
}

TEST_CASE("gp posterior covariance is symmetric psd") {
  std::mt19937_64 rng(17);
  Eigen::MatrixXd X = latin_ish(25, 3, rng);
  Eigen::VectorXd y(25);
  for (int i = 0; i < 25; ++i)
    y[i] = X(i, 0) * X(i, 0) - 2.0 * X(i, 1) + 0.3 * X(i, 2);
  GaussianProcess gp;
  gp.fit(X, y, GPOptions{}, rng);

  Eigen::MatrixXd Q = latin_ish(12, 3, rng);
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  gp.posterior(Q, mean, cov);
  CHECK((cov - cov.transpose()).lpNorm<Eigen::Infinity>() < 1e-10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  CHECK(es.eigenvalues().minCoeff() > -1e-8);
}

TEST_CASE("gp fit is deterministic for a fixed seed") {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  {
    std::mt19937_64 rng(23);
    X = latin_ish(18, 2, rng);
    y.resize(18);
    for (int i = 0; i < 18; ++i) y[i] = smooth2d(X(i, 0), X(i, 1));
  }
  auto fit_once = [&](Eigen::VectorXd& ell, double& sig2, double& lml) {
    std::mt19937_64 rng(29);
    GaussianProcess gp;
    gp.fit(X, y, GPOptions{}, rng);
    ell = gp.lengthscales();
    sig2 = gp.signal_variance();
    lml = gp.log_marginal();
  };
  Eigen::VectorXd e1, e2;
  double s1, s2, l1, l2;
  fit_once(e1, s1, l1);
  fit_once(e2, s2, l2);
  CHECK(e1 == e2);  // bitwise
  CHECK(s1 == s2);
  CHECK(l1 == l2);
}

TEST_CASE("de finds the optimum of smooth functions") {
  std::mt19937_64 rng(31);
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(2, -2.0);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(2, 2.0);

  // Concave quadratic, peak at (0.7, -0.3).
  auto f = [](const Eigen::VectorXd& x) {
    return 5.0 - (x[0] - 0.7) * (x[0] - 0.7) - 2.0 * (x[1] + 0.3) * (x[1] + 0.3);
  };
  DEOptions opt;
  DEResult r = de_maximize(f, [](const Eigen::VectorXd&) { return true; }, lo, hi, box_pop(24, lo, hi, rng), opt, rng);
  CHECK(std::abs(r.x[0] - 0.7) < 1e-2);
  CHECK(std::abs(r.x[1] + 0.3) < 1e-2);
  CHECK(r.value == doctest::Approx(5.0).epsilon(1e-3));

  // Multimodal: cosine ripple on a dome, global peak at the origin. The
  // flat top needs a longer stall window to polish.
  auto g = [](const Eigen::VectorXd& x) {
    return 2.0 * std::cos(3.0 * x.norm()) - 0.1 * x.squaredNorm();
  };
  opt.generations = 400;
  opt.stall_generations = 150;
  r = de_maximize(g, [](const Eigen::VectorXd&) { return true; }, lo, hi, box_pop(60, lo, hi, rng), opt, rng);
  CHECK(r.x.norm() < 5e-2);
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("constrained de stays feasible and matches a grid sweep") {
  std::mt19937_64 rng(37);
  Eigen::VectorXd lo = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd hi = Eigen::VectorXd::Ones(2);

  // Peak sits inside the excluded disc: the solution must land on the rim.
  auto f = [](const Eigen::VectorXd& x) {
    return -(x[0] - 0.7) * (x[0] - 0.7) - (x[1] - 0.5) * (x[1] - 0.5);
  };
  auto ok = [](const Eigen::VectorXd& x) {
    const double dx = x[0] - 0.7, dy = x[1] - 0.5;
    return dx * dx + dy * dy >= 0.04;  // keep out of radius 0.2
  };

  // Feasible seed population.
  std::vector<Eigen::VectorXd> pop;
  while (pop.size() < 30) {
    auto cand = box_pop(1, lo, hi, rng);
    if (ok(cand[0])) pop.push_back(cand[0]);
  }
  DEOptions opt;
  DEResult r = de_maximize(f, ok, lo, hi, pop, opt, rng);
  CHECK(ok(r.x));
  CHECK(r.value == doctest::Approx(-0.04).epsilon(1e-3));

  // 200 x 200 grid reference over the feasible set.
  double best = -1e300;
  for (int i = 0; i <= 200; ++i)
    for (int j = 0; j <= 200; ++j) {
      Eigen::VectorXd x(2);
      x << i / 200.0, j / 200.0;
      if (ok(x)) best = std::max(best, f(x));
    }
  CHECK(r.value >= best - 1e-3);
}

TEST_CASE("de is deterministic for a fixed seed") {
  auto run = [](Eigen::VectorXd& xout, double& vout) {
    std::mt19937_64 rng(41);
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(3, -1.0);
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(3, 1.0);
    auto f = [](const Eigen::VectorXd& x) {
      return -(x.array() - 0.25).matrix().squaredNorm() +
             0.3 * std::sin(5.0 * x[0]);
    };
    DEOptions opt;
    opt.generations = 80;
    DEResult r = de_maximize(f, [](const Eigen::VectorXd&) { return true; }, lo, hi, box_pop(20, lo, hi, rng), opt, rng);
    xout = r.x;
    vout = r.value;
  };
  Eigen::VectorXd x1, x2;
  double v1, v2;
  run(x1, v1);
  run(x2, v2);
  CHECK(x1 == x2);  // bitwise
  CHECK(v1 == v2);
}
