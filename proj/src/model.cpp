#include "toughopt/model.hpp"

#include <algorithm>
#include <cmath>

namespace toughopt {

Lame lame_constants(double E, double nu) {
  Lame lm;
  lm.lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  lm.mu = E / (2.0 * (1.0 + nu));
  return lm;
}

static inline double czm_denom(double alpha, double a1) {
  const double om = 1.0 - alpha;
  return std::max(om * om + a1 * alpha * (1.0 - 0.5 * alpha), 1e-14);
}

double degradation(double alpha, double a1) {
  const double om = 1.0 - alpha;
  return om * om / czm_denom(alpha, a1);
}

double degradation_d(double alpha, double a1) {
  const double D = czm_denom(alpha, a1);
  return -a1 * (1.0 - alpha) / (D * D);
}

double degradation_dd(double alpha, double a1) {
  const double om = 1.0 - alpha;
  const double D = czm_denom(alpha, a1);
  const double Dp = om * (a1 - 2.0);
  return a1 * (D + 2.0 * om * Dp) / (D * D * D);
}

double optimal_profile(double dist, double eps) {
  const double s = std::abs(dist) / eps;
  if (s >= 0.5 * kPi) return 0.0;
  return 1.0 - std::sin(s);
}

double strain_energy(const Eigen::Matrix2d& grad_u, const Lame& lm) {
  const Eigen::Matrix2d e = 0.5 * (grad_u + grad_u.transpose());
  const double tr = e.trace();
  return 0.5 * lm.lambda * tr * tr + lm.mu * e.squaredNorm();
}

Eigen::Matrix2d stress(const Eigen::Matrix2d& grad_u, const Lame& lm) {
  const Eigen::Matrix2d e = 0.5 * (grad_u + grad_u.transpose());
  return lm.lambda * e.trace() * Eigen::Matrix2d::Identity() + 2.0 * lm.mu * e;
}

Vec2 surfing_displacement(const Vec2& p, const Vec2& center, double K,
                          double E, double nu) {
  const Vec2 d = p - center;
  const double r = d.norm();
  if (r == 0.0) return Vec2::Zero();
  const double th = std::atan2(d.y(), d.x());
  const double mu = E / (2.0 * (1.0 + nu));
  const double kappa = 3.0 - 4.0 * nu;
  const double amp = K / (2.0 * mu) * std::sqrt(r / (2.0 * kPi)) * (kappa - std::cos(th));
  return Vec2(amp * std::cos(0.5 * th), amp * std::sin(0.5 * th));
}

}  // namespace toughopt
