#pragma once

#include <Eigen/Core>

#include "toughopt/geometry.hpp"

namespace toughopt {

inline constexpr double kPi = 3.14159265358979323846;

// Normalization constant of the crack density w(alpha) = 2*alpha - alpha^2:
// c_w = 4 * int_0^1 sqrt(w) d alpha = pi.
inline constexpr double kCw = kPi;

struct MaterialParams {
  double E_matrix = 1.0;
  double E_inclusion = 5.0;
  double nu = 0.3;          // both phases
  double k_interface = 100.0;
  double G_c = 1.0;         // matrix toughness
  double l_ch = 1.0;        // cohesive internal length
};

struct Lame {
  double lambda = 0.0;
  double mu = 0.0;
};

// Plane-strain Lamé constants.
Lame lame_constants(double E, double nu);

// Cohesive-zone degradation: g = (1-a)^2 / [(1-a)^2 + a1*a*(1 - a/2)]
// with a1 = 4*l_ch / (pi*eps). Denominator clamped below 1e-14.
double degradation(double alpha, double a1);
double degradation_d(double alpha, double a1);   // dg/dalpha
double degradation_dd(double alpha, double a1);  // d2g/dalpha2
inline double czm_a1(double l_ch, double eps) { return 4.0 * l_ch / (kPi * eps); }

// Crack surface density and derivatives.
inline double crack_density(double alpha) { return 2.0 * alpha - alpha * alpha; }
inline double crack_density_d(double alpha) { return 2.0 - 2.0 * alpha; }
inline constexpr double crack_density_dd() { return -2.0; }

// Optimal 1D damage profile at distance |x| from the crack plane:
// alpha = 1 - sin(|x|/eps) inside the band |x| <= pi*eps/2, else 0.
double optimal_profile(double dist, double eps);

// Cohesive spring law on inclusion interfaces.
inline double interface_energy(const Vec2& jump, double k) {
  return 0.5 * k * jump.squaredNorm();
}
inline Vec2 interface_traction(const Vec2& jump, double k) { return k * jump; }

// Isotropic plane-strain energy density and stress from the displacement
// gradient (strain = symmetric part).
double strain_energy(const Eigen::Matrix2d& grad_u, const Lame& lm);
Eigen::Matrix2d stress(const Eigen::Matrix2d& grad_u, const Lame& lm);

// Mode-I crack-tip displacement field about a moving center, used as the
// Dirichlet data that drags the crack through the domain:
//   u = K/(2 mu) * sqrt(r/2pi) * (kappa - cos th) * (cos(th/2), sin(th/2)),
// kappa = 3 - 4 nu, r/th polar about `center`, th in (-pi, pi].
Vec2 surfing_displacement(const Vec2& p, const Vec2& center, double K,
                          double E, double nu);

}  // namespace toughopt
