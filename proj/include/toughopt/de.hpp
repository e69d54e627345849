#pragma once

#include <Eigen/Core>
#include <functional>
#include <random>
#include <vector>

namespace toughopt {

struct DEOptions {
  double F = 0.7;
  double CR = 0.9;
  int generations = 200;
  int stall_generations = 40;  // early stop when the best stops improving
};

struct DEResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int generations = 0;
};

// rand/1/bin differential evolution maximizing f over the box [lo, hi],
// starting from a feasible population. Trial vectors are clipped to the box;
// trials failing `feasible` are rejected (the parent survives), so every
// individual stays feasible throughout. Deterministic for a given rng state:
// the per-member draw count does not depend on outcomes.
DEResult de_maximize(const std::function<double(const Eigen::VectorXd&)>& f,
                     const std::function<bool(const Eigen::VectorXd&)>& feasible,
                     const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                     std::vector<Eigen::VectorXd> pop, const DEOptions& opt,
                     std::mt19937_64& rng);

}  // namespace toughopt
