#include "toughopt/de.hpp"

#include <cmath>
#include <stdexcept>

namespace toughopt {

DEResult de_maximize(const std::function<double(const Eigen::VectorXd&)>& f,
                     const std::function<bool(const Eigen::VectorXd&)>& feasible,
                     const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                     std::vector<Eigen::VectorXd> pop, const DEOptions& opt,
                     std::mt19937_64& rng) {
  const int P = int(pop.size());
  const int d = int(lo.size());
  if (P < 4) throw std::invalid_argument("DE needs a population of at least 4");

  std::vector<double> fit(static_cast<size_t>(P));
  for (int i = 0; i < P; ++i) fit[size_t(i)] = f(pop[size_t(i)]);

  int best = 0;
  for (int i = 1; i < P; ++i)
    if (fit[size_t(i)] > fit[size_t(best)]) best = i;

  std::uniform_int_distribution<int> pick(0, P - 1);
  std::uniform_int_distribution<int> dim(0, d - 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  std::vector<Eigen::VectorXd> next = pop;
  std::vector<double> next_fit = fit;
  DEResult res;
  double stall_best = fit[size_t(best)];
  int stall = 0;
  int gen = 0;
  for (; gen < opt.generations; ++gen) {
    for (int i = 0; i < P; ++i) {
      int r1 = pick(rng);
      while (r1 == i) r1 = pick(rng);
      int r2 = pick(rng);
      while (r2 == i || r2 == r1) r2 = pick(rng);
      int r3 = pick(rng);
      while (r3 == i || r3 == r1 || r3 == r2) r3 = pick(rng);
      const int jrand = dim(rng);
      Eigen::VectorXd trial = pop[size_t(i)];
      for (int j = 0; j < d; ++j) {
        const double u = u01(rng);
        if (u < opt.CR || j == jrand) {
          double v = pop[size_t(r1)][j] +
                     opt.F * (pop[size_t(r2)][j] - pop[size_t(r3)][j]);
          trial[j] = std::min(std::max(v, lo[j]), hi[j]);
        }
      }
      if (!feasible(trial)) continue;  // parent survives
      const double fv = f(trial);
      if (fv >= fit[size_t(i)]) {
        next[size_t(i)] = std::move(trial);
        next_fit[size_t(i)] = fv;
      }
    }
    pop = next;
    fit = next_fit;
    for (int i = 0; i < P; ++i)
      if (fit[size_t(i)] > fit[size_t(best)]) best = i;

    if (fit[size_t(best)] >
        stall_best + 1e-12 * (1.0 + std::abs(stall_best))) {
      stall_best = fit[size_t(best)];
      stall = 0;
    } else if (++stall >= opt.stall_generations) {
      ++gen;
      break;
    }
  }
  res.x = pop[size_t(best)];
  res.value = fit[size_t(best)];
  res.generations = gen;
  return res;
}

}  // namespace toughopt
