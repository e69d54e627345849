#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "toughopt/de.hpp"
#include "toughopt/gp.hpp"

namespace toughopt {

inline constexpr std::array<double, 4> kScenarios{0.0, 0.25, 0.5, 0.75};

struct BoBounds {
  Eigen::VectorXd lo, hi;
  int dim() const { return int(lo.size()); }
};

using Feasibility = std::function<bool(const Eigen::VectorXd&)>;
// Evaluates a batch of designs at all four scenarios; NaN entries mark
// failed runs. Called once for the initial designs and once per iteration,
// so implementations may fan the work out to parallel workers.
using BatchEvaluator = std::function<std::vector<std::array<double, 4>>(
    const std::vector<Eigen::VectorXd>&)>;

struct CampaignOptions {
  int n_init = 20;
  int q = 5;
  int iterations = 10;
  double beta = 4.0;  // UCB exploration weight
  int n_mc = 256;     // joint posterior draws per acquisition evaluation
  int de_N = 15;      // DE population = N * q^2 * d
  DEOptions de;
  GPOptions gp;
  std::uint64_t seed = 1;
  double tr_up = 1.3, tr_down = 0.7, tr_floor = 0.1;
  int feasible_budget_factor = 500;  // rejection-sampling attempts per seed
  std::string checkpoint_path;       // empty: no checkpointing
  std::uint64_t config_hash = 0;     // verified on resume
};

struct EvalRecord {
  Eigen::VectorXd x;
  std::array<double, 4> g{};  // per-scenario toughness, NaN = failed
  double f = 0.0;             // min over scenarios, NaN if any failed
  bool complete() const;
};

struct CampaignRecord {
  BoBounds global, trust;
  std::vector<EvalRecord> evals;
  int iteration = 0;
  int best = -1;  // index of the incumbent, -1 if none complete yet
  // (designs evaluated so far, best worst-case value) after init and after
  // each iteration.
  std::vector<std::array<double, 2>> convergence;

  double best_f() const;
};

struct Surrogate {
  std::array<GaussianProcess, 4> gp;
  BoBounds norm;  // normalization box (the trust region at fit time)

  Eigen::MatrixXd normalize(const std::vector<Eigen::VectorXd>& xs) const;
};

// One GP per scenario, trained on the designs whose run of that scenario
// succeeded, inputs normalized to the given box.
Surrogate fit_surrogate(const std::vector<EvalRecord>& evals,
                        const BoBounds& norm_box, const GPOptions& opt,
                        std::mt19937_64& rng);

// Monte-Carlo batch upper-confidence-bound of the composite (worst-case)
// objective. Xq holds one normalized batch point per row; draws is an
// n_mc x (4*q) matrix of standard normals (common random numbers).
double acquisition_qucb(const Surrogate& s, const Eigen::MatrixXd& Xq,
                        double beta, const Eigen::MatrixXd& draws);

// Maximize the acquisition over q stacked points inside the trust box by
// differential evolution seeded with de_N*q^2*d feasible individuals.
// Throws when the feasible-seed sampling budget runs out.
std::vector<Eigen::VectorXd> propose_batch(const Surrogate& s,
                                           const BoBounds& trust,
                                           const Feasibility& feasible,
                                           const CampaignOptions& opt,
                                           std::mt19937_64& de_rng,
                                           std::mt19937_64& mc_rng);

// Scale the box about the incumbent, clip into the global box, and keep
// every edge between floor_frac of the global edge and the full edge.
BoBounds update_trust_region(const BoBounds& global, const BoBounds& cur,
                             const Eigen::VectorXd& center, bool success,
                             double g_up, double g_down, double floor_frac);

void save_checkpoint(const std::string& path, const CampaignRecord& rec,
                     std::uint64_t config_hash, const std::mt19937_64& rng_init,
                     const std::mt19937_64& rng_gp, const std::mt19937_64& rng_de,
                     const std::mt19937_64& rng_mc);

// Loads a checkpoint, restoring the record and the four RNG streams.
// Throws on malformed content or when the stored hash differs.
CampaignRecord load_checkpoint(const std::string& path,
                               std::uint64_t expect_hash,
                               std::mt19937_64& rng_init, std::mt19937_64& rng_gp,
                               std::mt19937_64& rng_de, std::mt19937_64& rng_mc);

// Worst-case Bayesian optimization: feasible uniform initialization, then
// fit / propose / evaluate / trust-region iterations, checkpointing after
// every stage when a path is configured. `resume_from` restarts an
// interrupted campaign and continues identically to an uninterrupted run.
CampaignRecord run_campaign(const BatchEvaluator& evaluate,
                            const BoBounds& bounds, const Feasibility& feasible,
                            const CampaignOptions& opt,
                            const std::string& resume_from = "");

}  // namespace toughopt
