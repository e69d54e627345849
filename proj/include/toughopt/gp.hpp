#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <random>

namespace toughopt {

struct GPOptions {
  // Observation noise is fixed, not fitted: the simulator is deterministic,
  // and noise-free interpolation at training points is part of the contract.
  double noise = 1e-8;      // variance, in standardized output units
  double jitter = 1e-10;
  double len_lo = 0.05, len_hi = 10.0;  // lengthscale bounds (unit-box inputs)
  double sig_lo = 0.05, sig_hi = 20.0;  // signal variance bounds (standardized)
  int fit_pop = 24;                     // DE population for hyperparameter fit
  int fit_generations = 60;
};

// Matern-5/2 GP with per-dimension lengthscales. Inputs are expected
// normalized (unit box for the current bounds); outputs are standardized
// internally. Hyperparameters by marginal-likelihood maximization with a
// population-based global search (multi-start equivalent).
class GaussianProcess {
 public:
  void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
           const GPOptions& opt, std::mt19937_64& rng);

  // Posterior over the rows of Xq in raw output units.
  void posterior(const Eigen::MatrixXd& Xq, Eigen::VectorXd& mean,
                 Eigen::MatrixXd& cov) const;

  double log_marginal() const { return lml_; }
  const Eigen::VectorXd& lengthscales() const { return ell_; }
  double signal_variance() const { return sig2_; }
  double noise_variance() const { return noise_; }
  double output_mean() const { return ymean_; }
  double output_std() const { return ystd_; }
  int n_train() const { return int(X_.rows()); }

 private:
  void factorize(const Eigen::VectorXd& ell, double sig2);

  Eigen::MatrixXd X_;
  Eigen::VectorXd ys_;     // standardized targets
  Eigen::VectorXd alpha_;  // K^{-1} ys
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd ell_;
  double sig2_ = 1.0;
  double noise_ = 1e-8;
  double ymean_ = 0.0, ystd_ = 1.0;
  double lml_ = 0.0;
};

}  // namespace toughopt
