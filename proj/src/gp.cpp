#include "toughopt/gp.hpp"

#include <cmath>
#include <limits>

#include "toughopt/de.hpp"

namespace toughopt {

namespace {

Eigen::MatrixXd matern52(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                         const Eigen::VectorXd& ell, double sig2) {
  const double s5 = std::sqrt(5.0);
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
      double r2 = 0.0;
      for (Eigen::Index d = 0; d < A.cols(); ++d) {
        const double u = (A(i, d) - B(j, d)) / ell[d];
        r2 += u * u;
      }
      const double r = std::sqrt(r2);
      K(i, j) = sig2 * (1.0 + s5 * r + 5.0 * r2 / 3.0) * std::exp(-s5 * r);
    }
  }
  return K;
}

double lml_of(const Eigen::MatrixXd& X, const Eigen::VectorXd& ys, double noise,
              const Eigen::VectorXd& ell, double sig2) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K = matern52(X, X, ell, sig2);
  K.diagonal().array() += noise;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success)
    return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd alpha = llt.solve(ys);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    logdet += std::log(llt.matrixLLT()(i, i));
  return -0.5 * ys.dot(alpha) - logdet -
         0.5 * double(n) * std::log(2.0 * 3.14159265358979323846);
}

}  // namespace

void GaussianProcess::factorize(const Eigen::VectorXd& ell, double sig2) {
  ell_ = ell;
  sig2_ = sig2;
  Eigen::MatrixXd K = matern52(X_, X_, ell_, sig2_);
  K.diagonal().array() += noise_;
  llt_.compute(K);
  alpha_ = llt_.solve(ys_);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < X_.rows(); ++i)
    logdet += std::log(llt_.matrixLLT()(i, i));
  lml_ = -0.5 * ys_.dot(alpha_) - logdet -
         0.5 * double(X_.rows()) * std::log(2.0 * 3.14159265358979323846);
}

void GaussianProcess::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const GPOptions& opt, std::mt19937_64& rng) {
  X_ = X;
  const Eigen::Index n = y.size();
  ymean_ = n > 0 ? y.mean() : 0.0;
  ystd_ = n > 0 ? std::sqrt((y.array() - ymean_).square().sum() / double(n))
                : 1.0;
  if (!(ystd_ > 1e-12)) ystd_ = 1.0;  // degenerate data: prior-variance floor
  ys_ = (y.array() - ymean_) / ystd_;
  noise_ = opt.noise + opt.jitter;

  const Eigen::Index d = X.cols();
  if (n < 2) {
    factorize(Eigen::VectorXd::Ones(d), 1.0);
    return;
  }

  // Hyperparameters in log space: d lengthscales then the signal variance.
  Eigen::VectorXd lo(d + 1), hi(d + 1);
  lo.head(d).setConstant(std::log(opt.len_lo));
  hi.head(d).setConstant(std::log(opt.len_hi));
  lo[d] = std::log(opt.sig_lo);
  hi[d] = std::log(opt.sig_hi);

  auto objective = [&](const Eigen::VectorXd& th) {
    const Eigen::VectorXd ell = th.head(d).array().exp();
    return lml_of(X_, ys_, noise_, ell, std::exp(th[d]));
  };

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Eigen::VectorXd> pop;
  pop.reserve(size_t(opt.fit_pop));
  for (int i = 0; i < opt.fit_pop; ++i) {
    Eigen::VectorXd th(d + 1);
    for (Eigen::Index j = 0; j <= d; ++j)
      th[j] = lo[j] + u01(rng) * (hi[j] - lo[j]);
    pop.push_back(std::move(th));
  }
  DEOptions de;
  de.generations = opt.fit_generations;
  de.stall_generations = 20;
  const DEResult r = de_maximize(
      objective, [](const Eigen::VectorXd&) { return true; }, lo, hi,
      std::move(pop), de, rng);

  factorize(r.x.head(d).array().exp(), std::exp(r.x[d]));
}

void GaussianProcess::posterior(const Eigen::MatrixXd& Xq,
                                Eigen::VectorXd& mean,
                                Eigen::MatrixXd& cov) const {
  const Eigen::Index m = Xq.rows();
  if (X_.rows() == 0) {
    mean = Eigen::VectorXd::Constant(m, ymean_);
    cov = matern52(Xq, Xq, ell_.size() ? ell_
                                       : Eigen::VectorXd::Ones(Xq.cols()),
                   sig2_) *
          (ystd_ * ystd_);
    return;
  }
  const Eigen::MatrixXd Ks = matern52(X_, Xq, ell_, sig2_);
  mean = ymean_ + ystd_ * (Ks.transpose() * alpha_).array();
  const Eigen::MatrixXd V =
      llt_.matrixL().solve(Ks);  // L^{-1} Ks, (n x m)
  cov = (matern52(Xq, Xq, ell_, sig2_) - V.transpose() * V) * (ystd_ * ystd_);
}

}  // namespace toughopt
