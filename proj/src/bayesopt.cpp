#include "toughopt/bayesopt.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace toughopt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::mt19937_64 stream_of(std::uint64_t seed, std::uint64_t tag) {
  return std::mt19937_64(seed ^ (tag * 0x9E3779B97F4A7C15ull));
}

std::vector<Eigen::VectorXd> sample_feasible(int count, const BoBounds& box,
                                             const Feasibility& feasible,
                                             std::mt19937_64& rng,
                                             long long max_attempts) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(size_t(count));
  long long attempts = 0;
  const int d = box.dim();
  while (int(out.size()) < count && attempts < max_attempts) {
    Eigen::VectorXd x(d);
    for (int j = 0; j < d; ++j)
      x[j] = box.lo[j] + u01(rng) * (box.hi[j] - box.lo[j]);
    ++attempts;
    if (!feasible || feasible(x)) out.push_back(std::move(x));
  }
  if (int(out.size()) < count) {
    std::ostringstream os;
    os << "feasible sampling budget exhausted: " << out.size() << "/" << count
       << " found in " << attempts
       << " draws (feasible volume fraction ~= "
       << double(out.size()) / double(std::max<long long>(attempts, 1)) << ")";
    throw std::runtime_error(os.str());
  }
  return out;
}

double min_or_nan(const std::array<double, 4>& g) {
  double m = std::numeric_limits<double>::infinity();
  for (double v : g) {
    if (!std::isfinite(v)) return kNaN;
    m = std::min(m, v);
  }
  return m;
}

void refresh_best(CampaignRecord& rec) {
  rec.best = -1;
  for (size_t i = 0; i < rec.evals.size(); ++i) {
    if (!rec.evals[i].complete()) continue;
    if (rec.best < 0 || rec.evals[i].f > rec.evals[size_t(rec.best)].f)
      rec.best = int(i);
  }
}

}  // namespace

bool EvalRecord::complete() const {
  for (double v : g)
    if (!std::isfinite(v)) return false;
  return true;
}

double CampaignRecord::best_f() const {
  return best >= 0 ? evals[size_t(best)].f : kNaN;
}

Eigen::MatrixXd Surrogate::normalize(const std::vector<Eigen::VectorXd>& xs) const {
  const int d = norm.dim();
  Eigen::MatrixXd X(xs.size(), d);
  for (size_t i = 0; i < xs.size(); ++i)
    for (int j = 0; j < d; ++j)
      X(Eigen::Index(i), j) =
          (xs[i][j] - norm.lo[j]) / (norm.hi[j] - norm.lo[j]);
  return X;
}

Surrogate fit_surrogate(const std::vector<EvalRecord>& evals,
                        const BoBounds& norm_box, const GPOptions& opt,
                        std::mt19937_64& rng) {
  Surrogate s;
  s.norm = norm_box;
  const int d = norm_box.dim();
  for (int w = 0; w < 4; ++w) {
    std::vector<const EvalRecord*> rows;
    for (const auto& e : evals)
      if (std::isfinite(e.g[size_t(w)])) rows.push_back(&e);
    Eigen::MatrixXd X(rows.size(), d);
    Eigen::VectorXd y(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
      for (int j = 0; j < d; ++j)
        X(Eigen::Index(i), j) = (rows[i]->x[j] - norm_box.lo[j]) /
                                (norm_box.hi[j] - norm_box.lo[j]);
      y[Eigen::Index(i)] = rows[i]->g[size_t(w)];
    }
    s.gp[size_t(w)].fit(X, y, opt, rng);
  }
  return s;
}

double acquisition_qucb(const Surrogate& s, const Eigen::MatrixXd& Xq,
                        double beta, const Eigen::MatrixXd& draws) {
  const Eigen::Index q = Xq.rows();
  const Eigen::Index n_mc = draws.rows();
  Eigen::MatrixXd comp =
      Eigen::MatrixXd::Constant(n_mc, q, std::numeric_limits<double>::infinity());
  for (int w = 0; w < 4; ++w) {
    Eigen::VectorXd m;
    Eigen::MatrixXd C;
    s.gp[size_t(w)].posterior(Xq, m, C);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (C + C.transpose()));
    const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd A = es.eigenvectors() * lam.asDiagonal();
    // joint samples: rows of draws-block mapped through A, shifted by m
    const Eigen::MatrixXd Y =
        (draws.middleCols(w * q, q) * A.transpose()).rowwise() + m.transpose();
    comp = comp.cwiseMin(Y);
  }
  const Eigen::RowVectorXd mbar = comp.colwise().mean();
  const double cc = std::sqrt(beta * 3.14159265358979323846 / 2.0);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n_mc; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < q; ++j)
      best = std::max(best, mbar[j] + cc * std::abs(comp(i, j) - mbar[j]));
    acc += best;
  }
  return acc / double(n_mc);
}

std::vector<Eigen::VectorXd> propose_batch(const Surrogate& s,
                                           const BoBounds& trust,
                                           const Feasibility& feasible,
                                           const CampaignOptions& opt,
                                           std::mt19937_64& de_rng,
                                           std::mt19937_64& mc_rng) {
  const int d = trust.dim();
  const int q = opt.q;
  const int D = q * d;

  // Common random numbers for every acquisition evaluation of this proposal.
  Eigen::MatrixXd draws(opt.n_mc, 4 * q);
  {
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Eigen::Index i = 0; i < draws.rows(); ++i)
      for (Eigen::Index j = 0; j < draws.cols(); ++j) draws(i, j) = nd(mc_rng);
  }

  const int pop_size = opt.de_N * q * q * d;
  std::vector<Eigen::VectorXd> pop;
  pop.reserve(size_t(pop_size));
  {
    const long long budget =
        (long long)opt.feasible_budget_factor * pop_size * q;
    std::vector<Eigen::VectorXd> pool = sample_feasible(
        pop_size * q, trust, feasible, de_rng, budget);
    for (int i = 0; i < pop_size; ++i) {
      Eigen::VectorXd st(D);
      for (int j = 0; j < q; ++j)
        st.segment(j * d, d) = pool[size_t(i * q + j)];
      pop.push_back(std::move(st));
    }
  }

  Eigen::VectorXd lo(D), hi(D);
  for (int j = 0; j < q; ++j) {
    lo.segment(j * d, d) = trust.lo;
    hi.segment(j * d, d) = trust.hi;
  }

  Eigen::MatrixXd Xq(q, d);
  auto objective = [&](const Eigen::VectorXd& st) {
    for (int j = 0; j < q; ++j)
      for (int k = 0; k < d; ++k)
        Xq(j, k) = (st[j * d + k] - s.norm.lo[k]) / (s.norm.hi[k] - s.norm.lo[k]);
    return acquisition_qucb(s, Xq, opt.beta, draws);
  };
  auto stacked_feasible = [&](const Eigen::VectorXd& st) {
    if (!feasible) return true;
    for (int j = 0; j < q; ++j) {
      if (!feasible(st.segment(j * d, d))) return false;
    }
    return true;
  };

  const DEResult r =
      de_maximize(objective, stacked_feasible, lo, hi, std::move(pop), opt.de,
                  de_rng);
  std::vector<Eigen::VectorXd> batch;
  batch.reserve(size_t(q));
  for (int j = 0; j < q; ++j) batch.push_back(r.x.segment(j * d, d));
  return batch;
}

BoBounds update_trust_region(const BoBounds& global, const BoBounds& cur,
                             const Eigen::VectorXd& center, bool success,
                             double g_up, double g_down, double floor_frac) {
  const int d = global.dim();
  BoBounds out;
  out.lo.resize(d);
  out.hi.resize(d);
  const double gamma = success ? g_up : g_down;
  for (int j = 0; j < d; ++j) {
    const double gedge = global.hi[j] - global.lo[j];
    double edge = (cur.hi[j] - cur.lo[j]) * gamma;
    edge = std::min(edge, gedge);
    edge = std::max(edge, floor_frac * gedge);
    double lo = center[j] - 0.5 * edge;
    lo = std::max(lo, global.lo[j]);
    lo = std::min(lo, global.hi[j] - edge);
    out.lo[j] = lo;
    out.hi[j] = lo + edge;
  }
  return out;
}

// ---------------------------------------------------------------------------
// checkpointing
// ---------------------------------------------------------------------------

namespace {

void put_vec(std::ostream& os, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) os << " " << v[i];
}

// Failed evaluations are stored as "nan", which the stream extractor for
// double refuses; go through strtod, which accepts the full textual range.
double get_double(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) return std::numeric_limits<double>::quiet_NaN();
  try {
    return std::stod(tok);
  } catch (const std::exception&) {
    is.setstate(std::ios_base::failbit);
    return std::numeric_limits<double>::quiet_NaN();
  }
}

Eigen::VectorXd get_vec(std::istream& is, int d) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = get_double(is);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const CampaignRecord& rec,
                     std::uint64_t config_hash, const std::mt19937_64& rng_init,
                     const std::mt19937_64& rng_gp, const std::mt19937_64& rng_de,
                     const std::mt19937_64& rng_mc) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os << std::setprecision(17);
    const int d = rec.global.dim();
    os << "toughopt-checkpoint 1\n";
    os << "hash " << config_hash << "\n";
    os << "dim " << d << "\n";
    os << "iteration " << rec.iteration << "\n";
    os << "best " << rec.best << "\n";
    os << "global";
    put_vec(os, rec.global.lo);
    put_vec(os, rec.global.hi);
    os << "\n";
    os << "trust";
    put_vec(os, rec.trust.lo);
    put_vec(os, rec.trust.hi);
    os << "\n";
    os << "rng_init " << rng_init << "\n";
    os << "rng_gp " << rng_gp << "\n";
    os << "rng_de " << rng_de << "\n";
    os << "rng_mc " << rng_mc << "\n";
    os << "evals " << rec.evals.size() << "\n";
    for (const auto& e : rec.evals) {
      put_vec(os, e.x);
      for (double v : e.g) os << " " << v;
      os << "\n";
    }
    os << "convergence " << rec.convergence.size() << "\n";
    for (const auto& c : rec.convergence) os << c[0] << " " << c[1] << "\n";
    os << "end\n";
    if (!os) throw std::runtime_error("short write on checkpoint: " + path);
  }
  std::remove(path.c_str());
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot replace checkpoint: " + path);
}

CampaignRecord load_checkpoint(const std::string& path,
                               std::uint64_t expect_hash,
                               std::mt19937_64& rng_init, std::mt19937_64& rng_gp,
                               std::mt19937_64& rng_de, std::mt19937_64& rng_mc) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string tag;
  int version = 0;
  is >> tag >> version;
  if (tag != "toughopt-checkpoint" || version != 1)
    throw std::runtime_error("unrecognized checkpoint format: " + path);
  CampaignRecord rec;
  std::uint64_t hash = 0;
  int d = 0;
  auto expect = [&](const char* key) {
    is >> tag;
    if (tag != key)
      throw std::runtime_error(std::string("checkpoint missing field: ") + key);
  };
  expect("hash");
  is >> hash;
  if (hash != expect_hash)
    throw std::runtime_error(
        "checkpoint was written with a different configuration");
  expect("dim");
  is >> d;
  expect("iteration");
  is >> rec.iteration;
  expect("best");
  is >> rec.best;
  expect("global");
  rec.global.lo = get_vec(is, d);
  rec.global.hi = get_vec(is, d);
  expect("trust");
  rec.trust.lo = get_vec(is, d);
  rec.trust.hi = get_vec(is, d);
  expect("rng_init");
  is >> rng_init;
  expect("rng_gp");
  is >> rng_gp;
  expect("rng_de");
  is >> rng_de;
  expect("rng_mc");
  is >> rng_mc;
  expect("evals");
  size_t ne = 0;
  is >> ne;
  rec.evals.resize(ne);
  for (auto& e : rec.evals) {
    e.x = get_vec(is, d);
    for (double& v : e.g) v = get_double(is);
    e.f = min_or_nan(e.g);
  }
  expect("convergence");
  size_t nc = 0;
  is >> nc;
  rec.convergence.resize(nc);
  for (auto& c : rec.convergence) {
    c[0] = get_double(is);
    c[1] = get_double(is);
  }
  expect("end");
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  return rec;
}

// ---------------------------------------------------------------------------
// campaign
// ---------------------------------------------------------------------------

CampaignRecord run_campaign(const BatchEvaluator& evaluate,
                            const BoBounds& bounds, const Feasibility& feasible,
                            const CampaignOptions& opt,
                            const std::string& resume_from) {
  if (bounds.lo.size() != bounds.hi.size() || bounds.dim() == 0)
    throw std::invalid_argument("campaign bounds are malformed");
  if (opt.q < 1 || opt.n_init < 1)
    throw std::invalid_argument("campaign needs q >= 1 and n_init >= 1");

  std::mt19937_64 rng_init = stream_of(opt.seed, 1);
  std::mt19937_64 rng_gp = stream_of(opt.seed, 2);
  std::mt19937_64 rng_de = stream_of(opt.seed, 3);
  std::mt19937_64 rng_mc = stream_of(opt.seed, 4);

  CampaignRecord rec;
  auto append_evals = [&](const std::vector<Eigen::VectorXd>& xs,
                          const std::vector<std::array<double, 4>>& gs) {
    for (size_t i = 0; i < xs.size(); ++i) {
      EvalRecord e;
      e.x = xs[i];
      e.g = gs[i];
      e.f = min_or_nan(e.g);
      rec.evals.push_back(std::move(e));
    }
    refresh_best(rec);
  };
  auto checkpoint = [&]() {
    if (!opt.checkpoint_path.empty())
      save_checkpoint(opt.checkpoint_path, rec, opt.config_hash, rng_init,
                      rng_gp, rng_de, rng_mc);
  };

  if (!resume_from.empty()) {
    rec = load_checkpoint(resume_from, opt.config_hash, rng_init, rng_gp,
                          rng_de, rng_mc);
  } else {
    rec.global = bounds;
    rec.trust = bounds;
    const std::vector<Eigen::VectorXd> xs = sample_feasible(
        opt.n_init, bounds, feasible, rng_init,
        (long long)opt.feasible_budget_factor * opt.n_init);
    const auto gs = evaluate(xs);
    if (gs.size() != xs.size())
      throw std::runtime_error("evaluator returned a short batch");
    append_evals(xs, gs);
    rec.convergence.push_back({double(rec.evals.size()), rec.best_f()});
    checkpoint();
  }

  while (rec.iteration < opt.iterations) {
    const Surrogate s = fit_surrogate(rec.evals, rec.trust, opt.gp, rng_gp);
    const std::vector<Eigen::VectorXd> batch =
        propose_batch(s, rec.trust, feasible, opt, rng_de, rng_mc);
    const auto gs = evaluate(batch);
    if (gs.size() != batch.size())
      throw std::runtime_error("evaluator returned a short batch");

    const double prev = rec.best_f();
    append_evals(batch, gs);
    const double now = rec.best_f();
    const bool success =
        std::isfinite(now) &&
        (!std::isfinite(prev) || now > prev + 1e-12 * (1.0 + std::abs(prev)));
    const Eigen::VectorXd center =
        rec.best >= 0 ? rec.evals[size_t(rec.best)].x
                      : Eigen::VectorXd(0.5 * (rec.trust.lo + rec.trust.hi));
    rec.trust = update_trust_region(rec.global, rec.trust, center, success,
                                    opt.tr_up, opt.tr_down, opt.tr_floor);
    ++rec.iteration;
    rec.convergence.push_back({double(rec.evals.size()), rec.best_f()});
    checkpoint();
  }
  return rec;
}

}  // namespace toughopt
