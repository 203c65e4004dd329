#ifndef MLELAB_SIMHARNESS_HPP
#define MLELAB_SIMHARNESS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mlelab/distributions.hpp"
#include "mlelab/errors.hpp"
#include "mlelab/estimators.hpp"
#include "mlelab/linear_model.hpp"
#include "mlelab/random.hpp"

namespace mlelab {

enum class DesignKind { gaussian, skewed_1d, heavy_norm };

struct DesignSpec {
  DesignKind kind = DesignKind::gaussian;
  std::size_t n = 100;
  std::size_t d = 1;
  double eps = 0.25;        // skewed_1d exponent
  double fraction = 0.05;   // heavy_norm: share of rows scaled up
  double magnitude = 10.0;  // heavy_norm: row scale factor
  double r_cap = 1e9;
  double margin = 0.5;  // gamma
  double radius = 10.0;  // w
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1 || d < 1 || n < d) throw std::invalid_argument("DesignSpec: need n >= d >= 1");
    if (kind == DesignKind::skewed_1d && d != 1)
      throw std::invalid_argument("DesignSpec: skewed_1d requires d = 1");
    if (!(r_cap > 0.0) || !(margin > 0.0) || !(radius > 0.0))
      throw std::invalid_argument("DesignSpec: r_cap, margin, radius must be positive");
  }

  ParamSpace space() const { return ParamSpace(radius, margin); }
};

/// Synthetic fixed design. Gaussian rows are shifted by +c*1 with
/// c = 2 margin sqrt(d) / ||theta*|| so the margin constraints are
/// achievable, capped at r_cap, and resampled per row (at most 100 tries)
/// until <theta*, x_i> >= margin.
inline FixedDesign generate(const DesignSpec& spec, const ParamVector& theta_star) {
  spec.validate();
  if (theta_star.size() != spec.d) throw std::invalid_argument("generate: theta* dimension");

  Matrix x(spec.n, spec.d);

  if (spec.kind == DesignKind::skewed_1d) {
    const std::size_t n_large = static_cast<std::size_t>(std::floor(std::sqrt(spec.n)));
    const double large = std::min(std::sqrt(static_cast<double>(spec.n)), spec.r_cap);
    const double small =
        std::min(std::pow(static_cast<double>(spec.n), spec.eps), spec.r_cap);
    for (std::size_t i = 0; i < spec.n; ++i) x(i, 0) = i < n_large ? large : small;
    for (std::size_t i = 0; i < spec.n; ++i) {
      if (theta_star[0] * x(i, 0) < spec.margin)
        throw SolverError("design generation failed: theta* infeasible on skewed_1d row " +
                          std::to_string(i));
    }
    return FixedDesign(std::move(x));
  }

  const double norm_star = std::max(norm2(theta_star), 1e-12);
  const double shift = 2.0 * spec.margin * std::sqrt(static_cast<double>(spec.d)) / norm_star;
  const std::size_t n_heavy =
      spec.kind == DesignKind::heavy_norm
          ? static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(spec.n)))
          : 0;

  RandomStream design_rng(spec.seed);
  for (std::size_t i = 0; i < spec.n; ++i) {
    RandomStream row_rng = design_rng.split(i);
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      Vec row(spec.d);
      for (std::size_t j = 0; j < spec.d; ++j) row[j] = row_rng.normal() + shift;
      const double scale = i < n_heavy ? spec.magnitude : 1.0;
      for (double& v : row) v *= scale;
      const double nr = norm2(row);
      if (nr > spec.r_cap)
        for (double& v : row) v *= spec.r_cap / nr;
      if (dot(theta_star, row) >= spec.margin) {
        for (std::size_t j = 0; j < spec.d; ++j) x(i, j) = row[j];
        ok = true;
      }
    }
    if (!ok)
      throw SolverError("design generation failed: margin infeasible after 100 attempts (row " +
                        std::to_string(i) + ")");
  }
  return FixedDesign(std::move(x));
}

enum class ModelKind { poisson, pareto, znbp, noiseless };

/// Conditional response model y_i ~ p(. | x_i).
struct ResponseModel {
  ModelKind kind = ModelKind::poisson;
  ParamVector theta_star;
  double pareto_b = 4.5;
  std::optional<LinkLayer> layer;  // znbp truth
  double alpha = 4.0;

  static ResponseModel poisson(ParamVector theta) {
    ResponseModel m;
    m.kind = ModelKind::poisson;
    m.theta_star = std::move(theta);
    return m;
  }
  static ResponseModel pareto(ParamVector theta, double b) {
    ResponseModel m;
    m.kind = ModelKind::pareto;
    m.theta_star = std::move(theta);
    m.pareto_b = b;
    return m;
  }
  static ResponseModel znbp(LinkLayer truth) {
    ResponseModel m;
    m.kind = ModelKind::znbp;
    m.alpha = truth.pareto_tail;
    m.layer = std::move(truth);
    return m;
  }
  static ResponseModel noiseless(ParamVector theta) {
    ResponseModel m;
    m.kind = ModelKind::noiseless;
    m.theta_star = std::move(theta);
    return m;
  }
};

inline Vec respond(const ResponseModel& model, const FixedDesign& design, RandomStream& rng) {
  Vec y(design.n());
  switch (model.kind) {
    case ModelKind::poisson:
      for (std::size_t i = 0; i < design.n(); ++i)
        y[i] = rng.poisson(design.inner(model.theta_star, i));
      break;
    case ModelKind::pareto: {
      const double c = (model.pareto_b - 1.0) / model.pareto_b;
      for (std::size_t i = 0; i < design.n(); ++i) {
        const ParetoDist p(c * design.inner(model.theta_star, i), model.pareto_b);
        y[i] = p.sample(rng);
      }
      break;
    }
    case ModelKind::znbp: {
      if (!model.layer) throw std::invalid_argument("respond: znbp model needs a layer");
      for (std::size_t i = 0; i < design.n(); ++i) {
        Vec xi(design.dim());
        for (std::size_t j = 0; j < design.dim(); ++j) xi[j] = design.row(i)[j];
        y[i] = predict_mixture(*model.layer, xi).sample(rng);
      }
      break;
    }
    case ModelKind::noiseless:
      for (std::size_t i = 0; i < design.n(); ++i) y[i] = design.inner(model.theta_star, i);
      break;
  }
  return y;
}

struct BoundTerms {
  double b_ls = 0.0;   // sum |x|^3 / sum x^2
  double b_mle = 0.0;  // sum x^2 / sum |x|
  double ratio = 0.0;  // b_ls / b_mle, >= 1 by Cauchy-Schwarz
};

/// The 1-D risk-bound covariate terms for least squares vs the MLE.
inline BoundTerms bound_terms_1d(const Vec& x) {
  double s1 = 0.0, s2 = 0.0, s3 = 0.0;
  for (double v : x) {
    const double a = std::fabs(v);
    s1 += a;
    s2 += a * a;
    s3 += a * a * a;
  }
  if (s2 == 0.0) throw std::invalid_argument("bound_terms_1d: zero vector");
  BoundTerms out;
  out.b_ls = s3 / s2;
  out.b_mle = s2 / s1;
  out.ratio = out.b_ls / out.b_mle;
  return out;
}

struct TrialConfig {
  DesignSpec design;
  ResponseModel model;
  std::vector<std::string> estimators;
  std::size_t trials = 100;
  double delta = 0.05;  // median-of-means confidence parameter
  std::uint64_t seed = 0;
  OptConfig opt;
  double tmo_huber_delta = 1.0;
  double tmo_pinball_q = 0.5;
};

struct EstimatorRisk {
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  std::size_t failures = 0;
};

struct RiskTable {
  std::vector<EstimatorRisk> rows;
  std::size_t trials = 0;
};

namespace detail {

inline double nearest_rank(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t rank =
      static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  rank = std::max<std::size_t>(1, std::min(rank, sorted.size()));
  return sorted[rank - 1];
}

inline ParamVector run_one_estimator(const std::string& name, const FixedDesign& design,
                                     const Vec& y, const ParamSpace& space,
                                     const TrialConfig& cfg, std::uint64_t mom_seed) {
  if (name == "ls") return fit_least_squares(design, y, space, cfg.opt).theta();
  if (name == "poisson-mle") return fit_poisson_mle(design, y, space, cfg.opt).theta();
  if (name == "pareto-mle")
    return fit_pareto_mle(design, y, cfg.model.pareto_b, space, cfg.opt).theta();
  if (name == "mom") return fit_median_of_means(design, y, cfg.delta, mom_seed);
  if (name == "tmo-mae")
    return fit_tmo(design, y, {TmoLoss::mae}, space, cfg.opt).theta();
  if (name == "tmo-mape")
    return fit_tmo(design, y, {TmoLoss::mape}, space, cfg.opt).theta();
  if (name == "tmo-huber")
    return fit_tmo(design, y, {TmoLoss::huber, cfg.tmo_huber_delta}, space, cfg.opt).theta();
  if (name == "tmo-pinball")
    return fit_tmo(design, y, {TmoLoss::pinball, cfg.tmo_pinball_q}, space, cfg.opt).theta();
  throw ParseError("unknown estimator '" + name + "'");
}

}  // namespace detail

/// Monte-Carlo excess-risk table over a fixed design: one design draw, then
/// per-trial responses with pre-split seeds. Trials are independent units
/// and may run on any number of workers; per-trial results are keyed by
/// trial index so aggregation is order-insensitive. Estimator failures are
/// recorded in a failure column rather than aborting the run.
inline RiskTable run_trials(const TrialConfig& cfg, unsigned threads = 0) {
  if (cfg.trials < 1) throw std::invalid_argument("run_trials: need at least one trial");
  if (cfg.model.kind == ModelKind::znbp)
    throw std::invalid_argument("run_trials: excess risk is undefined for the znbp model");
  if (cfg.estimators.empty()) throw std::invalid_argument("run_trials: no estimators");

  const FixedDesign design = generate(cfg.design, cfg.model.theta_star);
  const ParamSpace space = cfg.design.space();
  const Matrix& sigma = design.covariance();
  const std::size_t n_est = cfg.estimators.size();

  // risks[e][t] = excess risk, NaN = failure.
  std::vector<std::vector<double>> risks(n_est,
                                         std::vector<double>(cfg.trials, neg_inf()));

  auto run_trial = [&](std::size_t t) {
    const std::uint64_t trial_seed = split_seed(cfg.seed, t);
    RandomStream rng(split_seed(trial_seed, 0));
    const Vec y = respond(cfg.model, design, rng);
    for (std::size_t e = 0; e < n_est; ++e) {
      try {
        const ParamVector theta = detail::run_one_estimator(
            cfg.estimators[e], design, y, space, cfg, split_seed(trial_seed, 1));
        risks[e][t] = excess_risk(theta, cfg.model.theta_star, sigma);
      } catch (const std::exception&) {
        risks[e][t] = std::numeric_limits<double>::quiet_NaN();
      }
    }
  };

  unsigned n_workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  n_workers = std::min<unsigned>(n_workers, cfg.trials);
  if (n_workers <= 1) {
    for (std::size_t t = 0; t < cfg.trials; ++t) run_trial(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (unsigned w = 0; w < n_workers; ++w) {
      pool.emplace_back([&]() {
        for (;;) {
          const std::size_t t = next.fetch_add(1);
          if (t >= cfg.trials) return;
          run_trial(t);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  RiskTable table;
  table.trials = cfg.trials;
  for (std::size_t e = 0; e < n_est; ++e) {
    EstimatorRisk row;
    row.name = cfg.estimators[e];
    std::vector<double> ok;
    ok.reserve(cfg.trials);
    for (double r : risks[e]) {
      if (std::isnan(r)) {
        ++row.failures;
      } else {
        ok.push_back(r);
      }
    }
    std::sort(ok.begin(), ok.end());
    double sum = 0.0;
    for (double r : ok) sum += r;
    row.mean = ok.empty() ? std::numeric_limits<double>::quiet_NaN()
                          : sum / static_cast<double>(ok.size());
    row.median = detail::nearest_rank(ok, 0.5);
    row.p90 = detail::nearest_rank(ok, 0.9);
    row.p99 = detail::nearest_rank(ok, 0.99);
    table.rows.push_back(std::move(row));
  }
  return table;
}

struct AssumptionReport {
  double lambda_min_sigma = 0.0;
  double lambda_max_sigma = 0.0;
  double max_row_norm = 0.0;  // R
  double chi = 0.0;           // condition number of M
  double zeta = 0.0;          // condition number of Sigma
  double hypercontractivity_ratio = 0.0;
  double min_margin = 0.0;  // min_i <theta*, x_i>
  long first_margin_violation = -1;
  bool margin_ok = false;       // A1 margin part
  bool norm_lb_ok = false;      // A1 ||theta*||^2 >= gamma (reported, not enforced)
  bool a2_ok = false;           // lambda_min > 0 and rows bounded
  double a3_lhs1 = 0.0, a3_rhs1 = 0.0;  // lambda_min(M) vs R^2/(4 n gamma^2) (d log 24chi + log 1/delta)
  double a3_lhs2 = 0.0, a3_rhs2 = 0.0;  // sqrt(lambda_max(M)(...)) vs sqrt(n) lambda_min(M)/16
  bool a3_ok1 = false;
  bool a3_ok2 = false;
};

/// Numerical diagnostics for the design/parameter assumptions: spectrum of
/// Sigma, spectrum and conditioning of M = (sum_i mu_i u_i u_i^T)/n, margin
/// checks, and an empirical hyper-contractivity ratio probed over the
/// eigenbasis plus seeded random directions.
inline AssumptionReport check_assumptions(const FixedDesign& design,
                                          const ParamVector& theta_star,
                                          const ParamSpace& space, double delta = 0.05,
                                          std::uint64_t seed = 0) {
  if (theta_star.size() != design.dim())
    throw std::invalid_argument("check_assumptions: dimension mismatch");
  AssumptionReport rep;
  const std::size_t n = design.n();
  const std::size_t d = design.dim();

  const SymmetricEigen sig_eig = symmetric_eigen(design.covariance());
  rep.lambda_min_sigma = sig_eig.values.front();
  rep.lambda_max_sigma = sig_eig.values.back();
  rep.max_row_norm = design.max_row_norm();
  rep.zeta = rep.lambda_min_sigma > 0.0 ? rep.lambda_max_sigma / rep.lambda_min_sigma
                                        : pos_inf();

  Matrix m(d, d);
  rep.min_margin = pos_inf();
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = design.row(i);
    const double mu = design.inner(theta_star, i);
    if (mu < rep.min_margin) rep.min_margin = mu;
    if (mu < space.margin && rep.first_margin_violation < 0)
      rep.first_margin_violation = static_cast<long>(i);
    double nr = 0.0;
    for (std::size_t j = 0; j < d; ++j) nr += xi[j] * xi[j];
    nr = std::sqrt(nr);
    if (nr == 0.0) continue;
    const double coef = mu / (nr * nr * static_cast<double>(n));
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t s = 0; s < d; ++s) m(r, s) += coef * xi[r] * xi[s];
  }
  const SymmetricEigen m_eig = symmetric_eigen(m);
  const double m_min = m_eig.values.front();
  const double m_max = m_eig.values.back();
  rep.chi = m_min > 0.0 ? m_max / m_min : pos_inf();

  rep.margin_ok = rep.first_margin_violation < 0;
  rep.norm_lb_ok = dot(theta_star, theta_star) >= space.margin;
  rep.a2_ok = rep.lambda_min_sigma > 0.0;

  const double log_term =
      static_cast<double>(d) * std::log(24.0 * std::max(rep.chi, 1.0)) + std::log(1.0 / delta);
  const double r = rep.max_row_norm;
  const double gamma = space.margin;
  rep.a3_lhs1 = m_min;
  rep.a3_rhs1 = r * r / (4.0 * static_cast<double>(n) * gamma * gamma) * log_term;
  rep.a3_ok1 = rep.a3_lhs1 >= rep.a3_rhs1;
  rep.a3_lhs2 = std::sqrt(std::max(m_max, 0.0) * log_term);
  rep.a3_rhs2 = std::sqrt(static_cast<double>(n)) * m_min / 16.0;
  rep.a3_ok2 = rep.a3_lhs2 <= rep.a3_rhs2;

  // Hyper-contractivity of the whitened design, probed over the eigenbasis
  // and 100 seeded random unit directions.
  if (rep.lambda_min_sigma > 1e-12) {
    const Matrix root_inv =
        eigen_apply(sig_eig, [](double l) { return 1.0 / std::sqrt(l); });
    std::vector<Vec> whitened(n, Vec(d, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = design.row(i);
      for (std::size_t rr = 0; rr < d; ++rr) {
        double s = 0.0;
        for (std::size_t cc = 0; cc < d; ++cc) s += root_inv(rr, cc) * xi[cc];
        whitened[i][rr] = s;
      }
    }
    std::vector<Vec> dirs;
    for (std::size_t k = 0; k < d; ++k) {
      Vec u(d);
      for (std::size_t i = 0; i < d; ++i) u[i] = sig_eig.vectors(i, k);
      dirs.push_back(std::move(u));
    }
    RandomStream rng(seed);
    for (int k = 0; k < 100; ++k) {
      Vec u(d);
      for (std::size_t i = 0; i < d; ++i) u[i] = rng.normal();
      const double nu = norm2(u);
      if (nu == 0.0) continue;
      for (double& v : u) v /= nu;
      dirs.push_back(std::move(u));
    }
    double worst = 1.0;
    for (const Vec& u : dirs) {
      double m2 = 0.0, m4 = 0.0;
      for (const Vec& z : whitened) {
        const double p = dot(z, u);
        m2 += p * p;
        m4 += p * p * p * p;
      }
      m2 /= static_cast<double>(n);
      m4 /= static_cast<double>(n);
      if (m2 > 0.0) worst = std::max(worst, m4 / (m2 * m2));
    }
    rep.hypercontractivity_ratio = worst;
  } else {
    rep.hypercontractivity_ratio = pos_inf();
  }

  return rep;
}

}  // namespace mlelab

#endif  // MLELAB_SIMHARNESS_HPP
