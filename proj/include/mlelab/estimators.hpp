#ifndef MLELAB_ESTIMATORS_HPP
#define MLELAB_ESTIMATORS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mlelab/errors.hpp"
#include "mlelab/geometric_median.hpp"
#include "mlelab/linear_model.hpp"
#include "mlelab/metrics.hpp"
#include "mlelab/random.hpp"

namespace mlelab {

struct OptConfig {
  std::size_t max_iters = 100000;
  double grad_tol = 1e-8;
  double step_init = 1.0;
  std::uint64_t seed = 0;
  bool allow_closed_form = true;  // d = 1 Poisson fast path
};

struct FitReport {
  std::variant<ParamVector, LinkLayer> estimate;
  double final_objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;

  const ParamVector& theta() const { return std::get<ParamVector>(estimate); }
  const LinkLayer& layer() const { return std::get<LinkLayer>(estimate); }
};

namespace detail {

/// Projected-gradient mapping norm; zero exactly at constrained stationary
/// points. Evaluated at step min(1, max_disp/|g|): the mapping norm is
/// non-increasing in the step, so this upper-bounds the unit-step norm
/// while keeping the projected point near the feasible set.
inline double grad_mapping_norm(const Vec& theta, const Vec& grad, const ParamSpace& space,
                                const FixedDesign& design) {
  const double gn = norm2(grad);
  const double s = std::min(1.0, 4.0 * space.radius / std::max(gn, 1.0));
  return norm2(theta - project(theta - s * grad, space, design)) / s;
}

struct PgdResult {
  Vec theta;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;
};

/// Monotone projected gradient descent with Armijo backtracking (halving).
/// The stationarity certificate is the projected-gradient mapping
/// ||theta - P(theta - s g)|| / s at the accepted step; the mapping norm is
/// nondecreasing as s shrinks, so a pass at s <= 1 implies the unit-step
/// certificate (an explicit unit-step check covers s > 1). Objective may
/// return +inf to reject a trial point.
inline PgdResult projected_gradient_descent(
    const std::function<double(const Vec&)>& objective,
    const std::function<Vec(const Vec&)>& gradient, Vec theta, const ParamSpace& space,
    const FixedDesign& design, const OptConfig& cfg) {
  PgdResult res;
  double f = objective(theta);
  double step = cfg.step_init;
  double map_norm = pos_inf();
  std::size_t plateau = 0;
  std::size_t plateau_checks = 0;
  // Displacements beyond the feasible set's diameter are pointless and push
  // the projection into a numerically hostile far-field regime.
  const double max_disp = 4.0 * space.radius;

  std::size_t it = 0;
  for (; it < cfg.max_iters; ++it) {
    const Vec g = gradient(theta);
    const double gn = norm2(g);
    bool accepted = false;
    Vec trial;
    double ftrial = f;
    double s_eff = step;
    int halvings = 0;
    while (step > 1e-18 && halvings++ < 30) {
      s_eff = gn > 0.0 ? std::min(step, max_disp / gn) : step;
      trial = project(theta - s_eff * g, space, design);
      ftrial = objective(trial);
      const Vec diff = trial - theta;
      const double dn2 = dot(diff, diff);
      map_norm = std::sqrt(dn2) / s_eff;
      if (std::isfinite(ftrial) &&
          ftrial <= f + dot(g, diff) + 0.5 / s_eff * dn2 + 1e-14 * std::fabs(f)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    if (map_norm <= cfg.grad_tol) {
      // Confirm with the clamped-step mapping: the line-search step can be
      // small enough that theta - s g rounds back to theta.
      const double confirm = grad_mapping_norm(theta, g, space, design);
      if (confirm <= cfg.grad_tol) {
        res.converged = true;
        res.grad_norm = confirm;
        res.iterations = it;
        res.theta = std::move(theta);
        res.objective = f;
        return res;
      }
      map_norm = confirm;
    }

    const double fprev = f;
    theta = std::move(trial);
    f = ftrial;
    if (std::fabs(fprev - f) <= 1e-13 * std::max(1.0, std::fabs(f))) {
      if (++plateau >= 30) {
        // Objective changes are at the numerical floor; decide convergence
        // by the mapping itself.
        plateau = 0;
        ++plateau_checks;
        const Vec g2 = gradient(theta);
        map_norm = grad_mapping_norm(theta, g2, space, design);
        if (map_norm <= cfg.grad_tol) {
          res.converged = true;
          res.grad_norm = map_norm;
          res.iterations = it;
          res.theta = std::move(theta);
          res.objective = f;
          return res;
        }
        if (plateau_checks >= 5) break;
      }
    } else {
      plateau = 0;
    }
    step = std::min(step * 2.0, 1e6 * cfg.step_init);
  }

  res.converged = false;
  res.grad_norm = map_norm;
  res.iterations = it;
  res.theta = std::move(theta);
  res.objective = f;
  return res;
}

/// Damped (projected) Newton refinement used when first-order descent has
/// stalled above the certificate tolerance: smooth convex objectives with a
/// cheap d x d Hessian reach it in a handful of steps. Leaves theta
/// untouched if the Hessian degenerates.
inline PgdResult newton_polish(const std::function<double(const Vec&)>& objective,
                               const std::function<Vec(const Vec&)>& gradient,
                               const std::function<Matrix(const Vec&)>& hessian, Vec theta,
                               const ParamSpace& space, const FixedDesign& design,
                               const OptConfig& cfg) {
  PgdResult res;
  double f = objective(theta);
  Vec g = gradient(theta);
  double map_norm = grad_mapping_norm(theta, g, space, design);
  std::size_t it = 0;
  for (; it < 40; ++it) {
    if (map_norm <= cfg.grad_tol) {
      res.converged = true;
      break;
    }
    Vec dir;
    try {
      Vec neg(g.size());
      for (std::size_t j = 0; j < g.size(); ++j) neg[j] = -g[j];
      dir = spd_solve(hessian(theta), neg, 0.0);
    } catch (const std::invalid_argument&) {
      break;
    }
    double s = 1.0;
    bool accepted = false;
    for (int halvings = 0; halvings < 20; ++halvings, s *= 0.5) {
      const Vec trial = project(theta + s * dir, space, design);
      const double ftrial = objective(trial);
      if (std::isfinite(ftrial) && ftrial <= f + 1e-12 * std::max(1.0, std::fabs(f))) {
        // Near the optimum the objective sits at the noise floor; accept on
        // mapping decrease instead.
        const Vec gtrial = gradient(trial);
        const double map_trial = grad_mapping_norm(trial, gtrial, space, design);
        // Real Newton progress shrinks the mapping superlinearly; weak
        // decreases mean a constraint-active optimum, which the dedicated
        // finishers handle.
        if (map_trial < 0.7 * map_norm) {
          theta = trial;
          f = std::min(f, ftrial);
          g = gtrial;
          map_norm = map_trial;
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) break;
  }
  res.theta = std::move(theta);
  res.objective = f;
  res.iterations = it;
  res.grad_norm = map_norm;
  return res;
}

struct SmoothProblem {
  std::function<double(const Vec&)> objective;
  std::function<Vec(const Vec&)> gradient;
  std::function<Matrix(const Vec&)> hessian;
};

/// Finishing solver for margin- or ball-active optima: a log-barrier on the
/// parameter-space constraints with Newton inner solves, scheduled until the
/// true projected-gradient mapping meets the certificate. Starts from a
/// slightly scaled-up copy of theta (scaling the predictor up enlarges every
/// margin slack) and gives up gracefully when no strictly interior start
/// exists.
inline bool barrier_finish(const SmoothProblem& prob, Vec& theta, const ParamSpace& space,
                           const FixedDesign& design, const OptConfig& cfg, double& final_map,
                           std::size_t& iters) {
  const std::size_t d = design.dim();
  const std::size_t n = design.n();
  const double gamma = space.margin;
  const double w = space.radius;

  {
    const double nt = norm2(theta);
    const double s = std::min(1.01, 0.999 * w / std::max(nt, 1e-300));
    if (s > 1.0)
      for (auto& v : theta) v *= s;
  }
  auto ball_slack = [&](const Vec& th) { return w * w - dot(th, th); };
  auto min_margin_slack = [&](const Vec& th) {
    double m = pos_inf();
    for (std::size_t i = 0; i < n; ++i) m = std::min(m, design.inner(th, i) - gamma);
    return m;
  };
  if (!(min_margin_slack(theta) > 0.0) || !(ball_slack(theta) > 0.0)) return false;

  auto value = [&](const Vec& th, double t) {
    const double c0 = ball_slack(th);
    if (c0 <= 0.0) return pos_inf();
    const double f = prob.objective(th);
    if (!std::isfinite(f)) return pos_inf();
    double bar = -std::log(c0);
    for (std::size_t i = 0; i < n; ++i) {
      const double c = design.inner(th, i) - gamma;
      if (c <= 0.0) return pos_inf();
      bar -= std::log(c);
    }
    return f + bar / t;
  };

  auto barrier_grad = [&](const Vec& th, double t) {
    Vec g = prob.gradient(th);
    const double c0 = ball_slack(th);
    for (std::size_t r = 0; r < d; ++r) g[r] += 2.0 * th[r] / (t * c0);
    for (std::size_t i = 0; i < n; ++i) {
      const double ci = design.inner(th, i) - gamma;
      const double* xi = design.row(i);
      const double gc = -1.0 / (t * ci);
      for (std::size_t r = 0; r < d; ++r) g[r] += gc * xi[r];
    }
    return g;
  };

  for (double t = 1e2; t <= 1e10; t *= 100.0) {
    double fcur = value(theta, t);
    if (!std::isfinite(fcur)) return false;
    Vec g = barrier_grad(theta, t);
    for (int inner = 0; inner < 40; ++inner) {
      ++iters;
      Matrix h = prob.hessian(theta);
      const double c0 = ball_slack(theta);
      for (std::size_t r = 0; r < d; ++r) {
        h(r, r) += 2.0 / (t * c0);
        for (std::size_t c = 0; c < d; ++c)
          h(r, c) += 4.0 * theta[r] * theta[c] / (t * c0 * c0);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double ci = design.inner(theta, i) - gamma;
        const double* xi = design.row(i);
        const double hc = 1.0 / (t * ci * ci);
        for (std::size_t r = 0; r < d; ++r)
          for (std::size_t c = 0; c < d; ++c) h(r, c) += hc * xi[r] * xi[c];
      }
      Vec dir;
      try {
        Vec neg(d);
        for (std::size_t j = 0; j < d; ++j) neg[j] = -g[j];
        dir = spd_solve(h, neg, 0.0);
      } catch (const std::invalid_argument&) {
        return false;
      }
      const double dec2 = -dot(g, dir);
      if (!(dec2 > 0.0)) break;
      const double gnorm = norm2(g);
      double s = 1.0;
      bool accepted = false;
      for (int halvings = 0; halvings < 24 && !accepted; ++halvings, s *= 0.5) {
        Vec trial = theta + s * dir;
        const double ftrial = value(trial, t);
        // Near a stage optimum the objective sits at its floating-point
        // floor; fall back to accepting on barrier-gradient decrease.
        if (std::isfinite(ftrial)) {
          if (ftrial < fcur) {
            theta = std::move(trial);
            fcur = ftrial;
            g = barrier_grad(theta, t);
            accepted = true;
            continue;
          }
          if (ftrial <= fcur + 1e-12 * (1.0 + std::fabs(fcur))) {
            Vec gtrial = barrier_grad(trial, t);
            if (norm2(gtrial) < 0.9 * gnorm) {
              theta = std::move(trial);
              fcur = std::min(fcur, ftrial);
              g = std::move(gtrial);
              accepted = true;
            }
          }
        }
      }
      if (!accepted) break;
    }
    const Vec g_true = prob.gradient(theta);
    final_map = grad_mapping_norm(theta, g_true, space, design);
    if (final_map <= cfg.grad_tol) return true;
  }
  return false;
}

/// Equality-constrained Newton rounds on the detected active face. By the
/// time this runs the near-active rows are separated from the rest by many
/// orders of magnitude, so the face is unambiguous; a wrong guess simply
/// fails the mapping test and reports non-convergence.
inline bool kkt_polish(const SmoothProblem& prob, Vec& theta, const ParamSpace& space,
                       const FixedDesign& design, const OptConfig& cfg, double& final_map,
                       std::size_t& iters) {
  const std::size_t d = design.dim();
  for (int round = 0; round < 20; ++round) {
    ++iters;
    const Vec g = prob.gradient(theta);
    final_map = grad_mapping_norm(theta, g, space, design);
    if (final_map <= cfg.grad_tol) return true;

    std::vector<std::pair<double, std::size_t>> slacks;
    for (std::size_t i = 0; i < design.n(); ++i) {
      const double c = design.inner(theta, i) - space.margin;
      if (c <= 1e-4 * std::max(1.0, space.margin)) slacks.emplace_back(c, i);
    }
    std::sort(slacks.begin(), slacks.end());
    std::vector<std::size_t> act;
    for (std::size_t k = 0; k < slacks.size() && k < d; ++k) act.push_back(slacks[k].second);
    const double nt = norm2(theta);
    const bool ball_active = space.radius - nt <= 1e-7 * space.radius;

    const std::size_t m = act.size() + (ball_active ? 1 : 0);
    const std::size_t dim = d + m;
    Matrix kkt(dim, dim);
    const Matrix h = prob.hessian(theta);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c) kkt(r, c) = h(r, c);
    Vec rhs(dim, 0.0);
    for (std::size_t j = 0; j < d; ++j) rhs[j] = -g[j];
    for (std::size_t j = 0; j < act.size(); ++j) {
      const double* xi = design.row(act[j]);
      for (std::size_t c = 0; c < d; ++c) {
        kkt(d + j, c) = xi[c];
        kkt(c, d + j) = xi[c];
      }
      rhs[d + j] = space.margin - design.inner(theta, act[j]);
    }
    if (ball_active) {
      const std::size_t j = d + act.size();
      for (std::size_t c = 0; c < d; ++c) {
        kkt(j, c) = theta[c] / nt;
        kkt(c, j) = theta[c] / nt;
      }
      rhs[j] = space.radius - nt;
    }

    // Pseudo-solve of the symmetric indefinite KKT system.
    const SymmetricEigen eig = symmetric_eigen(kkt);
    double scale = 0.0;
    for (double l : eig.values) scale = std::max(scale, std::fabs(l));
    if (scale == 0.0) return false;
    Vec sol(dim, 0.0);
    for (std::size_t k = 0; k < dim; ++k) {
      if (std::fabs(eig.values[k]) <= 1e-13 * scale) continue;
      double coef = 0.0;
      for (std::size_t i = 0; i < dim; ++i) coef += eig.vectors(i, k) * rhs[i];
      coef /= eig.values[k];
      for (std::size_t i = 0; i < dim; ++i) sol[i] += coef * eig.vectors(i, k);
    }
    Vec delta(sol.begin(), sol.begin() + d);
    const double dn = norm2(delta);
    if (!(dn > 0.0)) return false;
    if (dn > space.radius)
      for (auto& v : delta) v *= space.radius / dn;

    double s = 1.0;
    bool accepted = false;
    while (s > 1e-12) {
      Vec trial = theta + s * delta;
      if (space.violation(trial, design) > 1e-9) trial = project(trial, space, design);
      const double ftrial = prob.objective(trial);
      if (std::isfinite(ftrial)) {
        const Vec gtrial = prob.gradient(trial);
        const double map_trial = grad_mapping_norm(trial, gtrial, space, design);
        if (map_trial < 0.9 * final_map) {
          theta = std::move(trial);
          accepted = true;
          break;
        }
      }
      s *= 0.5;
    }
    if (!accepted) return false;
  }
  return false;
}

/// Constrained smooth minimization: a short projected-gradient phase for
/// global progress, a projected-Newton polish for interior optima, and the
/// barrier finisher for constraint-active optima.
inline PgdResult solve_constrained_smooth(const SmoothProblem& prob, Vec theta,
                                          const ParamSpace& space, const FixedDesign& design,
                                          const OptConfig& cfg) {
  std::size_t total_iters = 0;
  OptConfig phase = cfg;
  phase.max_iters = std::min<std::size_t>(cfg.max_iters, 40);
  PgdResult out = projected_gradient_descent(prob.objective, prob.gradient, std::move(theta),
                                             space, design, phase);
  total_iters += out.iterations;

  if (!out.converged) {
    out = newton_polish(prob.objective, prob.gradient, prob.hessian, std::move(out.theta),
                        space, design, cfg);
    total_iters += out.iterations;
  }

  auto try_finisher = [&](auto&& finisher) {
    if (out.converged) return;
    Vec candidate = out.theta;
    double map = out.grad_norm;
    if (finisher(candidate, map)) {
      out.theta = std::move(candidate);
      out.objective = prob.objective(out.theta);
      out.grad_norm = map;
      out.converged = true;
    } else if (std::isfinite(map) && map < out.grad_norm) {
      // Keep whichever point certifies better.
      const double fcand = prob.objective(candidate);
      if (fcand <= out.objective + 1e-10 * std::max(1.0, std::fabs(out.objective))) {
        out.theta = std::move(candidate);
        out.objective = fcand;
        out.grad_norm = map;
      }
    }
  };
  try_finisher([&](Vec& th, double& map) {
    return kkt_polish(prob, th, space, design, cfg, map, total_iters);
  });
  try_finisher([&](Vec& th, double& map) {
    return barrier_finish(prob, th, space, design, cfg, map, total_iters);
  });
  try_finisher([&](Vec& th, double& map) {
    return kkt_polish(prob, th, space, design, cfg, map, total_iters);
  });
  out.iterations = total_iters;
  return out;
}

inline Vec least_squares_unconstrained(const FixedDesign& design, const Vec& y) {
  const std::size_t d = design.dim();
  Vec rhs(d, 0.0);
  for (std::size_t i = 0; i < design.n(); ++i) {
    const double* xi = design.row(i);
    for (std::size_t j = 0; j < d; ++j) rhs[j] += xi[j] * y[i];
  }
  const double inv_n = 1.0 / static_cast<double>(design.n());
  for (double& v : rhs) v *= inv_n;
  try {
    return spd_solve(design.covariance(), rhs);
  } catch (const std::invalid_argument&) {
    throw SolverError("rank-deficient design");
  }
}

/// Feasible interval for theta in the 1-D parameter space.
inline std::pair<double, double> feasible_interval_1d(const FixedDesign& design,
                                                      const ParamSpace& space) {
  double lo = -space.radius;
  double hi = space.radius;
  for (std::size_t i = 0; i < design.n(); ++i) {
    const double xi = design.row(i)[0];
    if (xi > 0.0) {
      lo = std::max(lo, space.margin / xi);
    } else if (xi < 0.0) {
      hi = std::min(hi, space.margin / xi);
    } else {
      throw SolverError("infeasible parameter space: zero covariate row");
    }
  }
  if (lo > hi) throw SolverError("infeasible parameter space");
  return {lo, hi};
}

}  // namespace detail

/// Constrained least squares, the TMO estimator for the square loss.
/// Closed form when the unconstrained minimizer is already feasible,
/// projected gradient descent on the quadratic otherwise.
inline FitReport fit_least_squares(const FixedDesign& design, const Vec& y,
                                   const ParamSpace& space, const OptConfig& cfg = {}) {
  if (y.size() != design.n()) throw std::invalid_argument("fit_least_squares: size mismatch");
  const double n = static_cast<double>(design.n());

  auto objective = [&](const Vec& theta) {
    const Vec pred = design.predict(theta);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double r = y[i] - pred[i];
      s += r * r;
    }
    return s / n;
  };
  auto gradient = [&](const Vec& theta) {
    const Vec pred = design.predict(theta);
    Vec g(design.dim(), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double coef = 2.0 * (pred[i] - y[i]) / n;
      const double* xi = design.row(i);
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += coef * xi[j];
    }
    return g;
  };

  const Vec theta_u = detail::least_squares_unconstrained(design, y);
  FitReport rep;
  if (space.is_feasible(theta_u, design, 0.0)) {
    rep.estimate = theta_u;
    rep.final_objective = objective(theta_u);
    rep.converged = true;
    rep.gradient_norm = 0.0;
    return rep;
  }

  auto hessian = [&](const Vec&) {
    Matrix h(design.dim(), design.dim());
    for (std::size_t r = 0; r < design.dim(); ++r)
      for (std::size_t c = 0; c < design.dim(); ++c)
        h(r, c) = 2.0 * design.covariance()(r, c);
    return h;
  };
  const auto pgd = detail::solve_constrained_smooth({objective, gradient, hessian},
                                                    project(theta_u, space, design), space,
                                                    design, cfg);
  rep.estimate = pgd.theta;
  rep.final_objective = pgd.objective;
  rep.iterations = pgd.iterations;
  rep.converged = pgd.converged;
  rep.gradient_norm = pgd.grad_norm;
  return rep;
}

enum class TmoLoss { mae, mape, huber, pinball };

struct TmoSpec {
  TmoLoss loss;
  double param = 0.0;  // huber delta or pinball q
};

/// Target metric optimization for the nonsmooth metrics: projected
/// subgradient descent with eta_t = step_init / sqrt(t), returning the best
/// running-average iterate.
inline FitReport fit_tmo(const FixedDesign& design, const Vec& y, const TmoSpec& loss,
                         const ParamSpace& space, const OptConfig& cfg = {}) {
  if (y.size() != design.n()) throw std::invalid_argument("fit_tmo: size mismatch");

  std::vector<std::size_t> used;
  used.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (loss.loss == TmoLoss::mape && y[i] == 0.0) continue;  // zero-response rows skipped
    used.push_back(i);
  }
  if (used.empty()) throw SolverError("MAPE undefined on all-zero responses");
  const double n_used = static_cast<double>(used.size());

  auto point_loss = [&](double yi, double pred) {
    switch (loss.loss) {
      case TmoLoss::mae: return std::fabs(yi - pred);
      case TmoLoss::mape: return std::fabs(1.0 - pred / yi);
      case TmoLoss::huber: return huber_loss(yi - pred, loss.param);
      case TmoLoss::pinball: return pinball_loss(yi, pred, loss.param);
    }
    return 0.0;
  };
  // d loss / d pred.
  auto point_subgrad = [&](double yi, double pred) {
    switch (loss.loss) {
      case TmoLoss::mae: {
        const double r = pred - yi;
        return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
      }
      case TmoLoss::mape: {
        const double s = 1.0 - pred / yi;
        return s > 0.0 ? -1.0 / yi : (s < 0.0 ? 1.0 / yi : 0.0);
      }
      case TmoLoss::huber: {
        const double r = pred - yi;
        return std::fabs(r) <= loss.param ? r : loss.param * (r > 0.0 ? 1.0 : -1.0);
      }
      case TmoLoss::pinball: {
        const double under = yi - pred;
        return under > 0.0 ? -loss.param : (under < 0.0 ? 1.0 - loss.param : 0.0);
      }
    }
    return 0.0;
  };
  auto objective = [&](const Vec& theta) {
    double s = 0.0;
    for (std::size_t i : used) s += point_loss(y[i], design.inner(theta, i));
    return s / n_used;
  };

  Vec theta;
  try {
    theta = project(detail::least_squares_unconstrained(design, y), space, design);
  } catch (const SolverError&) {
    theta = project(Vec(design.dim(), 0.0), space, design);
  }

  Vec avg = theta;
  Vec best = avg;
  double best_obj = objective(avg);
  double last_improvement = best_obj;
  std::size_t stall = 0;
  std::size_t it = 1;

  for (; it <= cfg.max_iters; ++it) {
    Vec g(design.dim(), 0.0);
    for (std::size_t i : used) {
      const double coef = point_subgrad(y[i], design.inner(theta, i)) / n_used;
      const double* xi = design.row(i);
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += coef * xi[j];
    }
    const double eta = cfg.step_init / std::sqrt(static_cast<double>(it));
    theta = project(theta - eta * g, space, design);

    const double t = static_cast<double>(it);
    for (std::size_t j = 0; j < avg.size(); ++j)
      avg[j] = (t * avg[j] + theta[j]) / (t + 1.0);

    const double obj = objective(avg);
    if (obj < best_obj) {
      last_improvement = (best_obj - obj) / std::max(1.0, std::fabs(best_obj));
      best_obj = obj;
      best = avg;
      stall = 0;
    } else if (++stall >= 500) {
      break;  // objective plateau
    }
  }

  FitReport rep;
  rep.estimate = best;
  rep.final_objective = best_obj;
  rep.iterations = std::min(it, cfg.max_iters);
  rep.converged = stall >= 500;
  rep.gradient_norm = rep.converged ? std::min(last_improvement, cfg.grad_tol) : last_improvement;
  return rep;
}

/// Poisson MLE with the identity link: minimizes
/// sum_i [<theta, x_i> - y_i log <theta, x_i>] over the parameter space.
/// The d = 1 problem has the closed form sum(y)/sum(x) clamped to the
/// feasible interval; higher dimensions run projected gradient descent with
/// Armijo backtracking. The NLL is convex on the space, so the first-order
/// certificate is global.
inline FitReport fit_poisson_mle(const FixedDesign& design, const Vec& y,
                                 const ParamSpace& space, const OptConfig& cfg = {}) {
  if (y.size() != design.n()) throw std::invalid_argument("fit_poisson_mle: size mismatch");
  for (double yi : y) {
    if (!(yi >= 0.0) || std::floor(yi) != yi)
      throw std::invalid_argument("fit_poisson_mle: responses must be nonnegative integers");
  }

  auto objective = [&](const Vec& theta) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double ip = design.inner(theta, i);
      if (ip <= 0.0) return pos_inf();
      s += ip - y[i] * std::log(ip);
    }
    return s;
  };

  if (design.dim() == 1 && cfg.allow_closed_form) {
    const auto [lo, hi] = detail::feasible_interval_1d(design, space);
    double sum_y = 0.0, sum_x = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      sum_y += y[i];
      sum_x += design.row(i)[0];
    }
    const double theta_hat = std::clamp(sum_x != 0.0 ? sum_y / sum_x : lo, lo, hi);
    FitReport rep;
    rep.estimate = Vec{theta_hat};
    rep.final_objective = objective(Vec{theta_hat});
    rep.converged = true;
    rep.gradient_norm = 0.0;
    return rep;
  }

  auto gradient = [&](const Vec& theta) {
    Vec g(design.dim(), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double ip = std::max(design.inner(theta, i), kLogFloor);
      const double coef = 1.0 - y[i] / ip;
      const double* xi = design.row(i);
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += coef * xi[j];
    }
    return g;
  };

  Vec init;
  try {
    init = detail::least_squares_unconstrained(design, y);
  } catch (const SolverError&) {
    init = Vec(design.dim(), 0.0);
  }
  auto hessian = [&](const Vec& theta) {
    const std::size_t d = design.dim();
    Matrix h(d, d);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == 0.0) continue;
      const double ip = std::max(design.inner(theta, i), kLogFloor);
      const double coef = y[i] / (ip * ip);
      const double* xi = design.row(i);
      for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) h(r, c) += coef * xi[r] * xi[c];
    }
    return h;
  };
  const auto pgd = detail::solve_constrained_smooth({objective, gradient, hessian},
                                                    project(init, space, design), space,
                                                    design, cfg);
  FitReport rep;
  rep.estimate = pgd.theta;
  rep.final_objective = pgd.objective;
  rep.iterations = pgd.iterations;
  rep.converged = pgd.converged;
  rep.gradient_norm = pgd.grad_norm;
  return rep;
}

/// Pareto MLE for the parametrization m_i = ((b-1)/b) <theta, x_i>:
/// maximizes sum_i log <theta, x_i> subject to the n support halfspaces
/// m_i <= y_i, solved by a log-barrier schedule with inner projected
/// gradient solves. Iterates stay strictly inside the support region.
inline FitReport fit_pareto_mle(const FixedDesign& design, const Vec& y, double tail_b,
                                const ParamSpace& space, const OptConfig& cfg = {}) {
  if (y.size() != design.n()) throw std::invalid_argument("fit_pareto_mle: size mismatch");
  if (!(tail_b > 1.0)) throw std::invalid_argument("fit_pareto_mle: tail must exceed 1");
  for (double yi : y)
    if (!(yi > 0.0)) throw std::invalid_argument("fit_pareto_mle: responses must be positive");

  const double n = static_cast<double>(design.n());
  const double c = (tail_b - 1.0) / tail_b;
  Vec upper(y.size());  // support constraints <theta, x_i> <= y_i / c
  for (std::size_t i = 0; i < y.size(); ++i) upper[i] = y[i] / c;

  auto support_slack = [&](const Vec& theta) {
    double slack = pos_inf();
    for (std::size_t i = 0; i < y.size(); ++i)
      slack = std::min(slack, upper[i] - design.inner(theta, i));
    return slack;
  };

  Vec theta;
  try {
    theta = project(detail::least_squares_unconstrained(design, y), space, design);
  } catch (const SolverError&) {
    theta = project(Vec(design.dim(), 0.0), space, design);
  }

  if (support_slack(theta) <= 0.0) {
    // Shrinking the linear predictor scales every m_i down, so a slightly
    // contracted start is usually strictly inside the support region.
    for (const double shrink : {0.97, 0.9, 0.7, 0.4, 0.1}) {
      const Vec candidate = project(shrink * theta, space, design);
      if (support_slack(candidate) > 0.0) {
        theta = candidate;
        break;
      }
    }
  }

  if (support_slack(theta) <= 0.0) {
    // Phase 1: push the max violation down by projected subgradient.
    bool feasible = false;
    for (std::size_t it = 1; it <= 20000; ++it) {
      double worst = neg_inf();
      std::size_t worst_i = 0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double v = design.inner(theta, i) - upper[i];
        if (v > worst) {
          worst = v;
          worst_i = i;
        }
      }
      if (worst < -1e-9 * std::max(1.0, space.margin)) {
        feasible = true;
        break;
      }
      const double* xi = design.row(worst_i);
      double xi_norm = 0.0;
      for (std::size_t j = 0; j < design.dim(); ++j) xi_norm += xi[j] * xi[j];
      const double eta = cfg.step_init / (std::sqrt(static_cast<double>(it)) *
                                          std::max(xi_norm, 1e-12));
      Vec next = theta;
      for (std::size_t j = 0; j < design.dim(); ++j) next[j] -= eta * xi[j];
      theta = project(next, space, design);
    }
    if (!feasible && support_slack(theta) <= 0.0)
      throw SolverError("no feasible Pareto parameter");
  }

  double final_grad_norm = 0.0;
  bool converged = false;
  std::size_t total_iters = 0;
  const std::size_t d = design.dim();

  auto barrier_value = [&](const Vec& th, double t) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double ip = design.inner(th, i);
      const double gap = upper[i] - ip;
      if (ip <= 0.0 || gap <= 0.0) return pos_inf();
      s += -std::log(ip) - std::log(gap) / t;
    }
    return s;
  };
  auto barrier_grad = [&](const Vec& th, double t) {
    Vec g(d, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double ip = std::max(design.inner(th, i), kLogFloor);
      const double gap = std::max(upper[i] - design.inner(th, i), kLogFloor);
      const double coef = -1.0 / ip + 1.0 / (t * gap);
      const double* xi = design.row(i);
      for (std::size_t j = 0; j < d; ++j) g[j] += coef * xi[j];
    }
    return g;
  };

  // The barrier at t = 1000 n is far too ill-conditioned for first-order
  // inner solves; damped Newton handles it in a handful of iterations per
  // stage. Projected gradient remains as the fallback when Newton leaves
  // the parameter space or the Hessian degenerates.
  bool newton_ok = true;
  for (const double t_mult : {1.0, 10.0, 100.0, 1000.0}) {
    if (!newton_ok) break;
    const double t = t_mult * n;
    double f = barrier_value(theta, t);
    for (std::size_t iter = 0; iter < 60; ++iter) {
      ++total_iters;
      const Vec g = barrier_grad(theta, t);
      Matrix h(d, d);
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double ip = std::max(design.inner(theta, i), kLogFloor);
        const double gap = std::max(upper[i] - design.inner(theta, i), kLogFloor);
        const double coef = 1.0 / (ip * ip) + 1.0 / (t * gap * gap);
        const double* xi = design.row(i);
        for (std::size_t r = 0; r < d; ++r)
          for (std::size_t s2 = 0; s2 < d; ++s2) h(r, s2) += coef * xi[r] * xi[s2];
      }
      Vec dir;
      try {
        Vec neg(d);
        for (std::size_t j = 0; j < d; ++j) neg[j] = -g[j];
        dir = spd_solve(h, neg, 0.0);
      } catch (const std::invalid_argument&) {
        newton_ok = false;
        break;
      }
      const double decrement2 = -dot(g, dir);
      if (!(decrement2 > 0.0)) break;  // stationary (or numerical floor)
      if (decrement2 <= 2e-9 * n) {
        converged = true;
        final_grad_norm = std::sqrt(std::max(decrement2, 0.0));
        break;
      }
      double s = 1.0;
      bool accepted = false;
      while (s > 1e-14) {
        Vec trial = theta + s * dir;
        if (space.violation(trial, design) > 1e-9) {
          trial = project(trial, space, design);
          if (support_slack(trial) <= 0.0) {
            s *= 0.5;
            continue;
          }
        }
        const double ftrial = barrier_value(trial, t);
        if (ftrial < f) {
          theta = std::move(trial);
          f = ftrial;
          accepted = true;
          break;
        }
        s *= 0.5;
      }
      if (!accepted) break;
    }
  }

  if (!newton_ok) {
    for (const double t_mult : {1.0, 10.0, 100.0, 1000.0}) {
      const double t = t_mult * n;
      auto objective = [&](const Vec& th) { return barrier_value(th, t); };
      auto gradient = [&](const Vec& th) { return barrier_grad(th, t); };
      OptConfig inner = cfg;
      // Early stages only need accuracy on the order of their barrier gap.
      inner.grad_tol = cfg.grad_tol * n * (1000.0 / t_mult);
      inner.max_iters =
          std::min<std::size_t>(std::max<std::size_t>(cfg.max_iters / 20, 200), 2000);
      const auto pgd =
          detail::projected_gradient_descent(objective, gradient, theta, space, design, inner);
      theta = pgd.theta;
      final_grad_norm = pgd.grad_norm;
      converged = pgd.converged;
      total_iters += pgd.iterations;
    }
  }

  double nll = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double m = c * design.inner(theta, i);
    nll -= std::log(tail_b) + tail_b * guarded_log(m) - (tail_b + 1.0) * std::log(y[i]);
  }

  FitReport rep;
  rep.estimate = theta;
  rep.final_objective = nll;
  rep.iterations = total_iters;
  rep.converged = converged;
  rep.gradient_norm = final_grad_norm;
  return rep;
}

/// Robust location estimator: whitens the moment vectors y_i Sigma^{-1/2}
/// x_i, partitions them into k = 20 ceil(log(1/delta)) random blocks,
/// aggregates the block means by their geometric median, and unwhitens.
/// The geometric median stands in for the tournament aggregation step; the
/// statistical role (robust multivariate location of block means) is the
/// same. k_override forces a specific block count (0 = derive from delta).
inline ParamVector fit_median_of_means(const FixedDesign& design, const Vec& y, double delta,
                                       std::uint64_t seed = 0, std::size_t k_override = 0) {
  if (y.size() != design.n()) throw std::invalid_argument("fit_median_of_means: size mismatch");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("fit_median_of_means: delta must be in (0,1)");

  const std::size_t k =
      k_override > 0 ? k_override
                     : static_cast<std::size_t>(20.0 * std::ceil(std::log(1.0 / delta)));
  const std::size_t n = design.n();
  if (n < 2 * k) throw SolverError("insufficient samples for k blocks");

  const SymmetricEigen eig = symmetric_eigen(design.covariance());
  if (eig.values.front() <= 1e-12)
    throw SolverError("singular design covariance in median-of-means");
  const Matrix root_inv = eigen_apply(eig, [](double l) { return 1.0 / std::sqrt(l); });

  const std::size_t d = design.dim();
  std::vector<Vec> moments(n, Vec(d, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = design.row(i);
    for (std::size_t r = 0; r < d; ++r) {
      double s = 0.0;
      for (std::size_t cidx = 0; cidx < d; ++cidx) s += root_inv(r, cidx) * xi[cidx];
      moments[i][r] = y[i] * s;
    }
  }

  // Seeded Fisher-Yates shuffle, then split into k blocks (the first
  // n mod k blocks take one extra element).
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  RandomStream rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
    std::swap(perm[i], perm[j]);
  }

  std::vector<Vec> block_means;
  block_means.reserve(k);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < k; ++b) {
    const std::size_t sz = base + (b < extra ? 1 : 0);
    Vec mean(d, 0.0);
    for (std::size_t s = 0; s < sz; ++s, ++pos) {
      const Vec& m = moments[perm[pos]];
      for (std::size_t j = 0; j < d; ++j) mean[j] += m[j];
    }
    for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(sz);
    block_means.push_back(std::move(mean));
  }

  const Vec med = geometric_median(block_means);
  return matvec(root_inv, med);
}

namespace detail {

/// Digamma via recurrence into the asymptotic regime.
inline double digamma(double x) {
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0))));
  return result;
}

struct ZnbpPoint {
  double nll = 0.0;
  std::array<double, 6> draw{};  // d nll / d raw
};

/// Per-example negative log mixture density and its gradient in the six
/// raw outputs, chained through softmax / phi / sigmoid.
inline ZnbpPoint znbp_point(const std::array<double, 6>& raw, double y, double alpha) {
  ZnbpPoint out;
  const auto v = softmax3(raw[0], raw[1], raw[2]);
  const double r = phi_link(raw[3]);
  double p = sigmoid(raw[4]);
  p = std::min(std::max(p, 1e-12), 1.0 - 1e-12);
  const double m = phi_link(raw[5]);

  const double comp_zero = std::fabs(y) <= kZeroAtomTol ? 1.0 : 0.0;
  const double log_nb = std::lgamma(y + r) - std::lgamma(r) - std::lgamma(y + 1.0) +
                        r * std::log(p) + y * std::log1p(-p);
  const double comp_nb = std::exp(log_nb);
  const double comp_par =
      y >= m ? std::exp(std::log(alpha) + alpha * std::log(m) - (alpha + 1.0) * std::log(y))
             : 0.0;

  const double density_raw = v[0] * comp_zero + v[1] * comp_nb + v[2] * comp_par;
  const double density = std::max(density_raw, kLogFloor);
  out.nll = -std::log(density);

  const double inv_d = 1.0 / density;
  const std::array<double, 3> comps = {comp_zero, comp_nb, comp_par};
  for (std::size_t k = 0; k < 3; ++k)
    out.draw[k] = -inv_d * v[k] * (comps[k] - density_raw);

  const double dnb_dr = comp_nb * (digamma(y + r) - digamma(r) + std::log(p));
  out.draw[3] = -inv_d * v[1] * dnb_dr * phi_link_deriv(raw[3]);

  const double dnb_dp = comp_nb * (r / p - y / (1.0 - p));
  out.draw[4] = -inv_d * v[1] * dnb_dp * (p * (1.0 - p));

  const double dpar_dm = y > m ? comp_par * alpha / m : 0.0;
  out.draw[5] = -inv_d * v[2] * dpar_dm * phi_link_deriv(raw[5]);
  return out;
}

}  // namespace detail

/// ZNBP mixture trainer: full-batch gradient descent on the negative
/// log-likelihood of the link layer, with step halving on any increase and
/// a best-seen return. Initialization is a zero layer with the weight-logit
/// biases set to (0, 1, 0) plus 1e-2 uniform noise under the run seed.
inline FitReport fit_znbp(const FixedDesign& design, const Vec& y, double alpha,
                          const OptConfig& cfg = {}) {
  if (y.size() != design.n()) throw std::invalid_argument("fit_znbp: size mismatch");
  if (alpha != 3.0 && alpha != 4.0 && alpha != 5.0)
    throw std::invalid_argument("fit_znbp: alpha must be one of {3,4,5}");
  for (double yi : y)
    if (!(yi >= 0.0)) throw std::invalid_argument("fit_znbp: responses must be nonnegative");

  const std::size_t d = design.dim();
  const std::size_t n = design.n();
  Matrix w(6, d + 1);
  w(1, d) = 1.0;
  RandomStream rng(cfg.seed);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j <= d; ++j) w(i, j) += 1e-2 * (2.0 * rng.uniform() - 1.0);

  auto eval = [&](const Matrix& weights, Matrix* grad) {
    double nll = 0.0;
    if (grad) *grad = Matrix(6, d + 1);
    for (std::size_t i = 0; i < n; ++i) {
      std::array<double, 6> raw{};
      for (std::size_t r = 0; r < 6; ++r) {
        const double* row = weights.row_ptr(r);
        double s = row[d];
        const double* xi = design.row(i);
        for (std::size_t j = 0; j < d; ++j) s += row[j] * xi[j];
        raw[r] = s;
      }
      const auto pt = detail::znbp_point(raw, y[i], alpha);
      nll += pt.nll;
      if (grad) {
        for (double g : pt.draw) {
          if (!std::isfinite(g))
            throw SolverError("NaN gradient in ZNBP fit at example " + std::to_string(i));
        }
        const double* xi = design.row(i);
        for (std::size_t r = 0; r < 6; ++r) {
          for (std::size_t j = 0; j < d; ++j) (*grad)(r, j) += pt.draw[r] * xi[j];
          (*grad)(r, d) += pt.draw[r];
        }
      }
    }
    return nll;
  };

  double nll = eval(w, nullptr);
  Matrix best_w = w;
  double best_nll = nll;
  double step = cfg.step_init;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::size_t flat_count = 0;
  std::size_t it = 0;
  double grad_norm = 0.0;
  bool converged = false;
  Matrix prev_w, prev_grad;
  bool have_prev = false;

  for (; it < cfg.max_iters; ++it) {
    Matrix grad;
    eval(w, &grad);
    grad_norm = 0.0;
    for (double g : grad.data()) grad_norm += g * g;
    grad_norm = std::sqrt(grad_norm) * inv_n;

    // Barzilai-Borwein base step (monotonicity restored by the halvings).
    if (have_prev) {
      double sy = 0.0, ss = 0.0;
      for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j <= d; ++j) {
          const double ds = w(i, j) - prev_w(i, j);
          const double dg = inv_n * (grad(i, j) - prev_grad(i, j));
          sy += ds * dg;
          ss += ds * ds;
        }
      }
      if (sy > 0.0 && ss > 0.0) step = std::min(std::max(ss / sy, 1e-8), 1e4 * cfg.step_init);
    }
    prev_w = w;
    prev_grad = grad;
    have_prev = true;

    // One mixture component's density can jump when its support boundary
    // crosses a data atom (the Pareto scale moving past an integer y). The
    // full gradient is then blocked by the jump however small the step, so
    // retries mask out the dominant rows and let the rest move.
    bool accepted = false;
    double trial_nll = nll;
    std::array<bool, 6> masked{};
    for (int attempt = 0; attempt < 6 && !accepted; ++attempt) {
      if (attempt > 0) {
        std::size_t worst = 0;
        double worst_norm = -1.0;
        for (std::size_t i = 0; i < 6; ++i) {
          if (masked[i]) continue;
          double rn = 0.0;
          for (std::size_t j = 0; j <= d; ++j) rn += grad(i, j) * grad(i, j);
          if (rn > worst_norm) {
            worst_norm = rn;
            worst = i;
          }
        }
        masked[worst] = true;
        step = std::max(step, 0.01 * cfg.step_init);
      }
      for (int halvings = 0; halvings < 16; ++halvings, step *= 0.5) {
        Matrix trial = w;
        for (std::size_t i = 0; i < 6; ++i) {
          if (masked[i]) continue;
          for (std::size_t j = 0; j <= d; ++j) trial(i, j) -= step * inv_n * grad(i, j);
        }
        trial_nll = eval(trial, nullptr);
        if (std::isfinite(trial_nll) && trial_nll < nll) {
          w = std::move(trial);
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) break;

    const double rel_change = std::fabs(nll - trial_nll) / std::max(1.0, std::fabs(nll));
    nll = trial_nll;
    if (nll < best_nll) {
      best_nll = nll;
      best_w = w;
    }
    if (rel_change < 1e-9) {
      if (++flat_count >= 50) {
        converged = true;
        break;
      }
    } else {
      flat_count = 0;
    }
  }

  FitReport rep;
  rep.estimate = LinkLayer(best_w, alpha);
  rep.final_objective = best_nll;
  rep.iterations = it;
  rep.converged = converged;
  rep.gradient_norm = grad_norm;
  return rep;
}

/// Minimum eigenvalue of the Poisson NLL Hessian
/// sum_i y_i x_i x_i^T / <theta, x_i>^2 at theta.
inline double poisson_nll_hessian_min_eig(const FixedDesign& design, const Vec& y,
                                          const ParamVector& theta) {
  if (y.size() != design.n() || theta.size() != design.dim())
    throw std::invalid_argument("poisson_nll_hessian_min_eig: size mismatch");
  const std::size_t d = design.dim();
  Matrix h(d, d);
  for (std::size_t i = 0; i < design.n(); ++i) {
    if (y[i] == 0.0) continue;
    const double ip = design.inner(theta, i);
    const double coef = y[i] / (ip * ip);
    const double* xi = design.row(i);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t s = 0; s < d; ++s) h(r, s) += coef * xi[r] * xi[s];
  }
  return symmetric_eigen(h).values.front();
}

}  // namespace mlelab

#endif  // MLELAB_ESTIMATORS_HPP
