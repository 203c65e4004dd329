#ifndef MLELAB_LINEAR_MODEL_HPP
#define MLELAB_LINEAR_MODEL_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "mlelab/distributions.hpp"
#include "mlelab/errors.hpp"
#include "mlelab/linalg.hpp"

namespace mlelab {

using ParamVector = Vec;

/// Fixed covariate matrix X (n x d) with the diagnostics the risk analysis
/// needs: R = max row norm and the normalized covariance
/// Sigma = (sum_i x_i x_i^T) / n.
class FixedDesign {
 public:
  explicit FixedDesign(Matrix x) : x_(std::move(x)) {
    if (x_.rows() < 1 || x_.cols() < 1)
      throw std::invalid_argument("FixedDesign: need n >= 1 and d >= 1");
    for (std::size_t i = 0; i < x_.rows(); ++i)
      for (std::size_t j = 0; j < x_.cols(); ++j)
        if (!std::isfinite(x_(i, j)))
          throw std::invalid_argument("FixedDesign: non-finite entry");

    max_row_norm_ = 0.0;
    sigma_ = Matrix(x_.cols(), x_.cols());
    for (std::size_t i = 0; i < x_.rows(); ++i) {
      const double* xi = x_.row_ptr(i);
      double sq = 0.0;
      for (std::size_t j = 0; j < x_.cols(); ++j) {
        sq += xi[j] * xi[j];
        for (std::size_t k = 0; k < x_.cols(); ++k) sigma_(j, k) += xi[j] * xi[k];
      }
      max_row_norm_ = std::max(max_row_norm_, std::sqrt(sq));
    }
    const double inv_n = 1.0 / static_cast<double>(x_.rows());
    for (std::size_t j = 0; j < x_.cols(); ++j)
      for (std::size_t k = 0; k < x_.cols(); ++k) sigma_(j, k) *= inv_n;
  }

  std::size_t n() const { return x_.rows(); }
  std::size_t dim() const { return x_.cols(); }
  const Matrix& x() const { return x_; }
  const double* row(std::size_t i) const { return x_.row_ptr(i); }
  double max_row_norm() const { return max_row_norm_; }

  /// Normalized covariance Sigma.
  const Matrix& covariance() const { return sigma_; }

  /// <theta, x_i>.
  double inner(const ParamVector& theta, std::size_t i) const {
    return dot(x_.row_ptr(i), theta);
  }

  /// X theta for all rows.
  Vec predict(const ParamVector& theta) const { return matvec(x_, theta); }

 private:
  Matrix x_;
  Matrix sigma_;
  double max_row_norm_;
};

/// Constrained parameter set {||theta||_2 <= radius} intersected with the
/// margin halfspaces {<theta, x_i> >= margin for all rows}.
struct ParamSpace {
  double radius;
  double margin;

  ParamSpace(double radius_, double margin_) : radius(radius_), margin(margin_) {
    if (!(radius > 0.0)) throw std::invalid_argument("ParamSpace: radius must be positive");
    if (!(margin > 0.0)) throw std::invalid_argument("ParamSpace: margin must be positive");
  }

  /// Worst constraint violation of theta w.r.t. this space on the design.
  double violation(const ParamVector& theta, const FixedDesign& design) const {
    double v = norm2(theta) - radius;
    for (std::size_t i = 0; i < design.n(); ++i)
      v = std::max(v, margin - design.inner(theta, i));
    return v;
  }

  bool is_feasible(const ParamVector& theta, const FixedDesign& design,
                   double tol = 1e-9) const {
    return violation(theta, design) <= tol;
  }
};

namespace detail_project {

/// Dykstra's alternating projections over the ball and a subset of the
/// margin halfspaces. Plain alternation would converge to some point of the
/// intersection but not the nearest one; Dykstra's correction terms restore
/// the Euclidean projection.
inline bool dykstra(const ParamVector& theta, const ParamSpace& space,
                    const FixedDesign& design, const std::vector<std::size_t>& halfspaces,
                    Vec& out) {
  const std::size_t d = theta.size();
  const std::size_t n_sets = halfspaces.size() + 1;  // chosen halfspaces + the ball
  Vec corrections(n_sets * d, 0.0);
  Vec cur = theta;
  Vec prev_sweep = cur;
  Vec z(d), projected(d);

  Vec row_sq(halfspaces.size());
  for (std::size_t k = 0; k < halfspaces.size(); ++k) {
    const double* xi = design.row(halfspaces[k]);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += xi[j] * xi[j];
    row_sq[k] = s;
  }

  const std::size_t max_sweeps = 10000;
  const double move_tol = 1e-10;

  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    for (std::size_t s = 0; s < n_sets; ++s) {
      double* corr = corrections.data() + s * d;
      for (std::size_t j = 0; j < d; ++j) z[j] = cur[j] + corr[j];
      projected = z;
      if (s < halfspaces.size()) {
        const double* xi = design.row(halfspaces[s]);
        const double ip = dot(xi, z);
        if (ip < space.margin && row_sq[s] > 0.0) {
          const double shift = (space.margin - ip) / row_sq[s];
          for (std::size_t j = 0; j < d; ++j) projected[j] = z[j] + shift * xi[j];
        }
      } else {
        const double nz = norm2(z);
        if (nz > space.radius) {
          const double scale = space.radius / nz;
          for (std::size_t j = 0; j < d; ++j) projected[j] = z[j] * scale;
        }
      }
      for (std::size_t j = 0; j < d; ++j) {
        corr[j] = z[j] - projected[j];
        cur[j] = projected[j];
      }
    }
    const double moved = norm2(cur - prev_sweep);
    prev_sweep = cur;
    if (moved < move_tol) {
      out = std::move(cur);
      return true;
    }
  }
  out = std::move(cur);
  return false;
}

}  // namespace detail_project

/// Euclidean projection onto the ball-and-margins set. Dykstra runs over an
/// actively grown subset of the halfspaces: constraints that stay satisfied
/// at the subset projection are inactive at the full projection too, so the
/// result is extended and re-solved until it is feasible for every row,
/// which certifies it as the projection onto the full intersection.
inline ParamVector project(const ParamVector& theta, const ParamSpace& space,
                           const FixedDesign& design) {
  const std::size_t d = theta.size();
  if (d != design.dim()) throw std::invalid_argument("project: dimension mismatch");

  if (space.is_feasible(theta, design, 0.0)) return theta;

  std::vector<std::size_t> active;
  std::vector<char> in_active(design.n(), 0);
  for (std::size_t i = 0; i < design.n(); ++i) {
    if (design.inner(theta, i) < space.margin) {
      active.push_back(i);
      in_active[i] = 1;
    }
  }

  Vec cur = theta;
  bool converged = false;
  for (int round = 0; round < 64; ++round) {
    converged = detail_project::dykstra(theta, space, design, active, cur);
    bool grew = false;
    for (std::size_t i = 0; i < design.n(); ++i) {
      if (!in_active[i] && design.inner(cur, i) < space.margin - 1e-12) {
        active.push_back(i);
        in_active[i] = 1;
        grew = true;
      }
    }
    if (!grew) break;
  }

  const double viol = space.violation(cur, design);
  if (!converged && viol > 1e-6)
    throw SolverError("projection failed to converge (violation " + std::to_string(viol) + ")");
  return cur;
}

/// Positive increasing link: x + 1 for x > 0, 1/(1-x) otherwise.
/// Continuous and differentiable at 0 with slope 1 on both sides.
inline double phi_link(double x) { return x > 0.0 ? x + 1.0 : 1.0 / (1.0 - x); }

inline double phi_link_deriv(double x) {
  if (x > 0.0) return 1.0;
  const double inv = 1.0 / (1.0 - x);
  return inv * inv;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline std::array<double, 3> softmax3(double a, double b, double c) {
  const double m = std::max(a, std::max(b, c));
  const double ea = std::exp(a - m), eb = std::exp(b - m), ec = std::exp(c - m);
  const double sum = ea + eb + ec;
  return {ea / sum, eb / sum, ec / sum};
}

/// Raw 6-vector -> mixture parameters. Dimensions 0..2 pass through a
/// softmax to the weights, 3 through phi to the NB count, 4 through the
/// sigmoid to the NB success probability, and 5 through phi to the Pareto
/// scale. Total on finite inputs; the sigmoid output is clamped away from
/// {0,1} so the success probability stays in the open interval.
inline ZnbpMixture apply_links(const std::array<double, 6>& raw, double pareto_tail) {
  const auto weights = softmax3(raw[0], raw[1], raw[2]);
  const double count = phi_link(raw[3]);
  double success = sigmoid(raw[4]);
  success = std::min(std::max(success, 1e-12), 1.0 - 1e-12);
  const double scale = phi_link(raw[5]);
  return ZnbpMixture(weights, NegBinomialDist(count, success), scale, pareto_tail);
}

/// Affine map from features to the six raw mixture outputs,
/// raw = W (x ++ 1). Desk-scale stand-in for a network output layer.
struct LinkLayer {
  Matrix weights;      // 6 x (d+1), last column is the bias
  double pareto_tail;  // alpha, one of {3,4,5}

  LinkLayer(Matrix w, double tail) : weights(std::move(w)), pareto_tail(tail) {
    if (weights.rows() != 6) throw std::invalid_argument("LinkLayer: need 6 output rows");
    if (weights.cols() < 2) throw std::invalid_argument("LinkLayer: need at least 1 feature");
    for (std::size_t i = 0; i < weights.rows(); ++i)
      for (std::size_t j = 0; j < weights.cols(); ++j)
        if (!std::isfinite(weights(i, j)))
          throw std::invalid_argument("LinkLayer: non-finite weight");
    if (tail != 3.0 && tail != 4.0 && tail != 5.0)
      throw std::invalid_argument("LinkLayer: pareto tail must be one of {3,4,5}");
  }

  std::size_t feature_dim() const { return weights.cols() - 1; }
};

inline std::array<double, 6> predict_raw(const LinkLayer& layer, const Vec& x) {
  if (x.size() + 1 != layer.weights.cols())
    throw std::invalid_argument("predict_raw: dimension mismatch");
  std::array<double, 6> raw{};
  for (std::size_t r = 0; r < 6; ++r) {
    const double* row = layer.weights.row_ptr(r);
    double s = row[x.size()];  // bias
    for (std::size_t j = 0; j < x.size(); ++j) s += row[j] * x[j];
    raw[r] = s;
  }
  return raw;
}

inline ZnbpMixture predict_mixture(const LinkLayer& layer, const Vec& x) {
  return apply_links(predict_raw(layer, x), layer.pareto_tail);
}

/// Excess square-loss risk ||theta - theta_star||^2_Sigma.
inline double excess_risk(const ParamVector& theta, const ParamVector& theta_star,
                          const Matrix& sigma) {
  if (theta.size() != theta_star.size() || sigma.rows() != theta.size())
    throw std::invalid_argument("excess_risk: dimension mismatch");
  return quad_form(sigma, theta - theta_star);
}

}  // namespace mlelab

#endif  // MLELAB_LINEAR_MODEL_HPP
