#ifndef MLELAB_DISTRIBUTIONS_HPP
#define MLELAB_DISTRIBUTIONS_HPP

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mlelab/random.hpp"

namespace mlelab {

inline constexpr double kZeroAtomTol = 1e-12;  // |y| <= tol counts as the zero atom
inline constexpr double kLogFloor = 1e-300;    // floor inside guarded logs

inline double guarded_log(double x) { return std::log(std::max(x, kLogFloor)); }

inline double neg_inf() { return -std::numeric_limits<double>::infinity(); }
inline double pos_inf() { return std::numeric_limits<double>::infinity(); }

/// Poisson with mean rate mu > 0.
class PoissonDist {
 public:
  explicit PoissonDist(double mu) : mu_(mu) {
    if (!(mu > 0.0) || !std::isfinite(mu))
      throw std::invalid_argument("PoissonDist: mu must be positive");
  }

  double mu() const { return mu_; }
  double mean() const { return mu_; }
  double variance() const { return mu_; }

  /// Log-mass at y >= 0 via the gamma continuous extension; equals the pmf
  /// on integers.
  double log_density(double y) const {
    if (y < 0.0) return neg_inf();
    return y * std::log(mu_) - mu_ - std::lgamma(y + 1.0);
  }

  double sample(RandomStream& rng) const { return rng.poisson(mu_); }

  /// Inversion of the cdf by cumulative summation (log-space, robust for
  /// large mu).
  double quantile(double q) const {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile: q must be in (0,1)");
    const double logq = std::log(q);
    double logpmf = -mu_;  // k = 0
    double logcdf = logpmf;
    double k = 0.0;
    const double kmax = mu_ + 200.0 * std::sqrt(mu_ + 1.0) + 200.0;
    while (logcdf < logq && k < kmax) {
      k += 1.0;
      logpmf += std::log(mu_) - std::log(k);
      const double hi = std::max(logcdf, logpmf);
      logcdf = hi + std::log(std::exp(logcdf - hi) + std::exp(logpmf - hi));
    }
    return k;
  }

 private:
  double mu_;
};

/// Pareto with minimum-of-support scale m > 0 and tail index b > 1.
class ParetoDist {
 public:
  ParetoDist(double scale, double tail) : scale_(scale), tail_(tail) {
    if (!(scale > 0.0) || !std::isfinite(scale))
      throw std::invalid_argument("ParetoDist: scale must be positive");
    if (!(tail > 1.0) || !std::isfinite(tail))
      throw std::invalid_argument("ParetoDist: tail must exceed 1");
  }

  double scale() const { return scale_; }
  double tail() const { return tail_; }

  double mean() const { return scale_ * tail_ / (tail_ - 1.0); }

  double variance() const {
    if (tail_ <= 2.0) return pos_inf();
    const double b = tail_;
    return scale_ * scale_ * b / ((b - 1.0) * (b - 1.0) * (b - 2.0));
  }

  double log_density(double y) const {
    if (y < scale_) return neg_inf();
    return std::log(tail_) + tail_ * std::log(scale_) - (tail_ + 1.0) * std::log(y);
  }

  double density(double y) const {
    return y < scale_ ? 0.0 : std::exp(log_density(y));
  }

  double cdf(double y) const {
    if (y <= scale_) return 0.0;
    return 1.0 - std::pow(scale_ / y, tail_);
  }

  double quantile(double q) const {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile: q must be in (0,1)");
    return scale_ * std::pow(1.0 - q, -1.0 / tail_);
  }

  /// Inverse-cdf transform of a uniform u in (0,1): m * u^(-1/b).
  double inverse_cdf_transform(double u) const {
    return scale_ * std::pow(u, -1.0 / tail_);
  }

  double sample(RandomStream& rng) const { return inverse_cdf_transform(rng.uniform()); }

 private:
  double scale_, tail_;
};

/// Negative binomial with real-valued count r > 0 and success probability
/// p in (0,1); pmf C(k+r-1, k) p^r (1-p)^k, mean r(1-p)/p.
class NegBinomialDist {
 public:
  NegBinomialDist(double count, double success) : count_(count), success_(success) {
    if (!(count > 0.0) || !std::isfinite(count))
      throw std::invalid_argument("NegBinomialDist: count must be positive");
    if (!(success > 0.0 && success < 1.0))
      throw std::invalid_argument("NegBinomialDist: success must be in (0,1)");
  }

  double count() const { return count_; }
  double success() const { return success_; }

  double mean() const { return count_ * (1.0 - success_) / success_; }
  double variance() const { return count_ * (1.0 - success_) / (success_ * success_); }

  /// Gamma-extended log quasi-density at real y >= 0:
  /// Gamma(y+r) / (Gamma(r) Gamma(y+1)) p^r (1-p)^y.
  double log_density(double y) const {
    if (y < 0.0) return neg_inf();
    return std::lgamma(y + count_) - std::lgamma(count_) - std::lgamma(y + 1.0) +
           count_ * std::log(success_) + y * std::log1p(-success_);
  }

  /// Gamma-Poisson compound draw.
  double sample(RandomStream& rng) const {
    const double lambda = rng.gamma(count_) * (1.0 - success_) / success_;
    return rng.poisson(lambda);
  }

  double quantile(double q) const {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile: q must be in (0,1)");
    const double logq = std::log(q);
    double logpmf = count_ * std::log(success_);  // k = 0
    double logcdf = logpmf;
    double k = 0.0;
    const double kmax = mean() + 200.0 * std::sqrt(variance() + 1.0) + 200.0;
    const double log1mp = std::log1p(-success_);
    while (logcdf < logq && k < kmax) {
      k += 1.0;
      logpmf += std::log(k - 1.0 + count_) - std::log(k) + log1mp;
      const double hi = std::max(logcdf, logpmf);
      logcdf = hi + std::log(std::exp(logcdf - hi) + std::exp(logpmf - hi));
    }
    return k;
  }

 private:
  double count_, success_;
};

/// Three-component predictive mixture: point mass at zero, negative
/// binomial, and Pareto with a fixed tail hyperparameter alpha in {3,4,5}.
/// The density mixes the atom mass, the gamma-extended NB term, and the
/// Pareto density on a common hybrid dominating measure.
class ZnbpMixture {
 public:
  ZnbpMixture(const std::array<double, 3>& weights, NegBinomialDist nb,
              double pareto_scale, double pareto_tail)
      : weights_(weights), nb_(nb), pareto_(pareto_scale, pareto_tail) {
    double sum = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w))
        throw std::invalid_argument("ZnbpMixture: weights must be nonnegative");
      sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("ZnbpMixture: weights must sum to 1");
    if (pareto_tail != 3.0 && pareto_tail != 4.0 && pareto_tail != 5.0)
      throw std::invalid_argument("ZnbpMixture: pareto tail must be one of {3,4,5}");
  }

  const std::array<double, 3>& weights() const { return weights_; }
  const NegBinomialDist& nb() const { return nb_; }
  const ParetoDist& pareto() const { return pareto_; }
  double pareto_scale() const { return pareto_.scale(); }
  double pareto_tail() const { return pareto_.tail(); }

  double mean() const {
    return weights_[1] * nb_.mean() + weights_[2] * pareto_.mean();
  }

  double variance() const {
    const double m2 = weights_[1] * (nb_.variance() + nb_.mean() * nb_.mean()) +
                      weights_[2] * (pareto_.variance() + pareto_.mean() * pareto_.mean());
    const double m = mean();
    return m2 - m * m;
  }

  double density(double y) const {
    if (y < 0.0) return 0.0;
    double d = 0.0;
    if (std::fabs(y) <= kZeroAtomTol) d += weights_[0];
    if (weights_[1] > 0.0) d += weights_[1] * std::exp(nb_.log_density(y));
    if (weights_[2] > 0.0) d += weights_[2] * pareto_.density(y);
    return d;
  }

  double log_density(double y) const {
    const double d = density(y);
    if (d <= 0.0) return neg_inf();
    return guarded_log(d);
  }

  /// Categorical-then-component draw.
  double sample(RandomStream& rng) const {
    const double u = rng.uniform();
    if (u < weights_[0]) return 0.0;
    if (u < weights_[0] + weights_[1]) return nb_.sample(rng);
    return pareto_.sample(rng);
  }

 private:
  std::array<double, 3> weights_;
  NegBinomialDist nb_;
  ParetoDist pareto_;
};

/// KL(Poisson(mu1) || Poisson(mu2)) = mu1 log(mu1/mu2) - mu1 + mu2.
inline double kl_poisson(double mu1, double mu2) {
  if (!(mu1 > 0.0) || !(mu2 > 0.0))
    throw std::invalid_argument("kl_poisson: rates must be positive");
  return mu1 * std::log(mu1 / mu2) - mu1 + mu2;
}

/// KL between Pareto distributions sharing tail index b: b log(m1/m2) when
/// the supports nest (m1 >= m2), +infinity otherwise.
inline double kl_pareto(double m1, double m2, double b) {
  if (!(m1 > 0.0) || !(m2 > 0.0))
    throw std::invalid_argument("kl_pareto: scales must be positive");
  if (!(b > 1.0)) throw std::invalid_argument("kl_pareto: tail must exceed 1");
  if (m1 < m2) return pos_inf();
  return b * std::log(m1 / m2);
}

}  // namespace mlelab

#endif  // MLELAB_DISTRIBUTIONS_HPP
