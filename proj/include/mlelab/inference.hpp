#ifndef MLELAB_INFERENCE_HPP
#define MLELAB_INFERENCE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mlelab/distributions.hpp"
#include "mlelab/errors.hpp"
#include "mlelab/linear_model.hpp"

namespace mlelab {

/// Target metric for post-hoc inference. mape is beta_loss(-1) and relative
/// error is beta_loss(1); both are served by the beta-weighted median rule.
enum class TargetKind { mse, rmse, mae, wape, mape, quantile, beta_loss };

struct MetricTarget {
  TargetKind kind;
  double param = 0.0;  // quantile q or beta

  static MetricTarget mse() { return {TargetKind::mse}; }
  static MetricTarget rmse() { return {TargetKind::rmse}; }
  static MetricTarget mae() { return {TargetKind::mae}; }
  static MetricTarget wape() { return {TargetKind::wape}; }
  static MetricTarget mape() { return {TargetKind::mape}; }
  static MetricTarget quantile(double q) {
    if (!(q > 0.0 && q < 1.0))
      throw std::invalid_argument("MetricTarget: quantile level must be in (0,1)");
    return {TargetKind::quantile, q};
  }
  static MetricTarget beta_loss(double beta) { return {TargetKind::beta_loss, beta}; }
};

inline constexpr std::size_t kDefaultPredictiveSamples = 10000;

struct PredictiveSamples {
  std::vector<double> values;
  std::uint64_t seed = 0;
};

inline PredictiveSamples draw_predictive(const ZnbpMixture& dist, std::size_t s,
                                         std::uint64_t seed) {
  if (s < 1) throw std::invalid_argument("draw_predictive: need at least one sample");
  PredictiveSamples out;
  out.seed = seed;
  out.values.resize(s);
  RandomStream rng(seed);
  for (std::size_t i = 0; i < s; ++i) out.values[i] = dist.sample(rng);
  return out;
}

/// Nearest-rank empirical quantile (lower-median convention at q = 1/2):
/// the ceil(q*s)-th smallest value.
inline double nearest_rank_quantile(std::vector<double> sorted, double q) {
  const std::size_t s = sorted.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(s)));
  rank = std::max<std::size_t>(1, std::min(rank, s));
  return sorted[rank - 1];
}

/// Weighted median with the same lower / nearest-rank convention: the first
/// sample (in ascending order) whose cumulative weight reaches half the
/// total.
inline double weighted_median(std::vector<std::pair<double, double>> value_weight) {
  double total = 0.0;
  for (const auto& vw : value_weight) total += vw.second;
  std::sort(value_weight.begin(), value_weight.end());
  double cum = 0.0;
  for (const auto& vw : value_weight) {
    cum += vw.second;
    if (cum >= 0.5 * total) return vw.first;
  }
  return value_weight.back().first;
}

/// Metric-optimal statistic of an empirical predictive distribution:
/// mean for mse/rmse, median for mae/wape, nearest-rank quantile, and the
/// beta-weighted median (weights s_j^beta) for beta losses. Zero samples
/// are excluded when beta < 0, mirroring MAPE's own exclusion of zero
/// actuals.
inline double statistic(const PredictiveSamples& samples, const MetricTarget& target) {
  const auto& v = samples.values;
  if (v.empty()) throw std::invalid_argument("statistic: empty sample set");

  switch (target.kind) {
    case TargetKind::mse:
    case TargetKind::rmse: {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    }
    case TargetKind::mae:
    case TargetKind::wape: {
      std::vector<double> sorted = v;
      std::sort(sorted.begin(), sorted.end());
      return nearest_rank_quantile(std::move(sorted), 0.5);
    }
    case TargetKind::quantile: {
      std::vector<double> sorted = v;
      std::sort(sorted.begin(), sorted.end());
      return nearest_rank_quantile(std::move(sorted), target.param);
    }
    case TargetKind::mape:
    case TargetKind::beta_loss: {
      const double beta = target.kind == TargetKind::mape ? -1.0 : target.param;
      std::vector<std::pair<double, double>> vw;
      vw.reserve(v.size());
      for (double x : v) {
        if (beta < 0.0 && x <= 0.0) continue;
        vw.emplace_back(x, std::pow(x, beta));
      }
      if (vw.empty())
        throw MetricUndefined("beta-statistic undefined: no positive mass in samples");
      return weighted_median(std::move(vw));
    }
  }
  throw std::invalid_argument("statistic: unknown target");
}

/// One metric-matched point prediction from a fitted link layer.
inline double point_predict(const LinkLayer& layer, const Vec& x, const MetricTarget& target,
                            std::size_t s = kDefaultPredictiveSamples, std::uint64_t seed = 0) {
  const ZnbpMixture mix = predict_mixture(layer, x);
  return statistic(draw_predictive(mix, s, seed), target);
}

}  // namespace mlelab

#endif  // MLELAB_INFERENCE_HPP
