#ifndef MLELAB_GEOMETRIC_MEDIAN_HPP
#define MLELAB_GEOMETRIC_MEDIAN_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mlelab/linalg.hpp"

namespace mlelab {

/// Geometric median of a point cloud by Weiszfeld iteration, started at the
/// coordinate-wise mean. Distances are floored to keep the update defined
/// when the iterate lands on an anchor point.
inline Vec geometric_median(const std::vector<Vec>& points, double tol = 1e-10,
                            std::size_t max_iters = 10000) {
  if (points.empty()) throw std::invalid_argument("geometric_median: no points");
  const std::size_t d = points.front().size();
  if (points.size() == 1) return points.front();

  Vec x(d, 0.0);
  for (const Vec& p : points)
    for (std::size_t j = 0; j < d; ++j) x[j] += p[j];
  for (std::size_t j = 0; j < d; ++j) x[j] /= static_cast<double>(points.size());

  for (std::size_t it = 0; it < max_iters; ++it) {
    Vec num(d, 0.0);
    double den = 0.0;
    for (const Vec& p : points) {
      double dist = norm2(x - p);
      dist = std::max(dist, 1e-12);
      const double w = 1.0 / dist;
      for (std::size_t j = 0; j < d; ++j) num[j] += w * p[j];
      den += w;
    }
    Vec next(d);
    for (std::size_t j = 0; j < d; ++j) next[j] = num[j] / den;
    const double moved = norm2(next - x);
    x = std::move(next);
    if (moved < tol) break;
  }
  return x;
}

}  // namespace mlelab

#endif  // MLELAB_GEOMETRIC_MEDIAN_HPP
