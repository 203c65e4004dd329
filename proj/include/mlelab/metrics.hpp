#ifndef MLELAB_METRICS_HPP
#define MLELAB_METRICS_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mlelab/errors.hpp"

namespace mlelab {

enum class MetricKind { mse, rmse, mae, wape, mape, huber, nql };

struct MetricSpec {
  MetricKind kind;
  double param = 0.0;  // huber delta or nql rho

  std::string name() const {
    switch (kind) {
      case MetricKind::mse: return "mse";
      case MetricKind::rmse: return "rmse";
      case MetricKind::mae: return "mae";
      case MetricKind::wape: return "wape";
      case MetricKind::mape: return "mape";
      case MetricKind::huber: return "huber:" + std::to_string(param);
      case MetricKind::nql: return "nql:" + std::to_string(param);
    }
    return "?";
  }
};

struct MetricValue {
  std::string name;
  double value = 0.0;
  std::size_t n_used = 0;
};

/// Per-point Huber loss of the residual y - yhat.
inline double huber_loss(double residual, double delta) {
  const double a = std::fabs(residual);
  if (a <= delta) return 0.5 * residual * residual;
  return delta * a - 0.5 * delta * delta;
}

/// Per-point pinball loss q (y - yhat)_+ + (1 - q) (yhat - y)_+.
inline double pinball_loss(double y, double yhat, double q) {
  const double under = y - yhat;
  return under >= 0.0 ? q * under : (1.0 - q) * (-under);
}

inline MetricValue evaluate(const MetricSpec& spec, const std::vector<double>& y,
                            const std::vector<double>& yhat) {
  if (y.size() != yhat.size())
    throw std::invalid_argument("evaluate: y and yhat must have equal length");
  if (y.empty()) throw std::invalid_argument("evaluate: empty input");
  const std::size_t n = y.size();

  MetricValue out;
  out.name = spec.name();
  out.n_used = n;

  switch (spec.kind) {
    case MetricKind::mse:
    case MetricKind::rmse: {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = yhat[i] - y[i];
        s += d * d;
      }
      out.value = s / static_cast<double>(n);
      if (spec.kind == MetricKind::rmse) out.value = std::sqrt(out.value);
      break;
    }
    case MetricKind::mae: {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += std::fabs(yhat[i] - y[i]);
      out.value = s / static_cast<double>(n);
      break;
    }
    case MetricKind::wape: {
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        num += std::fabs(yhat[i] - y[i]);
        den += std::fabs(y[i]);
      }
      if (den <= 0.0) throw MetricUndefined("WAPE undefined: all-zero actuals");
      out.value = num / den;
      break;
    }
    case MetricKind::mape: {
      double s = 0.0;
      std::size_t used = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (y[i] == 0.0) continue;
        s += std::fabs(1.0 - yhat[i] / y[i]);
        ++used;
      }
      if (used == 0) throw MetricUndefined("MAPE undefined: all-zero actuals");
      out.value = s / static_cast<double>(used);
      out.n_used = used;
      break;
    }
    case MetricKind::huber: {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += huber_loss(y[i] - yhat[i], spec.param);
      out.value = s / static_cast<double>(n);
      break;
    }
    case MetricKind::nql: {
      // The quantile loss normalized by sum |y|; coefficients 2 rho on
      // underprediction and 2 (1 - rho) on overprediction, so nql(1/2)
      // collapses to WAPE term by term.
      const double c_under = 2.0 * spec.param;
      const double c_over = 2.0 * (1.0 - spec.param);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double under = y[i] - yhat[i];
        num += under >= 0.0 ? c_under * under : c_over * (-under);
        den += std::fabs(y[i]);
      }
      if (den <= 0.0) throw MetricUndefined("NQL undefined: all-zero actuals");
      out.value = num / den;
      break;
    }
  }
  return out;
}

}  // namespace mlelab

#endif  // MLELAB_METRICS_HPP
