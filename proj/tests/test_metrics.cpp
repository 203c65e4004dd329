#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mlelab/metrics.hpp"
#include "mlelab/random.hpp"

using namespace mlelab;

namespace {

// Brute-force reimplementations, deliberately written as separate loops.
double oracle_mse(const std::vector<double>& y, const std::vector<double>& yhat) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::pow(yhat[i] - y[i], 2);
  return s / y.size();
}
double oracle_mae(const std::vector<double>& y, const std::vector<double>& yhat) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(yhat[i] - y[i]);
  return s / y.size();
}
double oracle_wape(const std::vector<double>& y, const std::vector<double>& yhat) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) num += std::abs(yhat[i] - y[i]);
  for (std::size_t i = 0; i < y.size(); ++i) den += std::abs(y[i]);
  return num / den;
}
double oracle_mape(const std::vector<double>& y, const std::vector<double>& yhat) {
  double s = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) continue;
    s += std::abs((y[i] - yhat[i]) / y[i]);
    ++cnt;
  }
  return s / cnt;
}
double oracle_huber(const std::vector<double>& y, const std::vector<double>& yhat, double d) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double a = std::abs(y[i] - yhat[i]);
    s += a <= d ? 0.5 * a * a : d * a - 0.5 * d * d;
  }
  return s / y.size();
}
double oracle_nql(const std::vector<double>& y, const std::vector<double>& yhat, double rho) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] >= yhat[i]) num += 2.0 * rho * (y[i] - yhat[i]);
    else num += 2.0 * (1.0 - rho) * (yhat[i] - y[i]);
    den += std::abs(y[i]);
  }
  return num / den;
}

}  // namespace

TEST_CASE("hand-computed values") {
  const std::vector<double> y = {1.0, 3.0};
  const std::vector<double> yhat = {1.0, 1.0};
  CHECK(evaluate({MetricKind::wape}, y, yhat).value == Catch::Approx(0.5));
  CHECK(evaluate({MetricKind::mae}, y, yhat).value == Catch::Approx(1.0));
  CHECK(evaluate({MetricKind::mse}, y, yhat).value == Catch::Approx(2.0));
  CHECK(evaluate({MetricKind::rmse}, y, yhat).value == Catch::Approx(std::sqrt(2.0)));

  // Perfect predictions: every metric is 0.
  for (auto kind : {MetricKind::mse, MetricKind::rmse, MetricKind::mae, MetricKind::wape,
                    MetricKind::mape}) {
    CHECK(evaluate({kind}, y, y).value == 0.0);
  }
  CHECK(evaluate({MetricKind::huber, 1.0}, y, y).value == 0.0);
  CHECK(evaluate({MetricKind::nql, 0.9}, y, y).value == 0.0);
}

TEST_CASE("huber piecewise values and branch continuity") {
  CHECK(huber_loss(0.5, 1.0) == Catch::Approx(0.125).epsilon(1e-14));
  CHECK(huber_loss(2.0, 1.0) == Catch::Approx(1.5).epsilon(1e-14));
  for (double delta : {0.25, 1.0, 32.0}) {
    const double inside = 0.5 * delta * delta;
    const double outside = delta * delta - 0.5 * delta * delta;
    CHECK(std::fabs(inside - outside) <= 1e-14);
    CHECK(huber_loss(delta, delta) == Catch::Approx(inside).margin(1e-14));
  }
}

TEST_CASE("metrics match brute-force oracles on random pairs") {
  RandomStream rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 40);
    std::vector<double> y(n), yhat(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.uniform() < 0.15 ? 0.0 : 10.0 * rng.normal();
      yhat[i] = 10.0 * rng.normal();
    }
    bool any_nonzero = false;
    for (double v : y) any_nonzero |= v != 0.0;
    if (!any_nonzero) y[0] = 1.0;

    CHECK(evaluate({MetricKind::mse}, y, yhat).value ==
          Catch::Approx(oracle_mse(y, yhat)).margin(1e-12));
    CHECK(evaluate({MetricKind::mae}, y, yhat).value ==
          Catch::Approx(oracle_mae(y, yhat)).margin(1e-12));
    CHECK(evaluate({MetricKind::wape}, y, yhat).value ==
          Catch::Approx(oracle_wape(y, yhat)).margin(1e-12));
    CHECK(evaluate({MetricKind::mape}, y, yhat).value ==
          Catch::Approx(oracle_mape(y, yhat)).margin(1e-12));
    const double delta = 0.5 + 3.0 * rng.uniform();
    CHECK(evaluate({MetricKind::huber, delta}, y, yhat).value ==
          Catch::Approx(oracle_huber(y, yhat, delta)).margin(1e-12));
    const double rho = rng.uniform();
    CHECK(evaluate({MetricKind::nql, rho}, y, yhat).value ==
          Catch::Approx(oracle_nql(y, yhat, rho)).margin(1e-12));
  }
}

TEST_CASE("mape counts only nonzero actuals and is scale invariant") {
  const std::vector<double> y = {0.0, 2.0, 4.0};
  const std::vector<double> yhat = {5.0, 1.0, 5.0};
  const MetricValue v = evaluate({MetricKind::mape}, y, yhat);
  CHECK(v.n_used == 2);
  CHECK(v.value == Catch::Approx((0.5 + 0.25) / 2.0));

  for (double c : {0.5, 3.0, 1e4}) {
    std::vector<double> cy(y), cyhat(yhat);
    for (auto& t : cy) t *= c;
    for (auto& t : cyhat) t *= c;
    CHECK(evaluate({MetricKind::mape}, cy, cyhat).value == Catch::Approx(v.value).epsilon(1e-12));
  }
}

TEST_CASE("undefined metrics throw") {
  const std::vector<double> zeros = {0.0, 0.0};
  const std::vector<double> yhat = {1.0, 2.0};
  CHECK_THROWS_AS(evaluate({MetricKind::wape}, zeros, yhat), MetricUndefined);
  CHECK_THROWS_AS(evaluate({MetricKind::mape}, zeros, yhat), MetricUndefined);
  CHECK_THROWS_AS(evaluate({MetricKind::mse}, {1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("wape equals mae * n / sum|y|") {
  RandomStream rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 30);
    std::vector<double> y(n), yhat(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.normal() + 4.0;
      yhat[i] = rng.normal() + 4.0;
    }
    double abs_sum = 0.0;
    for (double v : y) abs_sum += std::fabs(v);
    const double wape = evaluate({MetricKind::wape}, y, yhat).value;
    const double mae = evaluate({MetricKind::mae}, y, yhat).value;
    CHECK(wape == Catch::Approx(mae * n / abs_sum).epsilon(1e-13));
  }
}

TEST_CASE("nql(1/2) equals wape bit for bit") {
  RandomStream rng(9);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 30);
    std::vector<double> y(n), yhat(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.normal() + 2.0;
      yhat[i] = rng.normal() + 2.0;
    }
    CHECK(evaluate({MetricKind::nql, 0.5}, y, yhat).value ==
          evaluate({MetricKind::wape}, y, yhat).value);
  }
}

TEST_CASE("nql is twice the summed pinball loss over sum|y|") {
  RandomStream rng(21);
  for (double rho : {0.1, 0.5, 0.9}) {
    const std::size_t n = 25;
    std::vector<double> y(n), yhat(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.normal() + 3.0;
      yhat[i] = rng.normal() + 3.0;
    }
    double pin = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      pin += pinball_loss(y[i], yhat[i], rho);
      den += std::fabs(y[i]);
    }
    CHECK(evaluate({MetricKind::nql, rho}, y, yhat).value ==
          Catch::Approx(2.0 * pin / den).epsilon(1e-13));
  }
}
