#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mlelab/distributions.hpp"
#include "mlelab/random.hpp"

using namespace mlelab;

namespace {

// Truncated-sum oracle for KL between discrete distributions on {0..kmax}.
double kl_discrete_oracle(const PoissonDist& p1, const PoissonDist& p2, int kmax) {
  double s = 0.0;
  for (int k = 0; k <= kmax; ++k) {
    const double lp1 = p1.log_density(k);
    const double lp2 = p2.log_density(k);
    s += std::exp(lp1) * (lp1 - lp2);
  }
  return s;
}

// Simpson integration of f over [a, b] in log-space (u = log y).
template <typename F>
double integrate_log_simpson(F f, double a, double b, int panels) {
  const double ua = std::log(a), ub = std::log(b);
  const double h = (ub - ua) / panels;
  auto g = [&](double u) {
    const double y = std::exp(u);
    return f(y) * y;  // du-substitution Jacobian
  };
  double s = g(ua) + g(ub);
  for (int i = 1; i < panels; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * g(ua + i * h);
  return s * h / 3.0;
}

struct MomentCheck {
  double mean_err_se;  // |empirical - analytic| in standard errors
  double var_err_se;
};

template <typename Dist>
MomentCheck sampler_moments(const Dist& dist, double analytic_mean, double analytic_var,
                            std::uint64_t seed, std::size_t draws = 100000) {
  RandomStream rng(seed);
  std::vector<double> xs(draws);
  double sum = 0.0;
  for (auto& x : xs) {
    x = dist.sample(rng);
    sum += x;
  }
  const double mean = sum / draws;
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= draws;
  m4 /= draws;
  const double se_mean = std::sqrt(analytic_var / draws);
  const double se_var = std::sqrt(std::max(m4 - m2 * m2, 1e-30) / draws);
  return {std::fabs(mean - analytic_mean) / se_mean, std::fabs(m2 - analytic_var) / se_var};
}

}  // namespace

TEST_CASE("poisson log density") {
  const PoissonDist p(1.0);
  CHECK(p.log_density(2.0) == Catch::Approx(-1.0 - std::log(2.0)).epsilon(1e-14));

  // Cross-check by normalizing a truncated pmf table.
  double total = 0.0;
  std::vector<double> table(61);
  for (int k = 0; k <= 60; ++k) {
    double term = 1.0;
    for (int j = 1; j <= k; ++j) term *= 1.0 / j;  // mu^k / k! with mu = 1
    table[k] = term;
    total += term;
  }
  CHECK(std::exp(p.log_density(2.0)) == Catch::Approx(table[2] / total).epsilon(1e-10));

  CHECK(p.log_density(-1.0) == neg_inf());
  CHECK_THROWS_AS(PoissonDist(0.0), std::invalid_argument);
  CHECK_THROWS_AS(PoissonDist(-2.0), std::invalid_argument);
}

TEST_CASE("pareto density, cdf, quantile") {
  const ParetoDist p(1.0, 4.0);
  CHECK(p.log_density(0.5) == neg_inf());
  CHECK(p.quantile(0.5) == Catch::Approx(std::pow(2.0, 0.25)).epsilon(1e-14));
  CHECK(p.inverse_cdf_transform(0.5) == Catch::Approx(std::pow(2.0, 0.25)).epsilon(1e-14));

  for (int i = 1; i <= 99; ++i) {
    const double q = i / 100.0;
    CHECK(p.cdf(p.quantile(q)) == Catch::Approx(q).margin(1e-12));
  }

  // E[y] = scale * tail / (tail - 1): the model parametrization makes the
  // conditional mean equal the linear predictor.
  for (double b : {1.5, 2.0, 4.5, 7.0}) {
    const ParetoDist scaled((b - 1.0) / b * 5.0, b);
    CHECK(scaled.mean() == Catch::Approx(5.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(ParetoDist(-1.0, 4.0), std::invalid_argument);
  CHECK_THROWS_AS(ParetoDist(1.0, 1.0), std::invalid_argument);
}

TEST_CASE("poisson and nb quantiles by cdf inversion") {
  CHECK(PoissonDist(0.1).quantile(0.5) == 0.0);  // cdf(0) = e^-0.1 > 0.5
  const PoissonDist p(4.0);
  // Oracle: accumulate the pmf directly.
  double cdf = 0.0;
  int k = 0;
  for (; cdf < 0.75; ++k) cdf += std::exp(p.log_density(k));
  CHECK(p.quantile(0.75) == static_cast<double>(k - 1));

  const NegBinomialDist nb(2.0, 0.5);
  double cdf_nb = 0.0;
  int kn = 0;
  for (; cdf_nb < 0.9; ++kn) cdf_nb += std::exp(nb.log_density(kn));
  CHECK(nb.quantile(0.9) == static_cast<double>(kn - 1));
}

TEST_CASE("discrete normalization") {
  // Sum the pmf until the remaining tail mass is below 1e-10.
  for (double mu : {0.3, 1.0, 7.5, 25.0}) {
    const PoissonDist p(mu);
    double total = 0.0;
    int k = 0;
    while (total < 1.0 - 1e-10) {
      total += std::exp(p.log_density(k));
      if (++k > 10000) break;
    }
    CHECK(total == Catch::Approx(1.0).margin(1e-8));
  }
  for (auto [r, prob] : {std::pair{2.0, 0.5}, std::pair{0.7, 0.2}, std::pair{5.0, 0.8}}) {
    const NegBinomialDist nb(r, prob);
    double total = 0.0;
    int k = 0;
    while (total < 1.0 - 1e-10) {
      total += std::exp(nb.log_density(k));
      if (++k > 200000) break;
    }
    CHECK(total == Catch::Approx(1.0).margin(1e-8));
  }
}

TEST_CASE("pareto density integrates to 1 - 1e-8 up to the matching quantile") {
  const ParetoDist p(2.0, 4.5);
  const double upper = p.quantile(1.0 - 1e-8);
  const double mass =
      integrate_log_simpson([&](double y) { return p.density(y); }, 2.0, upper, 20000);
  CHECK(mass == Catch::Approx(1.0 - 1e-8).margin(1e-6));
}

TEST_CASE("kl poisson closed form vs truncated-sum oracle") {
  CHECK(kl_poisson(3.7, 3.7) == 0.0);
  CHECK(kl_poisson(2.0, 1.0) == Catch::Approx(2.0 * std::log(2.0) - 1.0).epsilon(1e-14));
  CHECK(kl_poisson(1.0, 2.0) == Catch::Approx(1.0 - std::log(2.0)).epsilon(1e-14));

  CHECK(kl_poisson(2.0, 1.0) ==
        Catch::Approx(kl_discrete_oracle(PoissonDist(2.0), PoissonDist(1.0), 100)).margin(1e-10));
  CHECK(kl_poisson(1.0, 2.0) ==
        Catch::Approx(kl_discrete_oracle(PoissonDist(1.0), PoissonDist(2.0), 100)).margin(1e-10));

  CHECK_THROWS_AS(kl_poisson(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(kl_poisson(1.0, -1.0), std::invalid_argument);
}

TEST_CASE("kl pareto closed form vs numerical integration oracle") {
  CHECK(kl_pareto(3.0, 3.0, 4.0) == 0.0);
  CHECK(kl_pareto(2.0, 1.0, 4.0) == Catch::Approx(4.0 * std::log(2.0)).epsilon(1e-14));
  CHECK(kl_pareto(1.0, 2.0, 4.0) == pos_inf());

  const ParetoDist p1(2.0, 4.0), p2(1.0, 4.0);
  const double oracle = integrate_log_simpson(
      [&](double y) { return p1.density(y) * (p1.log_density(y) - p2.log_density(y)); }, 2.0,
      1e6, 20000);
  CHECK(kl_pareto(2.0, 1.0, 4.0) == Catch::Approx(oracle).margin(1e-6));
}

TEST_CASE("kl nonnegativity, zero iff equal") {
  RandomStream rng(11);
  for (int i = 0; i < 200; ++i) {
    const double a = 0.1 + 5.0 * rng.uniform();
    const double b = 0.1 + 5.0 * rng.uniform();
    CHECK(kl_poisson(a, b) >= 0.0);
    if (a != b) CHECK(kl_poisson(a, b) > 0.0);
    const double tail = 2.0 + 3.0 * rng.uniform();
    const double kp = kl_pareto(std::max(a, b), std::min(a, b), tail);
    CHECK(kp >= 0.0);
    if (a != b) CHECK(kp > 0.0);
  }
}

TEST_CASE("mixture density decomposition at unit weights") {
  const NegBinomialDist nb(2.0, 0.5);
  const ZnbpMixture zero({1.0, 0.0, 0.0}, nb, 1.0, 4.0);
  CHECK(zero.log_density(0.0) == 0.0);  // log of atom mass 1
  CHECK(zero.log_density(3.0) == neg_inf());

  const ZnbpMixture pure_nb({0.0, 1.0, 0.0}, nb, 1.0, 4.0);
  for (double y : {0.0, 1.0, 2.0, 7.0})
    CHECK(pure_nb.log_density(y) == nb.log_density(y));

  const ZnbpMixture pure_par({0.0, 0.0, 1.0}, nb, 1.5, 4.0);
  const ParetoDist par(1.5, 4.0);
  for (double y : {2.0, 3.5, 10.0})
    CHECK(pure_par.log_density(y) == par.log_density(y));

  CHECK_THROWS_AS(ZnbpMixture({0.5, 0.5, 0.5}, nb, 1.0, 4.0), std::invalid_argument);
  CHECK_THROWS_AS(ZnbpMixture({1.0, 0.0, 0.0}, nb, 1.0, 3.5), std::invalid_argument);
}

TEST_CASE("zero-atom mixture samples are identically zero") {
  const ZnbpMixture zero({1.0, 0.0, 0.0}, NegBinomialDist(2.0, 0.5), 1.0, 4.0);
  RandomStream rng(5);
  for (int i = 0; i < 1000; ++i) CHECK(zero.sample(rng) == 0.0);
}

TEST_CASE("sampling is deterministic in the seed") {
  const ZnbpMixture mix({0.2, 0.5, 0.3}, NegBinomialDist(2.0, 0.4), 1.2, 4.0);
  RandomStream a(99), b(99);
  for (int i = 0; i < 500; ++i) CHECK(mix.sample(a) == mix.sample(b));
}

TEST_CASE("sampler consistency: moments within 4 standard errors") {
  {
    const PoissonDist p(5.0);
    const auto chk = sampler_moments(p, 5.0, 5.0, 101);
    CHECK(chk.mean_err_se < 4.0);
    CHECK(chk.var_err_se < 4.0);
    // Spec example band: sample mean within 3 sqrt(5/1e5) of 5.
    CHECK(chk.mean_err_se < 3.0);
  }
  {
    const PoissonDist p(80.0);  // rejection path
    const auto chk = sampler_moments(p, 80.0, 80.0, 102);
    CHECK(chk.mean_err_se < 4.0);
    CHECK(chk.var_err_se < 4.0);
  }
  {
    const ParetoDist p(1.5, 4.5);
    const auto chk = sampler_moments(p, p.mean(), p.variance(), 103);
    CHECK(chk.mean_err_se < 4.0);
    CHECK(chk.var_err_se < 4.0);
  }
  {
    const NegBinomialDist nb(2.0, 0.5);
    const auto chk = sampler_moments(nb, nb.mean(), nb.variance(), 104);
    CHECK(chk.mean_err_se < 4.0);
    CHECK(chk.var_err_se < 4.0);
  }
  {
    const ZnbpMixture mix({0.3, 0.5, 0.2}, NegBinomialDist(3.0, 0.6), 1.1, 5.0);
    const auto chk = sampler_moments(mix, mix.mean(), mix.variance(), 105);
    CHECK(chk.mean_err_se < 4.0);
    CHECK(chk.var_err_se < 4.0);
  }
}

TEST_CASE("mixture mean is the weighted component mean") {
  const NegBinomialDist nb(2.0, 0.5);
  const ZnbpMixture mix({0.25, 0.5, 0.25}, nb, 2.0, 4.0);
  const double expected = 0.5 * nb.mean() + 0.25 * (2.0 * 4.0 / 3.0);
  CHECK(mix.mean() == Catch::Approx(expected).epsilon(1e-14));
}
