#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "potsel/errors.hpp"
#include "potsel/estimation.hpp"
#include "potsel/gpd.hpp"
#include "potsel/rng.hpp"

using namespace potsel;

TEST_CASE("neg_log_likelihood examples") {
  const std::vector<double> d{1.0, 2.0};
  CHECK(neg_log_likelihood({1.0, 0.0}, d) == doctest::Approx(3.0));
  CHECK(neg_log_likelihood({1.3, 0.4}, std::vector<double>{}) == 0.0);
  const std::vector<double> beyond{0.5, 3.0};
  CHECK(neg_log_likelihood({1.0, -0.5}, beyond) == std::numeric_limits<double>::infinity());
}

TEST_CASE("analytic derivatives match central differences") {
  Rng rng(31);
  const auto data = gpd_sample(200, {1.5, 0.2}, 32);
  for (int i = 0; i < 100; ++i) {
    GpdParams p{0.5 + 3 * rng.uniform(), -0.4 + 1.2 * rng.uniform()};
    if (i % 10 == 0) p.shape = 1e-7 * (rng.uniform() - 0.5);
    if (!std::isfinite(neg_log_likelihood(p, data))) continue;
    const NllDerivatives d = nll_derivatives(p, data);
    CHECK(d.value == doctest::Approx(neg_log_likelihood(p, data)).epsilon(1e-12));
    auto f_s = [&](double s) { return neg_log_likelihood({s, p.shape}, data); };
    auto f_x = [&](double x) { return neg_log_likelihood({p.scale, x}, data); };
    const double hs = 1e-5 * p.scale, hx = 1e-5;
    const double ds = oracle::central_diff(f_s, p.scale, hs);
    const double dx = oracle::central_diff(f_x, p.shape, hx);
    CHECK(std::fabs(d.d_scale - ds) <= 1e-5 * (1 + std::fabs(ds)));
    CHECK(std::fabs(d.d_shape - dx) <= 1e-5 * (1 + std::fabs(dx)));
    auto g_s = [&](double s) { return nll_derivatives({s, p.shape}, data).d_scale; };
    auto g_x = [&](double x) { return nll_derivatives({p.scale, x}, data).d_shape; };
    auto g_sx = [&](double x) { return nll_derivatives({p.scale, x}, data).d_scale; };
    CHECK(d.d_scale_scale == doctest::Approx(oracle::central_diff(g_s, p.scale, hs)).epsilon(1e-4));
    CHECK(d.d_shape_shape == doctest::Approx(oracle::central_diff(g_x, p.shape, hx)).epsilon(1e-4));
    CHECK(d.d_scale_shape == doctest::Approx(oracle::central_diff(g_sx, p.shape, hx)).epsilon(1e-4));
  }
}

TEST_CASE("fit_mle recovers a known shape") {
  const auto data = gpd_sample(10000, {2.0, 0.25}, 101);
  const FitResult fit = fit_mle(data);
  REQUIRE(fit.converged);
  REQUIRE(fit.covariance.has_value());
  CHECK(fit.method == FitMethod::Mle);
  CHECK(fit.n == 10000);
  CHECK(std::fabs(fit.params.shape - 0.25) < 3 * fit.covariance->se_shape());
  CHECK(std::fabs(fit.params.scale - 2.0) < 3 * fit.covariance->se_scale());
  CHECK(fit.objective_value <= neg_log_likelihood({2.0, 0.25}, data));
}

TEST_CASE("fit_mle scale equivariance") {
  const auto data = gpd_sample(500, {1.0, 0.1}, 5);
  const FitResult base = fit_mle(data);
  REQUIRE(base.converged);
  for (double c : {0.1, 10.0}) {
    std::vector<double> scaled;
    for (double y : data) scaled.push_back(c * y);
    const FitResult f = fit_mle(scaled);
    REQUIRE(f.converged);
    CHECK(f.params.scale == doctest::Approx(c * base.params.scale).epsilon(1e-7));
    CHECK(std::fabs(f.params.shape - base.params.shape) < 1e-6);
  }
}

TEST_CASE("fit_mle errors and degenerate input") {
  CHECK_THROWS_AS((void)fit_mle(std::vector<double>{1.0}), InsufficientDataError);
  CHECK_THROWS_AS((void)fit_mle(std::vector<double>{1.0, -2.0}), DomainError);
  const FitResult flat = fit_mle(std::vector<double>(20, 3.0));
  CHECK_FALSE(flat.converged);
}

TEST_CASE("fit_mle objective at optimum beats the truth over replicates") {
  for (std::uint64_t r = 0; r < 200; ++r) {
    const double xi = (r % 2) ? 0.3 : -0.3;
    const auto data = gpd_sample(60 + r, {1.0, xi}, derive_seed(9, r));
    const FitResult f = fit_mle(data);
    if (!f.converged) continue;
    REQUIRE(f.objective_value <= neg_log_likelihood({1.0, xi}, data) + 1e-9);
    const NllDerivatives d = nll_derivatives(f.params, data);
    REQUIRE(std::fabs(d.d_shape) < 1e-6 * f.n);
  }
}

TEST_CASE("moran objective: single point optimum") {
  // For one observation the best attainable M is 2 log 2, reached at F(y) = 1/2.
  const std::vector<double> one{1.7};
  const double sigma_half = 1.7 / std::log(2.0);
  CHECK(moran_objective({sigma_half, 0.0}, one) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  for (double s = 0.2; s < 10; s *= 1.3) CHECK(moran_objective({s, 0.0}, one) >= 2 * std::log(2.0) - 1e-12);
  for (double xi : {-0.4, 0.3, 1.2}) {
    // scale making F(1.7) = 0.5 under this shape
    const double s = xi * 1.7 / (std::pow(2.0, xi) - 1.0);
    CHECK(moran_objective({s, xi}, one) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("moran objective: ties and labeling") {
  const std::vector<double> tied{0.5, 1.0, 1.0, 2.0};
  const GpdParams p{1.0, 0.1};
  const double m = moran_objective(p, tied);
  CHECK(std::isfinite(m));
  // The tied spacing is replaced by -log f(y).
  const double untied = -std::log(gpd_cdf(0.5, p)) - std::log(gpd_cdf(1.0, p) - gpd_cdf(0.5, p)) -
                        gpd_logpdf(1.0, p) - std::log(gpd_cdf(2.0, p) - gpd_cdf(1.0, p)) -
                        std::log(1 - gpd_cdf(2.0, p));
  CHECK(m == doctest::Approx(untied).epsilon(1e-12));
  const FitResult f = fit_mps(tied);
  CHECK(std::isfinite(f.objective_value));
}

TEST_CASE("fit_mps agrees with fit_mle asymptotically") {
  const auto data = gpd_sample(5000, {1.0, 0.25}, 77);
  const FitResult mle = fit_mle(data);
  const FitResult mps = fit_mps(data);
  REQUIRE(mle.converged);
  REQUIRE(mps.converged);
  CHECK(mps.method == FitMethod::Mps);
  CHECK(std::fabs(mps.params.shape - mle.params.shape) < 3 * mle.covariance->se_shape());
  CHECK(std::fabs(mps.params.scale - mle.params.scale) < 3 * mle.covariance->se_scale());
  CHECK(mps.objective_value <= moran_objective(mle.params, std::vector<double>(
                                   [&] { auto s = data; std::sort(s.begin(), s.end()); return s; }())));
  CHECK_THROWS_AS((void)fit_mps(std::vector<double>{2.0}), InsufficientDataError);
}

TEST_CASE("pwm estimate is sensible for exponential data") {
  auto data = gpd_sample(20000, {3.0, 0.0}, 4);
  std::sort(data.begin(), data.end());
  const GpdParams p = pwm_estimate(data);
  CHECK(p.scale == doctest::Approx(3.0).epsilon(0.05));
  CHECK(std::fabs(p.shape) < 0.05);
}
