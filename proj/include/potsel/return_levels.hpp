#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "potsel/estimation.hpp"
#include "potsel/gpd.hpp"

namespace potsel {

/// Threshold model context for an N-year return level.
struct ReturnLevelSpec {
  double threshold = 0.0;
  // Probability that an observation exceeds the threshold.
  double rate = 1.0;
  double obs_per_year = 365.0;
  double period = 100.0;

  /// N * n_y * rate, the expected exceedance count over the period.
  [[nodiscard]] double exceedances_per_period() const { return period * obs_per_year * rate; }
};

enum class CiMethod { Delta, Profile };

[[nodiscard]] std::string_view to_string(CiMethod m);

struct ReturnLevelEstimate {
  double period = 0.0;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  CiMethod method = CiMethod::Delta;
  double level = 0.95;
  double rate = 0.0;
  double obs_per_year = 0.0;
  // Profile only: the deviance never crossed the cutoff on that side.
  bool low_open = false;
  bool high_open = false;
};

/// 50, 100, 250, 500
[[nodiscard]] std::vector<double> default_return_periods();

/// z_N = u + scale/shape * ((N n_y rate)^shape - 1), u + scale log(N n_y rate) at shape 0.
/// Throws DomainError unless N n_y rate > 1 and the parameters are valid.
[[nodiscard]] double return_level(const GpdParams& params, const ReturnLevelSpec& spec);

struct ReturnLevelGradient {
  double d_scale = 0.0;
  double d_shape = 0.0;
  double d_rate = 0.0;
};

[[nodiscard]] ReturnLevelGradient return_level_gradient(const GpdParams& params, const ReturnLevelSpec& spec);

struct RateEstimate {
  double rate = 0.0;
  double se = 0.0;
};

/// exceed_n / total_n with binomial standard error. Throws DomainError unless
/// 0 < exceed_n <= total_n.
[[nodiscard]] RateEstimate rate_estimate(std::size_t total_n, std::size_t exceed_n);

/// Normal interval from the gradient in (scale, shape, rate); the rate is
/// independent of the fit with standard error `rate_se`. Throws
/// EstimateUnavailableError when the fit has no covariance.
[[nodiscard]] ReturnLevelEstimate delta_ci(const FitResult& fit, const ReturnLevelSpec& spec, double rate_se,
                                           double level = 0.95);

/// Profile log-likelihood of z_N: the GPD likelihood with scale written as a
/// function of (z_N, shape), maximised over the shape. The rate is fixed.
/// Returns -inf when no shape admits the data.
[[nodiscard]] double profile_loglik(std::span<const double> exceedances, const ReturnLevelSpec& spec, double z);

/// Profile-likelihood interval {z : 2 (l_hat - l_p(z)) <= chi2_1(level)}.
/// Endpoints are bracketed by geometric steps (factor 1.6, at most 60) and
/// bisected to 1e-8 relative width; a side that never crosses is reported
/// open at the last bracket point. Throws EstimateUnavailableError unless
/// `fit` converged with shape > -0.5.
[[nodiscard]] ReturnLevelEstimate profile_ci(std::span<const double> exceedances, const FitResult& fit,
                                             const ReturnLevelSpec& spec, double level = 0.95);

}  // namespace potsel
