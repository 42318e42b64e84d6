#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "potsel/rng.hpp"

namespace potsel {

/// Generalized Pareto parameters for exceedances over `threshold`.
///
/// Every distribution function below takes the excess y = x - threshold, so
/// the threshold only matters when moving between thresholds (shift_scale)
/// or when building return levels.
struct GpdParams {
  double scale = 1.0;
  double shape = 0.0;
  double threshold = 0.0;

  friend bool operator==(const GpdParams&, const GpdParams&) = default;
};

/// Below this |shape| the exponential formulas are used.
inline constexpr double kShapeZeroTol = 1e-12;

/// Upper end of the support of the excess, +inf for shape >= 0.
[[nodiscard]] double gpd_upper_endpoint(const GpdParams& params);

/// y >= 0 and, for negative shape, y <= -scale/shape.
[[nodiscard]] bool gpd_in_support(double y, const GpdParams& params);

/// Throws DomainError for out-of-support or NaN y.
[[nodiscard]] double gpd_cdf(double y, const GpdParams& params);

/// log(1 - F(y)); -inf at or beyond a finite upper endpoint, 0 for y <= 0.
[[nodiscard]] double gpd_log_survival(double y, const GpdParams& params);

/// Inverse CDF for p in [0, 1). p = 1 is +inf for shape >= 0 and rejected.
[[nodiscard]] double gpd_quantile(double p, const GpdParams& params);

/// Log density; returns -inf outside the support instead of throwing.
[[nodiscard]] double gpd_logpdf(double y, const GpdParams& params);

/// n excesses drawn by inversion of uniforms from `rng`.
[[nodiscard]] std::vector<double> gpd_sample(std::size_t n, const GpdParams& params, Rng& rng);
[[nodiscard]] std::vector<double> gpd_sample(std::size_t n, const GpdParams& params,
                                             std::uint64_t seed);

/// Parameters of the excesses over v >= params.threshold.
[[nodiscard]] GpdParams shift_scale(const GpdParams& params, double v);

/// Throws DomainError unless scale > 0 and both values are finite.
void validate(const GpdParams& params);

}  // namespace potsel
