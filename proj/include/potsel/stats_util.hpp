#pragma once

#include <span>

namespace potsel {

/// Sample quantile by linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty; prob in [0,1].
[[nodiscard]] double quantile_type7(std::span<const double> sorted, double prob);

/// Upper tail probability of the chi-square distribution with `dof` degrees of freedom.
[[nodiscard]] double chi_square_upper(double x, double dof);

/// Quantile of the chi-square distribution (lower-tail probability `prob`).
[[nodiscard]] double chi_square_quantile(double prob, double dof);

}  // namespace potsel
