#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "potsel/gpd.hpp"

namespace potsel {

enum class FitMethod { Mle, Mps };

[[nodiscard]] std::string_view to_string(FitMethod m);

/// Asymptotic covariance of (scale, shape).
struct Covariance2 {
  double var_scale = 0.0;
  double cov = 0.0;
  double var_shape = 0.0;

  [[nodiscard]] double se_scale() const;
  [[nodiscard]] double se_shape() const;
};

struct FitResult {
  GpdParams params;
  FitMethod method = FitMethod::Mle;
  // Negative log-likelihood for MLE, Moran's M(theta) for MPS.
  double objective_value = 0.0;
  bool converged = false;
  std::size_t n = 0;
  // Present only for shape > -0.5 with a positive definite Hessian.
  std::optional<Covariance2> covariance;
  int iterations = 0;
};

/// Maximum-likelihood fit to positive excesses.
///
/// Starts are the exponential fit (shape 0, scale = mean) and the probability
/// weighted moments fit. A damped Newton iteration in (log scale, shape)
/// with analytic derivatives runs from the better start; if it fails, a
/// Nelder-Mead search from both starts is polished by quasi-Newton steps.
///
/// A fit is flagged non-converged when the iteration cap (500) is hit, the
/// shape estimate is <= -1 + 1e-8, the objective is non-finite, or the
/// final gradient is not below tolerance. Throws InsufficientDataError for
/// n < 2 and DomainError for non-positive or non-finite values.
[[nodiscard]] FitResult fit_mle(std::span<const double> exceedances);

/// Maximum product of spacings fit (minimizes Moran's M(theta)).
///
/// A zero spacing from tied observations contributes log f(y_(i)) instead of
/// log 0. Errors as fit_mle.
[[nodiscard]] FitResult fit_mps(std::span<const double> exceedances);

/// Sum of -gpd_logpdf; +inf if any point is outside the support.
[[nodiscard]] double neg_log_likelihood(const GpdParams& params, std::span<const double> exceedances);

/// Moran's M(theta) = -sum log D_i over the n+1 spacings of `sorted`.
[[nodiscard]] double moran_objective(const GpdParams& params, std::span<const double> sorted);

/// Probability weighted moments estimate; shape clamped to [-0.9, 1.5].
[[nodiscard]] GpdParams pwm_estimate(std::span<const double> sorted);

/// Value, gradient and Hessian of the negative log-likelihood in (scale, shape).
struct NllDerivatives {
  double value = 0.0;
  double d_scale = 0.0;
  double d_shape = 0.0;
  double d_scale_scale = 0.0;
  double d_scale_shape = 0.0;
  double d_shape_shape = 0.0;
};

/// Analytic derivatives; value is +inf outside the support.
[[nodiscard]] NllDerivatives nll_derivatives(const GpdParams& params, std::span<const double> exceedances);

}  // namespace potsel
