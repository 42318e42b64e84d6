#include "potsel/gpd.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "potsel/errors.hpp"

namespace potsel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_exponential(double shape) { return std::fabs(shape) < kShapeZeroTol; }

// (1/shape) * log(1 + shape*y/scale), evaluated without cancellation for small shape.
double scaled_log1p(double y, const GpdParams& p) {
  if (is_exponential(p.shape)) return y / p.scale;
  return std::log1p(p.shape * y / p.scale) / p.shape;
}

}  // namespace

void validate(const GpdParams& params) {
  if (!(params.scale > 0.0) || !std::isfinite(params.scale) || !std::isfinite(params.shape)) {
    throw DomainError("GPD parameters require finite scale > 0 and finite shape");
  }
}

double gpd_upper_endpoint(const GpdParams& params) {
  if (params.shape >= 0.0 || is_exponential(params.shape)) return kInf;
  return -params.scale / params.shape;
}

bool gpd_in_support(double y, const GpdParams& params) {
  return !std::isnan(y) && y >= 0.0 && y <= gpd_upper_endpoint(params);
}

double gpd_cdf(double y, const GpdParams& params) {
  validate(params);
  if (!gpd_in_support(y, params)) {
    throw DomainError("gpd_cdf: y = " + std::to_string(y) + " outside the support");
  }
  if (y == gpd_upper_endpoint(params)) return 1.0;
  return -std::expm1(-scaled_log1p(y, params));
}

double gpd_log_survival(double y, const GpdParams& params) {
  if (y <= 0.0) return 0.0;
  if (y >= gpd_upper_endpoint(params)) return -kInf;
  return -scaled_log1p(y, params);
}

double gpd_quantile(double p, const GpdParams& params) {
  validate(params);
  if (std::isnan(p) || p < 0.0 || p > 1.0) {
    throw DomainError("gpd_quantile: p outside [0, 1)");
  }
  if (p == 1.0) {
    if (params.shape >= 0.0 || is_exponential(params.shape)) {
      throw DomainError("gpd_quantile: p = 1 maps to infinity for shape >= 0");
    }
    throw DomainError("gpd_quantile: p outside [0, 1)");
  }
  const double log_surv = std::log1p(-p);
  if (is_exponential(params.shape)) return -params.scale * log_surv;
  return params.scale * std::expm1(-params.shape * log_surv) / params.shape;
}

double gpd_logpdf(double y, const GpdParams& params) {
  if (!(params.scale > 0.0) || !gpd_in_support(y, params) || y == gpd_upper_endpoint(params)) {
    return -kInf;
  }
  if (is_exponential(params.shape)) return -std::log(params.scale) - y / params.scale;
  return -std::log(params.scale) - (1.0 + 1.0 / params.shape) * std::log1p(params.shape * y / params.scale);
}

std::vector<double> gpd_sample(std::size_t n, const GpdParams& params, Rng& rng) {
  validate(params);
  if (n == 0) throw InsufficientDataError("gpd_sample: n must be at least 1");
  std::vector<double> out(n);
  const bool expo = is_exponential(params.shape);
  for (auto& y : out) {
    // log(1 - U) with U uniform on (0,1); U itself is symmetric so use log(U).
    const double log_surv = std::log(rng.uniform());
    y = expo ? -params.scale * log_surv
             : params.scale * std::expm1(-params.shape * log_surv) / params.shape;
  }
  return out;
}

std::vector<double> gpd_sample(std::size_t n, const GpdParams& params, std::uint64_t seed) {
  Rng rng(seed);
  return gpd_sample(n, params, rng);
}

GpdParams shift_scale(const GpdParams& params, double v) {
  validate(params);
  if (!(v >= params.threshold)) throw DomainError("shift_scale: v below the current threshold");
  const double scale = params.scale + params.shape * (v - params.threshold);
  if (!(scale > 0.0)) {
    throw DomainError("shift_scale: v lies beyond the upper endpoint of the distribution");
  }
  return {scale, params.shape, v};
}

}  // namespace potsel
