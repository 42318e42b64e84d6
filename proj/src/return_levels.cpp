#include "potsel/return_levels.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>

#include "potsel/errors.hpp"
#include "potsel/stats_util.hpp"

namespace potsel {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_multiplier(const ReturnLevelSpec& s) {
  if (!(s.rate > 0.0 && s.rate <= 1.0)) throw DomainError("exceedance rate must lie in (0, 1]");
  if (!(s.obs_per_year > 0.0)) throw DomainError("observations per year must be positive");
  if (!(s.period > 0.0)) throw DomainError("return period must be positive");
  const double m = s.exceedances_per_period();
  if (!(m > 1.0)) throw DomainError("N * n_y * rate must exceed 1 for a return level above the threshold");
  return std::log(m);
}

// (m^xi - 1) / xi with m = e^L
double growth(double xi, double L) {
  return std::fabs(xi) < kShapeZeroTol ? L : std::expm1(xi * L) / xi;
}

// d/dxi of growth: (t e^t - (e^t - 1)) / xi^2 with t = xi L
double growth_slope(double xi, double L) {
  const double t = xi * L;
  if (std::fabs(t) < 1e-2) {
    double sum = 0.0, pw = 1.0, fact = 2.0;
    for (int k = 2; k < 12; ++k) {
      sum += (k - 1.0) / fact * pw;
      pw *= t;
      fact *= k + 1.0;
    }
    return L * L * sum;
  }
  return (t * std::exp(t) - std::expm1(t)) / (xi * xi);
}

double profile_at_shape(std::span<const double> y, double d, double L, double xi) {
  const double scale = d / growth(xi, L);
  if (!(scale > 0.0) || !std::isfinite(scale)) return kNegInf;
  const double nll = neg_log_likelihood({scale, xi, 0.0}, y);
  return std::isfinite(nll) ? -nll : kNegInf;
}

}  // namespace

std::string_view to_string(CiMethod m) { return m == CiMethod::Delta ? "delta" : "profile"; }

std::vector<double> default_return_periods() { return {50.0, 100.0, 250.0, 500.0}; }

double return_level(const GpdParams& params, const ReturnLevelSpec& spec) {
  validate(params);
  const double L = log_multiplier(spec);
  return spec.threshold + params.scale * growth(params.shape, L);
}

ReturnLevelGradient return_level_gradient(const GpdParams& params, const ReturnLevelSpec& spec) {
  validate(params);
  const double L = log_multiplier(spec);
  ReturnLevelGradient g;
  g.d_scale = growth(params.shape, L);
  g.d_shape = params.scale * growth_slope(params.shape, L);
  g.d_rate = params.scale * std::exp(params.shape * L) / spec.rate;
  return g;
}

RateEstimate rate_estimate(std::size_t total_n, std::size_t exceed_n) {
  if (exceed_n == 0) throw DomainError("rate estimate needs at least one exceedance");
  if (exceed_n > total_n) throw DomainError("more exceedances than observations");
  const double n = static_cast<double>(total_n);
  const double r = static_cast<double>(exceed_n) / n;
  return {r, std::sqrt(r * (1.0 - r) / n)};
}

ReturnLevelEstimate delta_ci(const FitResult& fit, const ReturnLevelSpec& spec, double rate_se, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
  if (!fit.covariance) throw EstimateUnavailableError("fit has no covariance; delta interval unavailable");
  if (!(rate_se >= 0.0)) throw DomainError("rate standard error must be non-negative");
  const ReturnLevelGradient g = return_level_gradient(fit.params, spec);
  const Covariance2& c = *fit.covariance;
  const double var = g.d_scale * g.d_scale * c.var_scale + 2.0 * g.d_scale * g.d_shape * c.cov +
                     g.d_shape * g.d_shape * c.var_shape + g.d_rate * g.d_rate * rate_se * rate_se;
  const double q = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
  ReturnLevelEstimate r;
  r.period = spec.period;
  r.estimate = return_level(fit.params, spec);
  const double half = q * std::sqrt(std::max(var, 0.0));
  r.ci_low = r.estimate - half;
  r.ci_high = r.estimate + half;
  r.method = CiMethod::Delta;
  r.level = level;
  r.rate = spec.rate;
  r.obs_per_year = spec.obs_per_year;
  return r;
}

double profile_loglik(std::span<const double> y, const ReturnLevelSpec& spec, double z) {
  const double L = log_multiplier(spec);
  const double d = z - spec.threshold;
  if (!(d > 0.0) || y.empty()) return kNegInf;
  const double ymax = *std::max_element(y.begin(), y.end());

  double lo = -1.0 + 1e-6;
  if (d < ymax) lo = std::max(lo, std::log1p(-d / ymax) / L);
  const double hi = 5.0;
  if (!(lo < hi)) return kNegInf;

  constexpr int grid = 48;
  const double step = (hi - lo) / grid;
  int best = -1;
  double best_val = kNegInf;
  for (int i = 0; i < grid; ++i) {
    const double v = profile_at_shape(y, d, L, lo + (i + 0.5) * step);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  if (best < 0) return kNegInf;
  const double a = lo + std::max(best - 0.5, 0.0) * step + (best == 0 ? 1e-12 : 0.0);
  const double b = lo + std::min(best + 1.5, static_cast<double>(grid)) * step;
  auto neg = [&](double xi) {
    const double v = profile_at_shape(y, d, L, xi);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::max();
  };
  const auto [xi, val] = boost::math::tools::brent_find_minima(neg, a, b, 26);
  (void)xi;
  return std::max(-val, best_val);
}

ReturnLevelEstimate profile_ci(std::span<const double> y, const FitResult& fit, const ReturnLevelSpec& spec,
                               double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
  if (!fit.converged || fit.method != FitMethod::Mle) {
    throw EstimateUnavailableError("profile interval needs a converged maximum-likelihood fit");
  }
  if (!(fit.params.shape > -0.5)) throw EstimateUnavailableError("profile interval needs shape > -0.5");

  ReturnLevelEstimate r;
  r.period = spec.period;
  r.estimate = return_level(fit.params, spec);
  r.method = CiMethod::Profile;
  r.level = level;
  r.rate = spec.rate;
  r.obs_per_year = spec.obs_per_year;

  const double zhat = r.estimate;
  const double lhat = std::max(-fit.objective_value, profile_loglik(y, spec, zhat));
  const double crit = chi_square_quantile(level, 1.0);
  auto inside = [&](double z) { return 2.0 * (lhat - profile_loglik(y, spec, z)) <= crit; };

  double d0 = 0.1 * (zhat - spec.threshold);
  if (fit.covariance) {
    const ReturnLevelGradient g = return_level_gradient(fit.params, spec);
    const Covariance2& c = *fit.covariance;
    const double var = g.d_scale * g.d_scale * c.var_scale + 2.0 * g.d_scale * g.d_shape * c.cov +
                       g.d_shape * g.d_shape * c.var_shape;
    if (var > 0.0) d0 = std::min(d0, 0.25 * std::sqrt(var));
  }
  constexpr double kFactor = 1.6;
  constexpr int kMaxSteps = 60;

  auto bisect = [&](double in, double out) {
    for (int it = 0; it < 400 && std::fabs(out - in) > 1e-8 * (1.0 + std::fabs(in)); ++it) {
      const double mid = 0.5 * (in + out);
      (inside(mid) ? in : out) = mid;
    }
    return 0.5 * (in + out);
  };

  {
    double prev = zhat, step = d0;
    bool crossed = false;
    for (int k = 0; k < kMaxSteps; ++k, step *= kFactor) {
      const double z = zhat + step;
      if (!inside(z)) {
        r.ci_high = bisect(prev, z);
        crossed = true;
        break;
      }
      prev = z;
    }
    if (!crossed) {
      r.ci_high = prev;
      r.high_open = true;
    }
  }
  {
    double prev = zhat, step = d0;
    bool crossed = false;
    for (int k = 0; k < kMaxSteps; ++k, step *= kFactor) {
      double z = zhat - step;
      if (z <= spec.threshold) z = spec.threshold + 0.5 * (prev - spec.threshold);
      if (!inside(z)) {
        r.ci_low = bisect(prev, z);
        crossed = true;
        break;
      }
      prev = z;
    }
    if (!crossed) {
      r.ci_low = prev;
      r.low_open = true;
    }
  }
  return r;
}

}  // namespace potsel
