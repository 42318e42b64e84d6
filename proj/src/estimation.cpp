#include "potsel/estimation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "optimize.hpp"
#include "potsel/errors.hpp"

namespace potsel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxIterations = 500;
constexpr double kShapeFloor = -1.0 + 1e-8;
// Per-observation gradient tolerance for declaring convergence.
constexpr double kGradTol = 1e-6;

// (log1p(x) - x/(1+x)) / x^2, with lp = log1p(x) supplied by the caller.
double g_term(double x, double lp) {
  if (std::fabs(x) < 1e-2) {
    double sum = 0.0, pw = 1.0;
    for (int k = 2; k < 12; ++k) {
      sum += ((k % 2 == 0) ? 1.0 : -1.0) * (k - 1.0) / k * pw;
      pw *= x;
    }
    return sum;
  }
  return (lp - x / (1.0 + x)) / (x * x);
}

// (1/(1+x)^2 - 2 g(x)) / x
double h_term(double x, double g) {
  if (std::fabs(x) < 1e-2) {
    double sum = 0.0, pw = 1.0;
    for (int k = 1; k < 11; ++k) {
      sum += ((k % 2 == 0) ? 1.0 : -1.0) * k * (k + 1.0) / (k + 2.0) * pw;
      pw *= x;
    }
    return sum;
  }
  const double w = 1.0 + x;
  return (1.0 / (w * w) - 2.0 * g) / x;
}

void validate_sample(std::span<const double> y) {
  if (y.size() < 2) throw InsufficientDataError("GPD fit needs at least 2 exceedances");
  for (double v : y) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("GPD fit requires finite positive exceedances");
    }
  }
}

std::vector<double> sorted_copy(std::span<const double> y) {
  std::vector<double> s(y.begin(), y.end());
  std::sort(s.begin(), s.end());
  return s;
}

double mean_of(std::span<const double> y) {
  return std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
}

GpdParams from_internal(const detail::Vec2& x) { return {std::exp(x[0]), x[1], 0.0}; }
detail::Vec2 to_internal(const GpdParams& p) { return {std::log(p.scale), p.shape}; }

// Gradient and Hessian of the NLL in (log scale, shape).
struct LogScaleDerivs {
  double value;
  std::array<double, 2> grad;
  std::array<double, 3> hess;  // {aa, a-shape, shape-shape}
};

LogScaleDerivs log_scale_derivs(const GpdParams& p, std::span<const double> y) {
  const NllDerivatives d = nll_derivatives(p, y);
  const double s = p.scale;
  return {d.value,
          {s * d.d_scale, d.d_shape},
          {s * s * d.d_scale_scale + s * d.d_scale, s * d.d_scale_shape, d.d_shape_shape}};
}

struct NewtonOutcome {
  GpdParams params;
  double value = kInf;
  int iterations = 0;
  bool converged = false;
};

NewtonOutcome newton_mle(GpdParams start, std::span<const double> y) {
  NewtonOutcome out;
  out.params = start;
  LogScaleDerivs cur = log_scale_derivs(start, y);
  if (!std::isfinite(cur.value)) return out;
  detail::Vec2 x = to_internal(start);
  const double n = static_cast<double>(y.size());

  for (out.iterations = 0; out.iterations < kMaxIterations; ++out.iterations) {
    const auto& g = cur.grad;
    auto [haa, hab, hbb] = cur.hess;
    // Levenberg shift until positive definite.
    double lambda = 0.0;
    const double diag = std::max({std::fabs(haa), std::fabs(hbb), 1e-8 * n});
    while (!(haa + lambda > 0 && (haa + lambda) * (hbb + lambda) - hab * hab > 0)) {
      lambda = lambda == 0.0 ? 1e-6 * diag : lambda * 10.0;
      if (lambda > 1e12 * diag) break;
    }
    haa += lambda;
    hbb += lambda;
    const double det = haa * hbb - hab * hab;
    detail::Vec2 dir{-(hbb * g[0] - hab * g[1]) / det, -(-hab * g[0] + haa * g[1]) / det};
    if (!std::isfinite(dir[0]) || !std::isfinite(dir[1])) return out;
    // Keep single steps modest in the shape direction.
    const double cap = std::max(std::fabs(dir[0]) / 2.0, std::fabs(dir[1]) / 0.5);
    if (cap > 1.0) {
      dir[0] /= cap;
      dir[1] /= cap;
    }
    const double slope = g[0] * dir[0] + g[1] * dir[1];

    double t = 1.0;
    bool accepted = false;
    LogScaleDerivs next{};
    detail::Vec2 xn{};
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      xn = {x[0] + t * dir[0], x[1] + t * dir[1]};
      const double v = neg_log_likelihood(from_internal(xn), y);
      if (std::isfinite(v) && v <= cur.value + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    const double step = t * std::max(std::fabs(dir[0]), std::fabs(dir[1]));
    if (!accepted) {
      // Stalled at working precision; converged if the gradient is flat.
      out.converged = std::max(std::fabs(g[0]), std::fabs(g[1])) <= kGradTol * n;
      break;
    }
    next = log_scale_derivs(from_internal(xn), y);
    const double drop = cur.value - next.value;
    x = xn;
    cur = next;
    out.params = from_internal(x);
    if (x[1] < -1.0) break;  // likelihood unbounded in this region
    if (step <= 1e-10 || (drop <= 1e-10 && step <= 1e-8)) {
      out.converged = std::max(std::fabs(cur.grad[0]), std::fabs(cur.grad[1])) <= kGradTol * n;
      break;
    }
  }
  out.params = from_internal(x);
  out.value = cur.value;
  return out;
}

std::optional<Covariance2> invert_if_pd(double hss, double hsx, double hxx) {
  const double det = hss * hxx - hsx * hsx;
  if (!(hss > 0 && det > 0) || !std::isfinite(det)) return std::nullopt;
  return Covariance2{hxx / det, -hsx / det, hss / det};
}

bool all_equal(std::span<const double> s) {
  return std::all_of(s.begin(), s.end(), [&](double v) { return v == s.front(); });
}

FitResult degenerate_result(FitMethod m, std::span<const double> sorted) {
  FitResult r;
  r.method = m;
  r.n = sorted.size();
  r.params = {mean_of(sorted), 0.0, 0.0};
  r.objective_value = kInf;
  r.converged = false;
  return r;
}

}  // namespace

std::string_view to_string(FitMethod m) { return m == FitMethod::Mle ? "MLE" : "MPS"; }

double Covariance2::se_scale() const { return std::sqrt(var_scale); }
double Covariance2::se_shape() const { return std::sqrt(var_shape); }

double neg_log_likelihood(const GpdParams& params, std::span<const double> y) {
  if (y.empty()) return 0.0;
  if (!(params.scale > 0.0) || !std::isfinite(params.shape)) return kInf;
  const double log_scale = std::log(params.scale);
  const double xi = params.shape;
  double total = 0.0;
  if (std::fabs(xi) < kShapeZeroTol) {
    for (double v : y) {
      if (!(v >= 0.0)) return kInf;
      total += log_scale + v / params.scale;
    }
    return total;
  }
  const double c = 1.0 + 1.0 / xi;
  const double ratio = xi / params.scale;
  for (double v : y) {
    const double x = ratio * v;
    if (!(v >= 0.0) || !(x > -1.0)) return kInf;
    total += log_scale + c * std::log1p(x);
  }
  return total;
}

NllDerivatives nll_derivatives(const GpdParams& params, std::span<const double> y) {
  NllDerivatives d;
  const double s = params.scale;
  const double xi = params.shape;
  if (!(s > 0.0) || !std::isfinite(xi)) {
    d.value = kInf;
    return d;
  }
  const double log_s = std::log(s);
  for (double v : y) {
    const double z = v / s;
    const double x = xi * z;
    const double w = 1.0 + x;
    if (!(w > 0.0) || !(v >= 0.0)) {
      d.value = kInf;
      return d;
    }
    const double lp = std::log1p(x);
    const double l1 = (x == 0.0) ? 1.0 : lp / x;
    d.value += log_s + lp + z * l1;
    const double w2 = w * w;
    // Derivatives of the log-density, accumulated with a sign flip.
    d.d_scale -= (z - 1.0) / (s * w);
    const double g = g_term(x, lp);
    d.d_shape -= z * z * g - z / w;
    d.d_scale_scale += (w + (z - 1.0) * (2.0 + x)) / (s * s * w2);
    d.d_scale_shape += (z - 1.0) * z / (s * w2);
    d.d_shape_shape -= z * z * z * h_term(x, g) + z * z / w2;
  }
  return d;
}

GpdParams pwm_estimate(std::span<const double> sorted) {
  const std::size_t n = sorted.size();
  const double a0 = mean_of(sorted);
  double a1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    a1 += static_cast<double>(n - 1 - i) / static_cast<double>(n - 1) * sorted[i];
  }
  a1 /= static_cast<double>(n);
  const double denom = a0 - 2.0 * a1;
  if (!(denom > 0.0) || !(a0 > 0.0)) return {a0 > 0.0 ? a0 : 1.0, 0.0, 0.0};
  double shape = std::clamp(2.0 - a0 / denom, -0.9, 1.5);
  double scale = 2.0 * a0 * a1 / denom;
  if (!(scale > 0.0)) scale = a0;
  if (shape < 0.0) scale = std::max(scale, -shape * sorted.back() * 1.05);
  return {scale, shape, 0.0};
}

double moran_objective(const GpdParams& params, std::span<const double> sorted) {
  if (!(params.scale > 0.0) || !std::isfinite(params.shape)) return kInf;
  double total = 0.0;
  double prev_log_surv = 0.0;  // log S(y_(0)) with y_(0) = 0
  double prev = 0.0;
  bool first = true;
  for (double v : sorted) {
    const double ls = gpd_log_survival(v, params);
    if (!std::isfinite(ls)) return kInf;
    if (!first && v == prev) {
      total -= gpd_logpdf(v, params);
    } else {
      const double gap = ls - prev_log_surv;
      total -= prev_log_surv + std::log(-std::expm1(gap));
    }
    prev_log_surv = ls;
    prev = v;
    first = false;
  }
  total -= prev_log_surv;
  return std::isfinite(total) ? total : kInf;
}

FitResult fit_mle(std::span<const double> exceedances) {
  validate_sample(exceedances);
  const std::vector<double> sorted = sorted_copy(exceedances);
  if (all_equal(sorted)) return degenerate_result(FitMethod::Mle, sorted);
  std::span<const double> y(sorted);

  const GpdParams expo{mean_of(y), 0.0, 0.0};
  const GpdParams pwm = pwm_estimate(y);
  const double f_expo = neg_log_likelihood(expo, y);
  const double f_pwm = neg_log_likelihood(pwm, y);

  NewtonOutcome best = newton_mle(f_pwm < f_expo ? pwm : expo, y);
  if (!best.converged) {
    auto f = [&](const detail::Vec2& x) { return neg_log_likelihood(from_internal(x), y); };
    detail::MinimizeResult nm_best;
    nm_best.value = kInf;
    for (const GpdParams& start : {expo, pwm}) {
      auto r = detail::nelder_mead(f, to_internal(start), {0.1, 0.1});
      if (r.value < nm_best.value && r.x[1] > -1.0) nm_best = r;
    }
    if (std::isfinite(nm_best.value)) {
      NewtonOutcome polished = newton_mle(from_internal(nm_best.x), y);
      polished.iterations += nm_best.iterations;
      if (polished.converged || polished.value < best.value) best = polished;
    }
  }

  FitResult r;
  r.method = FitMethod::Mle;
  r.n = y.size();
  r.params = best.params;
  r.objective_value = best.value;
  r.iterations = best.iterations;
  r.converged = best.converged && std::isfinite(best.value) && best.params.shape > kShapeFloor &&
                best.iterations < kMaxIterations;
  if (r.converged && r.params.shape > -0.5) {
    const NllDerivatives d = nll_derivatives(r.params, y);
    r.covariance = invert_if_pd(d.d_scale_scale, d.d_scale_shape, d.d_shape_shape);
  }
  return r;
}

FitResult fit_mps(std::span<const double> exceedances) {
  validate_sample(exceedances);
  const std::vector<double> sorted = sorted_copy(exceedances);
  if (all_equal(sorted)) return degenerate_result(FitMethod::Mps, sorted);
  std::span<const double> y(sorted);

  auto f = [&](const detail::Vec2& x) { return moran_objective(from_internal(x), y); };
  const GpdParams expo{mean_of(y), 0.0, 0.0};
  const GpdParams pwm = pwm_estimate(y);

  detail::MinimizeResult best;
  best.value = kInf;
  int iterations = 0;
  for (const GpdParams& start : {expo, pwm}) {
    auto r = detail::nelder_mead(f, to_internal(start), {0.1, 0.1});
    iterations += r.iterations;
    if (r.value < best.value) best = r;
  }
  bool ok = std::isfinite(best.value) && best.iterations < kMaxIterations;
  if (ok) {
    auto polished = detail::bfgs(f, best.x);
    iterations += polished.iterations;
    if (polished.value <= best.value) {
      best.x = polished.x;
      best.value = polished.value;
    }
    ok = polished.iterations < kMaxIterations;
  }

  FitResult r;
  r.method = FitMethod::Mps;
  r.n = y.size();
  r.params = from_internal(best.x);
  r.objective_value = best.value;
  r.iterations = iterations;
  if (ok) {
    const auto g = detail::numeric_gradient(f, best.x);
    ok = std::max(std::fabs(g[0]), std::fabs(g[1])) <= 1e-4 * static_cast<double>(y.size() + 1);
  }
  r.converged = ok && r.params.shape > kShapeFloor;
  if (r.converged && r.params.shape > -0.5) {
    auto fs = [&](const detail::Vec2& p) { return moran_objective({p[0], p[1], 0.0}, y); };
    const auto h = detail::numeric_hessian(fs, {r.params.scale, r.params.shape});
    r.covariance = invert_if_pd(h[0], h[1], h[2]);
  }
  return r;
}

}  // namespace potsel
