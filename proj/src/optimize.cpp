#include "optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace potsel::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe(const Objective2& f, const Vec2& x) {
  const double v = f(x);
  return std::isfinite(v) ? v : kInf;
}

double step_for(double x) { return 1e-5 * (1.0 + std::fabs(x)); }

}  // namespace

MinimizeResult nelder_mead(const Objective2& f, Vec2 start, Vec2 step, const MinimizeOptions& opts) {
  std::array<Vec2, 3> pts{start, start, start};
  pts[1][0] += step[0];
  pts[2][1] += step[1];
  std::array<double, 3> vals{};
  for (int i = 0; i < 3; ++i) vals[i] = safe(f, pts[i]);

  MinimizeResult res;
  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    std::array<int, 3> idx{0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return vals[a] < vals[b]; });
    const int best = idx[0], mid = idx[1], worst = idx[2];

    const double spread = std::max(std::fabs(pts[worst][0] - pts[best][0]),
                                   std::fabs(pts[worst][1] - pts[best][1]));
    const double value_tol = opts.value_tol * (1.0 + std::fabs(vals[best]));
    if (std::isfinite(vals[worst]) && vals[worst] - vals[best] <= value_tol && spread <= opts.param_tol) {
      res.converged = true;
      break;
    }

    const Vec2 centroid{(pts[best][0] + pts[mid][0]) / 2, (pts[best][1] + pts[mid][1]) / 2};
    auto along = [&](double t) {
      return Vec2{centroid[0] + t * (pts[worst][0] - centroid[0]),
                  centroid[1] + t * (pts[worst][1] - centroid[1])};
    };

    const Vec2 reflected = along(-1.0);
    const double fr = safe(f, reflected);
    if (fr < vals[best]) {
      const Vec2 expanded = along(-2.0);
      const double fe = safe(f, expanded);
      if (fe < fr) {
        pts[worst] = expanded;
        vals[worst] = fe;
      } else {
        pts[worst] = reflected;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[mid]) {
      pts[worst] = reflected;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Vec2 contracted = along(outside ? -0.5 : 0.5);
    const double fc = safe(f, contracted);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = contracted;
      vals[worst] = fc;
      continue;
    }
    for (int i : {mid, worst}) {
      pts[i] = {pts[best][0] + 0.5 * (pts[i][0] - pts[best][0]),
                pts[best][1] + 0.5 * (pts[i][1] - pts[best][1])};
      vals[i] = safe(f, pts[i]);
    }
  }
  const int best = static_cast<int>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  res.x = pts[best];
  res.value = vals[best];
  return res;
}

Vec2 numeric_gradient(const Objective2& f, const Vec2& x) {
  Vec2 g{};
  for (int i = 0; i < 2; ++i) {
    const double h = step_for(x[i]);
    Vec2 up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    g[i] = (f(up) - f(dn)) / (2 * h);
  }
  return g;
}

std::array<double, 3> numeric_hessian(const Objective2& f, const Vec2& x) {
  const double h0 = step_for(x[0]), h1 = step_for(x[1]);
  const double f0 = f(x);
  auto at = [&](double d0, double d1) { return f(Vec2{x[0] + d0, x[1] + d1}); };
  const double h00 = (at(h0, 0) - 2 * f0 + at(-h0, 0)) / (h0 * h0);
  const double h11 = (at(0, h1) - 2 * f0 + at(0, -h1)) / (h1 * h1);
  const double h01 = (at(h0, h1) - at(h0, -h1) - at(-h0, h1) + at(-h0, -h1)) / (4 * h0 * h1);
  return {h00, h01, h11};
}

MinimizeResult bfgs(const Objective2& f, Vec2 start, const MinimizeOptions& opts) {
  MinimizeResult res;
  res.x = start;
  res.value = safe(f, start);
  if (!std::isfinite(res.value)) return res;

  // Inverse Hessian approximation, row-major 2x2.
  std::array<double, 4> inv{1, 0, 0, 1};
  Vec2 g = numeric_gradient(f, res.x);
  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    Vec2 dir{-(inv[0] * g[0] + inv[1] * g[1]), -(inv[2] * g[0] + inv[3] * g[1])};
    double slope = dir[0] * g[0] + dir[1] * g[1];
    if (!(slope < 0)) {
      inv = {1, 0, 0, 1};
      dir = {-g[0], -g[1]};
      slope = -(g[0] * g[0] + g[1] * g[1]);
      if (slope == 0) {
        res.converged = true;
        break;
      }
    }
    double t = 1.0;
    Vec2 next{};
    double fnext = kInf;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      next = {res.x[0] + t * dir[0], res.x[1] + t * dir[1]};
      fnext = safe(f, next);
      if (fnext <= res.value + 1e-4 * t * slope) break;
    }
    if (!(fnext <= res.value)) {
      // No descent possible at working precision.
      res.converged = true;
      break;
    }
    const Vec2 s{next[0] - res.x[0], next[1] - res.x[1]};
    const Vec2 gnext = numeric_gradient(f, next);
    const Vec2 y{gnext[0] - g[0], gnext[1] - g[1]};
    const double drop = res.value - fnext;
    res.x = next;
    res.value = fnext;
    g = gnext;
    const double value_tol = opts.value_tol * (1.0 + std::fabs(fnext));
    if (drop <= value_tol && std::max(std::fabs(s[0]), std::fabs(s[1])) <= opts.param_tol) {
      res.converged = true;
      break;
    }
    const double sy = s[0] * y[0] + s[1] * y[1];
    if (sy > 1e-300) {
      const Vec2 hy{inv[0] * y[0] + inv[1] * y[1], inv[2] * y[0] + inv[3] * y[1]};
      const double yhy = y[0] * hy[0] + y[1] * hy[1];
      const double c = (sy + yhy) / (sy * sy);
      inv[0] += c * s[0] * s[0] - (hy[0] * s[0] + s[0] * hy[0]) / sy;
      inv[1] += c * s[0] * s[1] - (hy[0] * s[1] + s[0] * hy[1]) / sy;
      inv[2] += c * s[1] * s[0] - (hy[1] * s[0] + s[1] * hy[0]) / sy;
      inv[3] += c * s[1] * s[1] - (hy[1] * s[1] + s[1] * hy[1]) / sy;
    }
  }
  return res;
}

}  // namespace potsel::detail
