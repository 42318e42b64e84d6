#pragma once

// Small derivative-free and quasi-Newton minimizers for two-parameter
// objectives. Internal to the library.

#include <array>
#include <functional>

namespace potsel::detail {

using Vec2 = std::array<double, 2>;
using Objective2 = std::function<double(const Vec2&)>;

struct MinimizeResult {
  Vec2 x{};
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct MinimizeOptions {
  int max_iterations = 500;
  // Relative to 1 + |objective|.
  double value_tol = 1e-10;
  double param_tol = 1e-8;
};

/// Nelder-Mead simplex; non-finite objective values are treated as +inf.
MinimizeResult nelder_mead(const Objective2& f, Vec2 start, Vec2 step,
                           const MinimizeOptions& opts = {});

/// BFGS with central-difference gradients and backtracking line search.
MinimizeResult bfgs(const Objective2& f, Vec2 start, const MinimizeOptions& opts = {});

/// Central-difference gradient with step 1e-5 * (1 + |x_i|).
Vec2 numeric_gradient(const Objective2& f, const Vec2& x);

/// Central-difference Hessian (same step rule); entries {h00, h01, h11}.
std::array<double, 3> numeric_hessian(const Objective2& f, const Vec2& x);

}  // namespace potsel::detail
