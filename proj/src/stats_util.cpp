#include "potsel/stats_util.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "potsel/errors.hpp"

namespace potsel {

double quantile_type7(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw DomainError("quantile probability outside [0,1]");
  const double h = static_cast<double>(sorted.size() - 1) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double chi_square_upper(double x, double dof) {
  if (!(dof > 0)) throw DomainError("chi-square needs positive degrees of freedom");
  if (std::isnan(x)) throw DomainError("chi-square tail of NaN");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

double chi_square_quantile(double prob, double dof) {
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), prob);
}

}  // namespace potsel
