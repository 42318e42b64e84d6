#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "potsel/estimation.hpp"
#include "potsel/null_table.hpp"

namespace potsel {

enum class TestKind { AD, CVM, Moran, Score };

[[nodiscard]] std::string_view to_string(TestKind t);
[[nodiscard]] TestKind test_kind_from_string(std::string_view s);

struct TestResult {
  TestKind test = TestKind::AD;
  double statistic = 0.0;
  double p_value = 1.0;
  FitResult fit;
  std::size_t n = 0;
  // Moran: n; score: k.
  std::optional<int> dof;
  PValuePath path = PValuePath::Interpolated;
  // Set when some PIT value had to be clamped into [1e-12, 1 - 1e-12].
  bool pit_clamped = false;
  // Bootstrap p-values cannot go below 1/(B+1).
  std::optional<double> p_lower_bound;
};

inline constexpr double kPitClamp = 1e-12;

/// Sorted probability integral transform values.
struct PitSample {
  std::vector<double> z;
  bool clamped = false;
};

/// z_(i) = F(y_(i)) under `params`, sorted and clamped into [1e-12, 1-1e-12].
/// Points beyond a finite upper endpoint map to 1 - 1e-12 and set `clamped`.
[[nodiscard]] PitSample pit_transform(std::span<const double> exceedances, const GpdParams& params);

/// Anderson-Darling A_n^2.
[[nodiscard]] double ad_statistic(const PitSample& z);
/// Cramer-von Mises W_n^2.
[[nodiscard]] double cvm_statistic(const PitSample& z);
[[nodiscard]] double edf_statistic(StatisticKind kind, const PitSample& z);

struct BootstrapOptions {
  std::size_t size = 999;
  std::uint64_t seed = 20160603;
};

/// MLE fit, PIT, statistic and p-value from the table when the fitted shape
/// is on its grid, otherwise from the parametric bootstrap. The table must be
/// of the matching kind. Throws TestUnavailableError if the fit fails.
[[nodiscard]] TestResult ad_test(std::span<const double> exceedances, const NullTable& table,
                                 const BootstrapOptions& boot = {});
[[nodiscard]] TestResult cvm_test(std::span<const double> exceedances, const NullTable& table,
                                  const BootstrapOptions& boot = {});

/// Centering and scaling constants of Moran's statistic for sample size n.
struct MoranConstants {
  double mean = 0.0;
  double variance = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};
[[nodiscard]] MoranConstants moran_constants(std::size_t n);

/// Moran's test from the MPS fit; chi-square with n degrees of freedom.
[[nodiscard]] TestResult moran_test(std::span<const double> exceedances);

/// Rao score test of constant shape against a piecewise-constant shape with
/// k internal thresholds at the j/(k+1) sample quantiles of the excesses.
///
/// Within the alternative the scale follows the threshold-stability relation
/// across interval boundaries, so the density is continuous. The score of the
/// k+2 parameter model is analytic; the Fisher information is its expected
/// outer product under the restricted fit, integrated by quadrature.
/// Throws DomainError for k = 0 and TestUnavailableError when an interval
/// holds fewer than 5 points, the fit fails, the fitted shape is <= -0.5,
/// or the information is singular.
[[nodiscard]] TestResult score_test(std::span<const double> exceedances, int k = 9);

/// Score of the piecewise model at (scale, shape, ..., shape), order (scale_0, shape_0..shape_k).
[[nodiscard]] std::vector<double> piecewise_score(const GpdParams& restricted, std::span<const double> cuts,
                                                  std::span<const double> exceedances);
/// Expected information of n observations at the restricted point, row-major.
[[nodiscard]] std::vector<double> piecewise_information(const GpdParams& restricted,
                                                        std::span<const double> cuts, std::size_t n);

/// U' I^{-1} U for a symmetric positive definite I (row-major, dim x dim).
/// Throws TestUnavailableError if I is not positive definite.
[[nodiscard]] double score_statistic(std::span<const double> score, std::span<const double> information);

/// Log-likelihood of the piecewise-shape model. `params` = (scale_0, shape_0..shape_k),
/// `cuts` = the k internal thresholds (ascending, excess scale).
[[nodiscard]] double piecewise_loglik(std::span<const double> params, std::span<const double> cuts,
                                      std::span<const double> exceedances);

}  // namespace potsel
