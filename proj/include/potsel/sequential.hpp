#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "potsel/gof.hpp"

namespace potsel {

enum class StoppingRule { ForwardStop, StrongStop, Unadjusted };

[[nodiscard]] std::string_view to_string(StoppingRule r);
[[nodiscard]] StoppingRule stopping_rule_from_string(std::string_view s);

/// Outcome of a stopping rule over ordered p-values p_1..p_l.
///
/// Hypotheses 1..k_hat are rejected. `chosen` is the zero-based index of the
/// selected threshold (equal to k_hat), absent when every hypothesis is
/// rejected.
struct StoppingDecision {
  StoppingRule rule = StoppingRule::ForwardStop;
  double alpha = 0.05;
  std::size_t k_hat = 0;
  std::optional<std::size_t> chosen;
  bool all_rejected = false;
};

/// k_hat = max{k : -(1/k) sum_{i<=k} log(1 - p_i) <= alpha}.
[[nodiscard]] StoppingDecision forward_stop(std::span<const double> p, double alpha);
/// k_hat = max{k : exp(sum_{j>=k} log(p_j)/j) <= alpha k / l}.
[[nodiscard]] StoppingDecision strong_stop(std::span<const double> p, double alpha);
/// Reject while p_i <= alpha, stop at the first acceptance.
[[nodiscard]] StoppingDecision unadjusted_stop(std::span<const double> p, double alpha);
[[nodiscard]] StoppingDecision apply_rule(StoppingRule rule, std::span<const double> p, double alpha);

/// One tested threshold.
struct LadderRung {
  double threshold = 0.0;
  std::size_t n_exceed = 0;
  TestResult result;
};

struct SkippedThreshold {
  double threshold = 0.0;
  std::size_t n_exceed = 0;
  std::string reason;
};

struct ThresholdLadder {
  std::vector<LadderRung> rungs;
  std::vector<SkippedThreshold> skipped;

  [[nodiscard]] std::vector<double> p_values() const;
};

struct LadderOptions {
  TestKind test = TestKind::AD;
  StoppingRule rule = StoppingRule::ForwardStop;
  double alpha = 0.05;
  // Required for the AD and CVM tests; kind must match the test.
  const NullTable* table = nullptr;
  std::size_t min_exceedances = 10;
  int score_k = 9;
  BootstrapOptions bootstrap{};
  unsigned workers = 1;
};

struct LadderOutcome {
  ThresholdLadder ladder;
  StoppingDecision decision;
  // Fit at the chosen threshold, absent when all thresholds are rejected.
  std::optional<FitResult> chosen_fit;
  std::optional<double> chosen_threshold;
};

/// Runs a test at a single threshold on raw data (excesses x - u for x > u).
[[nodiscard]] TestResult run_test(std::span<const double> exceedances, const LadderOptions& opts);

/// Tests every candidate threshold and applies the stopping rule.
///
/// Thresholds are sorted and de-duplicated. A threshold is skipped (and
/// recorded) when it leaves fewer than `min_exceedances` excesses or when its
/// test is unavailable; the rule is applied to the remaining p-values in
/// order. Throws LadderError when fewer than 2 thresholds remain.
[[nodiscard]] LadderOutcome run_ladder(std::span<const double> data, std::span<const double> thresholds,
                                       const LadderOptions& opts);

/// Excesses x - u over threshold u (strict exceedances).
[[nodiscard]] std::vector<double> exceedances_over(std::span<const double> data, double u);

/// Order-statistic thresholds x_(ceil(n q / 100)) for percentiles q in (0, 100).
/// Thresholds sit on data points, so the strict exceedances above each are
/// exactly the upper order statistics.
[[nodiscard]] std::vector<double> percentile_thresholds(std::span<const double> data,
                                                        std::span<const double> percents);

}  // namespace potsel
