#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "potsel/gof.hpp"
#include "potsel/null_table.hpp"
#include "potsel/rng.hpp"
#include "potsel/sequential.hpp"

namespace potsel {

enum class GeneratorKind { Gamma, LogNormal, Weibull, GpdMix, Gpd, BetaGpdMix };

/// A data-generating scheme. Parameters by kind:
/// Gamma(a, b) shape/scale, LogNormal(a, b) log-mean/log-sd, Weibull(a, b)
/// scale/shape, GpdMix(a, b) shapes of two unit-scale components, Gpd(a, b)
/// scale/shape. BetaGpdMix ignores a and b.
struct Generator {
  GeneratorKind kind = GeneratorKind::Gpd;
  double a = 1.0;
  double b = 0.25;

  [[nodiscard]] std::string name() const;
  [[nodiscard]] std::vector<double> sample(std::size_t n, Rng& rng) const;
};

[[nodiscard]] Generator gamma_generator(double shape = 2.0, double scale = 1.0);
[[nodiscard]] Generator lognormal_generator(double mu = 0.0, double sigma = 1.0);
[[nodiscard]] Generator weibull_generator(double scale, double shape);
[[nodiscard]] Generator gpd_mix_generator(double shape_a, double shape_b);
[[nodiscard]] Generator gpd_generator(double scale, double shape);

/// The eight schemes of the power study, null last.
[[nodiscard]] std::vector<Generator> power_study_generators();

/// n1 points from 5 Beta(2, 1) followed by n2 points from 5 + GPD(2, 0.25).
[[nodiscard]] std::vector<double> mixture_generator(std::size_t n1, std::size_t n2, Rng& rng);
[[nodiscard]] std::vector<double> mixture_generator(std::size_t n1, std::size_t n2, std::uint64_t seed);

inline constexpr double kMixtureChangepoint = 5.0;
inline constexpr GpdParams kMixtureTail{2.0, 0.25, 5.0};

struct Scenario {
  Generator generator;
  std::size_t n = 100;
  std::size_t replicates = 2000;
  std::uint64_t seed = 1;

  /// Throws DomainError unless replicates >= 100 and n >= 10.
  void validate() const;
};

struct StudyTables {
  const NullTable* ad = nullptr;
  const NullTable* cvm = nullptr;
};

struct PowerOptions {
  std::vector<TestKind> tests{TestKind::Score, TestKind::Moran, TestKind::AD, TestKind::CVM};
  double alpha = 0.05;
  StudyTables tables;
  int score_k = 9;
  BootstrapOptions bootstrap{};
  unsigned workers = 1;
};

/// Rejection rate with its binomial standard error sqrt(r (1 - r) / R).
struct RateCell {
  std::size_t hits = 0;
  std::size_t total = 0;

  [[nodiscard]] double rate() const;
  [[nodiscard]] double se() const;
};

struct PowerCell {
  std::string generator;
  std::size_t n = 0;
  TestKind test = TestKind::AD;
  RateCell rejections;
  // Samples dropped because the MLE failed; shared by every test of the scenario.
  std::size_t failed_fits = 0;
  // Samples on which this test could not be computed.
  std::size_t unavailable = 0;
};

struct PowerReport {
  double alpha = 0.05;
  std::vector<PowerCell> cells;
};

/// Each replicate is drawn with derive_seed(scenario.seed, replicate). A
/// sample whose MLE fails is removed for every test and counted.
[[nodiscard]] PowerReport power_study(const std::vector<Scenario>& scenarios, const PowerOptions& opts);

/// 0.01, 0.02, ..., 0.10
[[nodiscard]] std::vector<double> default_levels();

struct FwerOptions {
  std::vector<double> shapes{-0.25, 0.25};
  std::vector<std::size_t> sizes{50, 100, 200, 400};
  std::vector<double> percents{5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
  std::vector<double> levels = default_levels();
  TestKind test = TestKind::AD;
  StudyTables tables;
  std::size_t replicates = 2000;
  std::uint64_t seed = 1;
  BootstrapOptions bootstrap{};
  unsigned workers = 1;
};

struct FwerCell {
  double shape = 0.0;
  std::size_t n = 0;
  StoppingRule rule = StoppingRule::StrongStop;
  double level = 0.0;
  RateCell errors;
};

struct FwerSetting {
  double shape = 0.0;
  std::size_t n = 0;
  // Replicates whose ladder had fewer than two usable thresholds; they count as no rejection.
  std::size_t ladder_failures = 0;
};

struct FwerReport {
  std::vector<FwerSetting> settings;
  std::vector<FwerCell> cells;
};

/// Data from GPD(1, shape); every threshold hypothesis is true. StrongStop
/// errs when it rejects at least one threshold, the unadjusted rule when any
/// p-value is <= the level.
[[nodiscard]] FwerReport fwer_null_study(const FwerOptions& opts);

struct MisspecOptions {
  std::size_t replicates = 1000;
  std::size_t n1 = 500;
  std::size_t n2 = 500;
  std::size_t thresholds = 50;
  std::size_t step = 15;
  TestKind test = TestKind::AD;
  double alpha = 0.05;
  std::vector<double> levels = default_levels();
  std::vector<double> periods{50, 100, 250, 500};
  double obs_per_year = 365.0;
  double ci_level = 0.95;
  StudyTables tables;
  std::uint64_t seed = 1;
  BootstrapOptions bootstrap{};
  unsigned workers = 1;
};

/// Threshold k (1-based) of the misspecification ladder: 0 for k = 1,
/// otherwise the (step (k - 1))-th smallest point, so its strict exceedances
/// are the data with the step (k - 1) lowest points removed.
[[nodiscard]] std::vector<double> removal_thresholds(std::span<const double> data, std::size_t count,
                                                     std::size_t step);

struct ParameterMetrics {
  std::string parameter;
  double truth = 0.0;
  std::size_t count = 0;
  double mean_bias = 0.0;
  double mse = 0.0;
  double coverage = 0.0;
};

struct RuleSummary {
  StoppingRule rule = StoppingRule::ForwardStop;
  // k_hat_counts[k] = replicates rejecting exactly k thresholds.
  std::vector<std::size_t> k_hat_counts;
  double median_k_hat = 0.0;
  std::size_t all_rejected = 0;
  // Selected thresholds whose fit or interval was unavailable.
  std::size_t failed = 0;
  std::vector<ParameterMetrics> metrics;
};

struct ErrorCurvePoint {
  double level = 0.0;
  double fdr_forward = 0.0;
  double fdr_forward_se = 0.0;
  double fwer_strong = 0.0;
  double fwer_strong_se = 0.0;
};

struct MisspecReport {
  std::size_t replicates = 0;
  std::size_t ladder_failures = 0;
  std::vector<RuleSummary> rules;
  std::vector<ErrorCurvePoint> curve;
};

/// Ladder of removal_thresholds on mixture data. A threshold's hypothesis is
/// false while any Beta-part point exceeds it. Shape estimates are scored
/// with Wald intervals; return levels with profile-likelihood intervals,
/// using the exceedance rate n_u / (n1 + n2). True return levels come from
/// the GPD(2, 0.25) tail above 5 with rate n2 / (n1 + n2).
[[nodiscard]] MisspecReport misspec_study(const MisspecOptions& opts);

[[nodiscard]] double true_mixture_return_level(const MisspecOptions& opts, double period);

void write_power_csv(std::ostream& out, const PowerReport& r);
void write_fwer_csv(std::ostream& out, const FwerReport& r);
void write_misspec_kfreq_csv(std::ostream& out, const MisspecReport& r);
void write_misspec_curve_csv(std::ostream& out, const MisspecReport& r);
void write_misspec_metrics_csv(std::ostream& out, const MisspecReport& r);
void write_summary(std::ostream& out, const PowerReport& r);
void write_summary(std::ostream& out, const FwerReport& r);
void write_summary(std::ostream& out, const MisspecReport& r);

}  // namespace potsel
