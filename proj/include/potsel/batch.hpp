#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "potsel/estimation.hpp"
#include "potsel/gof.hpp"
#include "potsel/return_levels.hpp"
#include "potsel/sequential.hpp"
#include "potsel/station.hpp"

namespace potsel {

/// 75, 77, ..., 97 then 97.1, 97.2, ..., 99.5 (37 values).
[[nodiscard]] std::vector<double> nominal_percentiles();

struct PercentileLadder {
  std::vector<double> percents;
  std::vector<double> thresholds;
};

/// Order-statistic thresholds at the nominal percentiles. When ties make
/// several percentiles share a threshold only the lowest percentile is kept.
/// Throws LadderError when fewer than two distinct thresholds remain and
/// InsufficientDataError for an empty series.
[[nodiscard]] PercentileLadder percentile_ladder(std::span<const double> values,
                                                 std::span<const double> percents);
[[nodiscard]] PercentileLadder percentile_ladder(std::span<const double> values);

/// Ferro-Segers intervals estimator of the extremal index from the times of
/// the strict exceedances of `threshold`, clamped to (0, 1]. `times` are
/// increasing observation times (days). Throws EstimateUnavailableError for
/// fewer than two exceedances.
[[nodiscard]] double extremal_index(std::span<const double> values, std::span<const long> times, double threshold);
/// Same with consecutive integer times.
[[nodiscard]] double extremal_index(std::span<const double> values, double threshold);

enum class SiteStatus { Ok, AllRejected, InsufficientData, FitFailed };
[[nodiscard]] std::string_view to_string(SiteStatus s);

struct BatchConfig {
  TestKind test = TestKind::AD;
  StoppingRule rule = StoppingRule::ForwardStop;
  double alpha = 0.05;
  std::vector<double> periods{50, 100, 250};
  CiMethod ci = CiMethod::Profile;
  double ci_level = 0.95;
  std::string table_path;
  ScreenOptions screen{};
  unsigned workers = 1;
  std::uint64_t seed = 20160603;
  double theta_warn = 0.9;
  std::size_t bootstrap_size = 999;
};

/// Applies one `key = value` setting. Keys: test, rule, alpha, periods,
/// ci, ci_level, table, min_years, season, completeness, workers, seed,
/// theta_warn, bootstrap. Throws DomainError on an unknown key or bad value.
void apply_setting(BatchConfig& cfg, const std::string& key, const std::string& value);
/// Reads `key = value` lines; blank lines and lines starting with '#' are ignored.
void read_config(std::istream& in, BatchConfig& cfg);
void load_config(const std::string& path, BatchConfig& cfg);

struct SiteReturnLevel {
  double period = 0.0;
  double estimate = std::numeric_limits<double>::quiet_NaN();
  double low = std::numeric_limits<double>::quiet_NaN();
  double high = std::numeric_limits<double>::quiet_NaN();
};

struct SiteResult {
  std::string station_id;
  SiteStatus status = SiteStatus::InsufficientData;
  std::string message;
  std::size_t years_available = 0;
  std::size_t n_retained = 0;
  // Percentile ladder actually tested (after deduplication and skips).
  std::vector<double> tested_percents;
  std::vector<double> tested_thresholds;
  std::vector<double> p_values;
  std::size_t skipped = 0;
  // k_hat of ForwardStop, StrongStop and the unadjusted rule, in that order.
  std::array<std::size_t, 3> k_hat_by_rule{};
  StoppingRule rule = StoppingRule::ForwardStop;
  TestKind test = TestKind::AD;
  std::optional<double> chosen_percentile;
  std::optional<double> chosen_threshold;
  std::size_t n_exceed = 0;
  std::optional<FitResult> fit;
  double zeta = std::numeric_limits<double>::quiet_NaN();
  double theta = std::numeric_limits<double>::quiet_NaN();
  bool theta_warning = false;
  std::vector<SiteReturnLevel> return_levels;
};

/// Screen, ladder, test, stopping rule, fit and return levels for one
/// site. Failures become statuses; nothing is thrown for bad data. The
/// table must match the test for AD and CVM.
[[nodiscard]] SiteResult run_site(const StationSeries& series, const BatchConfig& cfg, const NullTable* table);

struct BatchSummary {
  std::size_t sites = 0;
  std::array<std::size_t, 4> by_status{};
  std::vector<std::string> unreadable;
};

/// Every .dly and .csv file of `input_dir`; sites processed on cfg.workers
/// threads and written to `output_csv` sorted by station id. Unreadable or
/// malformed files are reported in the summary. Throws std::runtime_error
/// (and writes nothing) when the directory holds no station files.
BatchSummary run_batch(const std::string& input_dir, const std::string& output_csv, const BatchConfig& cfg,
                       const NullTable* table);

[[nodiscard]] std::vector<SiteResult> run_sites(const std::vector<StationSeries>& sites, const BatchConfig& cfg,
                                                const NullTable* table);

void write_results_header(std::ostream& out, const std::vector<double>& periods);
void write_result_row(std::ostream& out, const SiteResult& r, const std::vector<double>& periods);
void write_batch_summary(std::ostream& out, const BatchSummary& s);

}  // namespace potsel
