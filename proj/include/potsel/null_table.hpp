#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace potsel {

enum class StatisticKind { AD, CVM };

[[nodiscard]] std::string_view to_string(StatisticKind k);
[[nodiscard]] StatisticKind statistic_kind_from_string(std::string_view s);

enum class PValuePath { Interpolated, TailExtrapolated, BelowTable, Bootstrap, ChiSquare };

[[nodiscard]] std::string_view to_string(PValuePath p);

struct NullTableMeta {
  std::size_t replicates = 0;
  std::size_t sample_size = 0;
  std::uint64_t seed = 0;
  // Non-converged fits discarded per shape row.
  std::vector<std::size_t> failed_fits;
  std::string quantile_type = "type7";
  // Free text supplied by the caller; empty for reproducible builds.
  std::string built;
};

/// Upper-tail quantiles of the A^2 or W^2 null distribution on a shape grid.
///
/// quantiles[r][j] is the statistic value exceeded with probability
/// upper_tail_probs[j] when the true shape is xi_grid[r]. Probabilities run
/// from large to small, so each row increases strictly.
struct NullTable {
  StatisticKind kind = StatisticKind::AD;
  std::vector<double> xi_grid;
  std::vector<double> upper_tail_probs;
  std::vector<std::vector<double>> quantiles;
  NullTableMeta meta;

  /// Throws TableBuildError describing the first broken invariant.
  void validate() const;
};

/// -0.5, -0.4, ..., 1.0
[[nodiscard]] std::vector<double> default_xi_grid();
/// 0.999, 0.998, ..., 0.001
[[nodiscard]] std::vector<double> default_upper_tail_probs();

struct TableBuildOptions {
  std::vector<double> xi_grid = default_xi_grid();
  std::vector<double> upper_tail_probs = default_upper_tail_probs();
  std::size_t replicates = 100000;
  std::size_t sample_size = 1000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string built;
};

/// Monte Carlo build of one table: for every shape, draw samples from
/// GPD(1, shape), fit by MLE, and record the statistic's empirical upper
/// quantiles. Non-converged fits are dropped and counted; a row losing more
/// than 5% throws TableBuildError. Replicates are split in chunks of 1000
/// with seeds derive_seed(seed, row << 32 | chunk), so the output does not
/// depend on the worker count.
[[nodiscard]] NullTable build_table(StatisticKind kind, const TableBuildOptions& opts);

/// Builds the AD and CVM tables from the same simulated fits.
[[nodiscard]] std::pair<NullTable, NullTable> build_tables(const TableBuildOptions& opts);

struct PValue {
  double p = 1.0;
  PValuePath path = PValuePath::Interpolated;
};

/// Interpolated p-value. Linear in shape between rows, log-linear in the
/// probability along a row; below the first column p = that column's
/// probability, beyond the last column tail_extrapolate takes over.
/// Throws TableRangeError when xi_hat is outside the grid.
[[nodiscard]] PValue pvalue_lookup(double statistic, double xi_hat, const NullTable& table);

/// Exponential-tail p-value: least-squares line of -log p on the quantiles
/// whose probabilities lie in [0.001, 0.05], evaluated at `statistic`;
/// floored at 1e-300.
[[nodiscard]] double tail_extrapolate(double statistic, std::span<const double> row,
                                      std::span<const double> upper_tail_probs);

struct BootstrapPValue {
  double p = 1.0;
  double lower_bound = 0.0;
  std::size_t failed_fits = 0;
};

/// Parametric bootstrap p-value (1 + #{T_b >= T}) / (B + 1) over successful
/// refits. Throws TestUnavailableError when the fit to the data fails or
/// more than 20% of bootstrap refits fail.
[[nodiscard]] BootstrapPValue bootstrap_pvalue(std::span<const double> exceedances, StatisticKind kind,
                                               std::size_t bootstrap_size, std::uint64_t seed);

/// Same counting rule given the observed and bootstrap statistics.
[[nodiscard]] double bootstrap_count_pvalue(double observed, std::span<const double> bootstrap_stats);

void write_table(std::ostream& out, const NullTable& table);
[[nodiscard]] NullTable read_table(std::istream& in);
void save_table(const std::string& path, const NullTable& table);
[[nodiscard]] NullTable load_table(const std::string& path);

}  // namespace potsel
