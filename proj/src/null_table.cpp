#include "potsel/null_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "potsel/errors.hpp"
#include "potsel/estimation.hpp"
#include "potsel/gof.hpp"
#include "potsel/parallel.hpp"
#include "potsel/rng.hpp"
#include "potsel/stats_util.hpp"

namespace potsel {

namespace {

constexpr std::size_t kChunk = 1000;
constexpr double kFailLimit = 0.05;
constexpr double kBootstrapFailLimit = 0.20;
constexpr double kTailLo = 0.001, kTailHi = 0.05;

// Round to the 9 significant digits used by the table file, so a saved and
// reloaded table is identical to the built one.
double round9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

std::string join(const std::vector<double>& v, int digits) {
  std::string out;
  char buf[40];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, v[i]);
    if (i) out += ',';
    out += buf;
  }
  return out;
}

std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw TableBuildError("table file: bad number '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

struct RowStats {
  std::vector<double> ad, cvm;
  std::size_t failed = 0;
};

RowStats simulate_row(std::size_t row, double xi, const TableBuildOptions& opts) {
  const std::size_t chunks = (opts.replicates + kChunk - 1) / kChunk;
  std::vector<RowStats> per_chunk(chunks);
  parallel_for(chunks, opts.workers, [&](std::size_t c) {
    RowStats& out = per_chunk[c];
    Rng rng(derive_seed(opts.seed, (static_cast<std::uint64_t>(row) << 32) | c));
    const std::size_t count = std::min(kChunk, opts.replicates - c * kChunk);
    for (std::size_t r = 0; r < count; ++r) {
      const auto y = gpd_sample(opts.sample_size, {1.0, xi, 0.0}, rng);
      const FitResult fit = fit_mle(y);
      if (!fit.converged) {
        ++out.failed;
        continue;
      }
      const PitSample z = pit_transform(y, fit.params);
      out.ad.push_back(ad_statistic(z));
      out.cvm.push_back(cvm_statistic(z));
    }
  });
  RowStats merged;
  for (auto& c : per_chunk) {
    merged.ad.insert(merged.ad.end(), c.ad.begin(), c.ad.end());
    merged.cvm.insert(merged.cvm.end(), c.cvm.begin(), c.cvm.end());
    merged.failed += c.failed;
  }
  return merged;
}

std::vector<double> quantile_row(std::vector<double> stats, const std::vector<double>& probs) {
  std::sort(stats.begin(), stats.end());
  std::vector<double> row;
  row.reserve(probs.size());
  for (double p : probs) row.push_back(round9(quantile_type7(stats, 1.0 - p)));
  return row;
}

void check_options(const TableBuildOptions& opts) {
  if (opts.replicates < 10000) throw TableBuildError("table build needs at least 10^4 replicates");
  if (opts.sample_size < 100) throw TableBuildError("table build needs sample size >= 100");
  if (opts.xi_grid.empty()) throw TableBuildError("empty shape grid");
  if (opts.upper_tail_probs.size() < 2) throw TableBuildError("need at least two probabilities");
  for (std::size_t i = 1; i < opts.xi_grid.size(); ++i) {
    if (!(opts.xi_grid[i] > opts.xi_grid[i - 1])) throw TableBuildError("shape grid must be ascending and unique");
  }
  for (std::size_t i = 0; i < opts.upper_tail_probs.size(); ++i) {
    const double p = opts.upper_tail_probs[i];
    if (!(p > 0.0 && p < 1.0)) throw TableBuildError("probabilities must lie in (0,1)");
    if (i && !(p < opts.upper_tail_probs[i - 1])) {
      throw TableBuildError("upper-tail probabilities must be sorted descending");
    }
  }
}

}  // namespace

std::string_view to_string(StatisticKind k) { return k == StatisticKind::AD ? "AD" : "CVM"; }

StatisticKind statistic_kind_from_string(std::string_view s) {
  if (s == "AD" || s == "ad") return StatisticKind::AD;
  if (s == "CVM" || s == "cvm") return StatisticKind::CVM;
  throw DomainError("unknown statistic kind '" + std::string(s) + "'");
}

std::string_view to_string(PValuePath p) {
  switch (p) {
    case PValuePath::Interpolated: return "interpolated";
    case PValuePath::TailExtrapolated: return "tail_extrapolated";
    case PValuePath::BelowTable: return "below_table";
    case PValuePath::Bootstrap: return "bootstrap";
    case PValuePath::ChiSquare: return "chi_square";
  }
  return "?";
}

std::vector<double> default_xi_grid() {
  std::vector<double> g;
  for (int i = -5; i <= 10; ++i) g.push_back(i / 10.0);
  return g;
}

std::vector<double> default_upper_tail_probs() {
  std::vector<double> p;
  for (int i = 999; i >= 1; --i) p.push_back(i / 1000.0);
  return p;
}

void NullTable::validate() const {
  if (xi_grid.empty()) throw TableBuildError("null table has no shape rows");
  for (std::size_t i = 1; i < xi_grid.size(); ++i) {
    if (!(xi_grid[i] > xi_grid[i - 1])) throw TableBuildError("null table shape grid not strictly ascending");
  }
  for (std::size_t j = 1; j < upper_tail_probs.size(); ++j) {
    if (!(upper_tail_probs[j] < upper_tail_probs[j - 1])) {
      throw TableBuildError("null table probabilities not strictly descending");
    }
  }
  if (quantiles.size() != xi_grid.size()) throw TableBuildError("null table row count mismatch");
  for (std::size_t r = 0; r < quantiles.size(); ++r) {
    const auto& row = quantiles[r];
    if (row.size() != upper_tail_probs.size()) throw TableBuildError("null table column count mismatch");
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (!(row[j] > row[j - 1])) {
        throw TableBuildError("null table row for shape " + std::to_string(xi_grid[r]) +
                              " is not strictly increasing");
      }
    }
  }
}

std::pair<NullTable, NullTable> build_tables(const TableBuildOptions& opts) {
  check_options(opts);
  NullTable ad, cvm;
  ad.kind = StatisticKind::AD;
  cvm.kind = StatisticKind::CVM;
  for (NullTable* t : {&ad, &cvm}) {
    t->xi_grid = opts.xi_grid;
    t->upper_tail_probs = opts.upper_tail_probs;
    t->meta.replicates = opts.replicates;
    t->meta.sample_size = opts.sample_size;
    t->meta.seed = opts.seed;
    t->meta.built = opts.built;
  }
  for (std::size_t row = 0; row < opts.xi_grid.size(); ++row) {
    RowStats stats = simulate_row(row, opts.xi_grid[row], opts);
    if (static_cast<double>(stats.failed) > kFailLimit * static_cast<double>(opts.replicates)) {
      throw TableBuildError("shape row " + std::to_string(opts.xi_grid[row]) + ": " +
                            std::to_string(stats.failed) + " failed fits exceed 5%");
    }
    ad.quantiles.push_back(quantile_row(std::move(stats.ad), opts.upper_tail_probs));
    cvm.quantiles.push_back(quantile_row(std::move(stats.cvm), opts.upper_tail_probs));
    ad.meta.failed_fits.push_back(stats.failed);
    cvm.meta.failed_fits.push_back(stats.failed);
  }
  ad.validate();
  cvm.validate();
  return {std::move(ad), std::move(cvm)};
}

NullTable build_table(StatisticKind kind, const TableBuildOptions& opts) {
  auto [ad, cvm] = build_tables(opts);
  return kind == StatisticKind::AD ? std::move(ad) : std::move(cvm);
}

double tail_extrapolate(double statistic, std::span<const double> row, std::span<const double> probs) {
  if (row.size() != probs.size() || row.size() < 2) throw DomainError("tail_extrapolate: row/probability size mismatch");
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] >= kTailLo * (1 - 1e-9) && probs[j] <= kTailHi * (1 + 1e-9)) cols.push_back(j);
  }
  if (cols.size() < 2) {
    cols.clear();
    for (std::size_t j = probs.size() - std::min<std::size_t>(10, probs.size()); j < probs.size(); ++j) cols.push_back(j);
  }
  double mx = 0.0, my = 0.0;
  for (auto j : cols) {
    mx += row[j];
    my += -std::log(probs[j]);
  }
  mx /= static_cast<double>(cols.size());
  my /= static_cast<double>(cols.size());
  double sxy = 0.0, sxx = 0.0;
  for (auto j : cols) {
    sxy += (row[j] - mx) * (-std::log(probs[j]) - my);
    sxx += (row[j] - mx) * (row[j] - mx);
  }
  if (!(sxx > 0.0) || !(sxy > 0.0)) throw std::logic_error("tail_extrapolate: table row is not increasing");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  return std::max(std::exp(-(intercept + slope * statistic)), 1e-300);
}

PValue pvalue_lookup(double statistic, double xi_hat, const NullTable& table) {
  const auto& grid = table.xi_grid;
  if (std::isnan(statistic)) throw DomainError("pvalue_lookup: NaN statistic");
  if (!(xi_hat >= grid.front() && xi_hat <= grid.back())) {
    throw TableRangeError("shape " + std::to_string(xi_hat) + " outside the null table; use bootstrap_pvalue");
  }
  std::vector<double> row;
  if (grid.size() == 1) {
    row = table.quantiles.front();
  } else {
    std::size_t r = static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), xi_hat) - grid.begin());
    r = std::clamp<std::size_t>(r, 1, grid.size() - 1) - 1;
    const double t = (xi_hat - grid[r]) / (grid[r + 1] - grid[r]);
    const auto& a = table.quantiles[r];
    const auto& b = table.quantiles[r + 1];
    row.resize(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) row[j] = t == 0.0 ? a[j] : (1.0 - t) * a[j] + t * b[j];
  }
  const auto& probs = table.upper_tail_probs;
  if (statistic < row.front()) return {probs.front(), PValuePath::BelowTable};
  if (statistic > row.back()) {
    return {std::min(tail_extrapolate(statistic, row, probs), probs.back()), PValuePath::TailExtrapolated};
  }
  std::size_t j = static_cast<std::size_t>(std::upper_bound(row.begin(), row.end(), statistic) - row.begin());
  if (j >= row.size()) return {probs.back(), PValuePath::Interpolated};
  j = std::max<std::size_t>(j, 1) - 1;
  if (statistic == row[j]) return {probs[j], PValuePath::Interpolated};
  const double lambda = (statistic - row[j]) / (row[j + 1] - row[j]);
  const double neg_log_p = (1.0 - lambda) * -std::log(probs[j]) + lambda * -std::log(probs[j + 1]);
  return {std::exp(-neg_log_p), PValuePath::Interpolated};
}

double bootstrap_count_pvalue(double observed, std::span<const double> stats) {
  const auto exceed = std::count_if(stats.begin(), stats.end(), [&](double s) { return s >= observed; });
  return (1.0 + static_cast<double>(exceed)) / (static_cast<double>(stats.size()) + 1.0);
}

BootstrapPValue bootstrap_pvalue(std::span<const double> y, StatisticKind kind, std::size_t size,
                                 std::uint64_t seed) {
  if (size == 0) throw DomainError("bootstrap size must be positive");
  const FitResult fit = fit_mle(y);
  if (!fit.converged) throw TestUnavailableError("MLE did not converge; bootstrap unavailable");
  const double observed = edf_statistic(kind, pit_transform(y, fit.params));
  std::vector<double> stats;
  stats.reserve(size);
  BootstrapPValue out;
  for (std::size_t b = 0; b < size; ++b) {
    const auto sample = gpd_sample(y.size(), fit.params, derive_seed(seed, b));
    const FitResult f = fit_mle(sample);
    if (!f.converged) {
      ++out.failed_fits;
      continue;
    }
    stats.push_back(edf_statistic(kind, pit_transform(sample, f.params)));
  }
  if (static_cast<double>(out.failed_fits) > kBootstrapFailLimit * static_cast<double>(size)) {
    throw TestUnavailableError("more than 20% of bootstrap refits failed");
  }
  out.p = bootstrap_count_pvalue(observed, stats);
  out.lower_bound = 1.0 / (static_cast<double>(stats.size()) + 1.0);
  return out;
}

void write_table(std::ostream& out, const NullTable& t) {
  t.validate();
  out << "#kind: " << to_string(t.kind) << '\n';
  out << "#n: " << t.meta.sample_size << '\n';
  out << "#replicates: " << t.meta.replicates << '\n';
  out << "#seed: " << t.meta.seed << '\n';
  out << "#xi: " << join(t.xi_grid, 9) << '\n';
  out << "#p: " << join(t.upper_tail_probs, 9) << '\n';
  out << "#quantile: " << t.meta.quantile_type << '\n';
  if (!t.meta.failed_fits.empty()) {
    std::vector<double> failed(t.meta.failed_fits.begin(), t.meta.failed_fits.end());
    out << "#failed: " << join(failed, 12) << '\n';
  }
  if (!t.meta.built.empty()) out << "#built: " << t.meta.built << '\n';
  for (const auto& row : t.quantiles) out << join(row, 9) << '\n';
}

NullTable read_table(std::istream& in) {
  NullTable t;
  bool has_kind = false;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) throw TableBuildError("table file: malformed header '" + line + "'");
      const std::string key = line.substr(1, colon - 1);
      std::string value = line.substr(colon + 1);
      value.erase(0, value.find_first_not_of(' '));
      if (key == "kind") {
        t.kind = statistic_kind_from_string(value);
        has_kind = true;
      } else if (key == "n") {
        t.meta.sample_size = std::stoul(value);
      } else if (key == "replicates") {
        t.meta.replicates = std::stoul(value);
      } else if (key == "seed") {
        t.meta.seed = std::stoull(value);
      } else if (key == "xi") {
        t.xi_grid = split_doubles(value);
      } else if (key == "p") {
        t.upper_tail_probs = split_doubles(value);
      } else if (key == "quantile") {
        t.meta.quantile_type = value;
      } else if (key == "failed") {
        for (double v : split_doubles(value)) t.meta.failed_fits.push_back(static_cast<std::size_t>(v));
      } else if (key == "built") {
        t.meta.built = value;
      }
      continue;
    }
    t.quantiles.push_back(split_doubles(line));
  }
  if (!has_kind) throw TableBuildError("table file: missing #kind header");
  t.validate();
  return t;
}

void save_table(const std::string& path, const NullTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write table file " + path);
  write_table(out, table);
  if (!out) throw std::runtime_error("error writing table file " + path);
}

NullTable load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open table file " + path);
  return read_table(in);
}

}  // namespace potsel
