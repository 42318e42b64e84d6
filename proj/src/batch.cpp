#include "potsel/batch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "potsel/errors.hpp"
#include "potsel/parallel.hpp"

namespace potsel {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(trim(item), &used));
      if (used != trim(item).size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DomainError("bad number '" + item + "' for " + key);
    }
  }
  if (out.empty()) throw DomainError("empty list for " + key);
  return out;
}

double parse_number(const std::string& key, const std::string& value) {
  const auto v = parse_list(key, value);
  if (v.size() != 1) throw DomainError(key + " takes one number");
  return v[0];
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  const double v = parse_number(key, value);
  if (!(v >= 0.0) || v != std::floor(v)) throw DomainError(key + " must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

std::size_t rule_slot(StoppingRule r) {
  switch (r) {
    case StoppingRule::ForwardStop: return 0;
    case StoppingRule::StrongStop: return 1;
    case StoppingRule::Unadjusted: return 2;
  }
  return 0;
}

}  // namespace

std::vector<double> nominal_percentiles() {
  std::vector<double> q;
  for (int p = 75; p <= 97; p += 2) q.push_back(p);
  for (int t = 971; t <= 995; ++t) q.push_back(t / 10.0);
  return q;
}

PercentileLadder percentile_ladder(std::span<const double> values, std::span<const double> percents) {
  const auto u = percentile_thresholds(values, percents);
  std::vector<std::size_t> order(u.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return percents[a] < percents[b]; });
  PercentileLadder out;
  for (std::size_t i : order) {
    if (std::find(out.thresholds.begin(), out.thresholds.end(), u[i]) != out.thresholds.end()) continue;
    out.percents.push_back(percents[i]);
    out.thresholds.push_back(u[i]);
  }
  if (out.thresholds.size() < 2) throw LadderError("fewer than 2 distinct percentile thresholds");
  return out;
}

PercentileLadder percentile_ladder(std::span<const double> values) {
  const auto q = nominal_percentiles();
  return percentile_ladder(values, q);
}

double extremal_index(std::span<const double> values, std::span<const long> times, double threshold) {
  if (values.size() != times.size()) throw DomainError("values and times differ in length");
  std::vector<long> at;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] > threshold) at.push_back(times[i]);
  if (at.size() < 2) throw EstimateUnavailableError("extremal index needs at least 2 exceedances");
  double s1 = 0.0, s2 = 0.0, r1 = 0.0, r2 = 0.0;
  long tmax = 0;
  for (std::size_t i = 1; i < at.size(); ++i) {
    const long t = at[i] - at[i - 1];
    if (t <= 0) throw DomainError("times must increase");
    tmax = std::max(tmax, t);
    const double d = static_cast<double>(t);
    s1 += d;
    s2 += d * d;
    r1 += d - 1.0;
    r2 += (d - 1.0) * (d - 2.0);
  }
  const double m = static_cast<double>(at.size() - 1);
  const double theta = tmax <= 2 ? 2.0 * s1 * s1 / (m * s2) : 2.0 * r1 * r1 / (m * r2);
  return std::clamp(theta, std::numeric_limits<double>::min(), 1.0);
}

double extremal_index(std::span<const double> values, double threshold) {
  std::vector<long> t(values.size());
  std::iota(t.begin(), t.end(), 0L);
  return extremal_index(values, t, threshold);
}

std::string_view to_string(SiteStatus s) {
  switch (s) {
    case SiteStatus::Ok: return "OK";
    case SiteStatus::AllRejected: return "ALL_REJECTED";
    case SiteStatus::InsufficientData: return "INSUFFICIENT_DATA";
    case SiteStatus::FitFailed: return "FIT_FAILED";
  }
  return "?";
}

void apply_setting(BatchConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "test") {
    cfg.test = test_kind_from_string(v);
  } else if (key == "rule") {
    cfg.rule = stopping_rule_from_string(v);
  } else if (key == "alpha") {
    cfg.alpha = parse_number(key, v);
    if (!(cfg.alpha >= 0.0 && cfg.alpha < 1.0)) throw DomainError("alpha must lie in [0, 1)");
  } else if (key == "periods") {
    cfg.periods = parse_list(key, v);
    for (double p : cfg.periods)
      if (!(p > 0.0)) throw DomainError("return periods must be positive");
  } else if (key == "ci") {
    if (v == "delta") cfg.ci = CiMethod::Delta;
    else if (v == "profile") cfg.ci = CiMethod::Profile;
    else throw DomainError("ci must be delta or profile");
  } else if (key == "ci_level") {
    cfg.ci_level = parse_number(key, v);
    if (!(cfg.ci_level > 0.0 && cfg.ci_level < 1.0)) throw DomainError("ci_level must lie in (0, 1)");
  } else if (key == "table") {
    cfg.table_path = v;
  } else if (key == "min_years") {
    cfg.screen.min_years = parse_count(key, v);
  } else if (key == "season") {
    cfg.screen.season_months.clear();
    for (double m : parse_list(key, v)) {
      if (m != std::floor(m) || m < 1 || m > 12) throw DomainError("season months must be 1..12");
      cfg.screen.season_months.push_back(static_cast<unsigned>(m));
    }
  } else if (key == "completeness") {
    cfg.screen.completeness = parse_number(key, v);
    if (!(cfg.screen.completeness >= 0.0 && cfg.screen.completeness <= 1.0)) {
      throw DomainError("completeness must lie in [0, 1]");
    }
  } else if (key == "workers") {
    cfg.workers = static_cast<unsigned>(std::max<std::size_t>(1, parse_count(key, v)));
  } else if (key == "seed") {
    try {
      std::size_t used = 0;
      cfg.seed = std::stoull(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw DomainError("bad seed '" + v + "'");
    }
  } else if (key == "theta_warn") {
    cfg.theta_warn = parse_number(key, v);
  } else if (key == "bootstrap") {
    cfg.bootstrap_size = parse_count(key, v);
    if (cfg.bootstrap_size < 1) throw DomainError("bootstrap must be positive");
  } else {
    throw DomainError("unknown setting '" + key + "'");
  }
}

void read_config(std::istream& in, BatchConfig& cfg) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
    try {
      apply_setting(cfg, trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const DomainError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
}

void load_config(const std::string& path, BatchConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  read_config(in, cfg);
}

SiteResult run_site(const StationSeries& series, const BatchConfig& cfg, const NullTable* table) {
  SiteResult r;
  r.station_id = series.station_id;
  r.rule = cfg.rule;
  r.test = cfg.test;

  const ScreenResult screened = screen_and_filter(series, cfg.screen);
  r.years_available = screened.years_available;
  if (!screened.series) {
    r.message = screened.reason;
    return r;
  }
  const StationSeries& s = *screened.series;
  const auto x = s.values();
  r.n_retained = x.size();
  if (x.empty()) {
    r.message = "no observations retained";
    return r;
  }

  // Times are positions in the retained series, so the months between seasons are not a gap.
  try {
    const double u75 = percentile_thresholds(x, std::vector<double>{75.0})[0];
    r.theta = extremal_index(x, u75);
    r.theta_warning = r.theta < cfg.theta_warn;
  } catch (const EstimateUnavailableError&) {
  }

  PercentileLadder ladder;
  LadderOutcome out;
  LadderOptions lo;
  lo.test = cfg.test;
  lo.rule = cfg.rule;
  lo.alpha = cfg.alpha;
  lo.table = table;
  lo.bootstrap = {cfg.bootstrap_size, cfg.seed};
  try {
    ladder = percentile_ladder(x);
    out = run_ladder(x, ladder.thresholds, lo);
  } catch (const LadderError& e) {
    r.message = e.what();
    return r;
  }

  for (const auto& rung : out.ladder.rungs) {
    const auto it = std::find(ladder.thresholds.begin(), ladder.thresholds.end(), rung.threshold);
    r.tested_percents.push_back(ladder.percents[static_cast<std::size_t>(it - ladder.thresholds.begin())]);
    r.tested_thresholds.push_back(rung.threshold);
    r.p_values.push_back(rung.result.p_value);
  }
  r.skipped = out.ladder.skipped.size();
  for (StoppingRule rule : {StoppingRule::ForwardStop, StoppingRule::StrongStop, StoppingRule::Unadjusted}) {
    r.k_hat_by_rule[rule_slot(rule)] = apply_rule(rule, r.p_values, cfg.alpha).k_hat;
  }

  if (!out.decision.chosen) {
    r.status = SiteStatus::AllRejected;
    r.message = "every threshold rejected";
    return r;
  }
  const std::size_t k = *out.decision.chosen;
  r.chosen_percentile = r.tested_percents[k];
  r.chosen_threshold = r.tested_thresholds[k];
  const auto y = exceedances_over(x, *r.chosen_threshold);
  r.n_exceed = y.size();
  r.fit = out.chosen_fit;
  if (!r.fit || !r.fit->converged) {
    r.status = SiteStatus::FitFailed;
    r.message = "maximum-likelihood fit did not converge at the chosen threshold";
    return r;
  }
  r.status = SiteStatus::Ok;

  const RateEstimate rate = rate_estimate(x.size(), y.size());
  r.zeta = rate.rate;
  const double n_y = static_cast<double>(x.size()) / static_cast<double>(s.years_available);
  for (double N : cfg.periods) {
    SiteReturnLevel level;
    level.period = N;
    const ReturnLevelSpec spec{*r.chosen_threshold, rate.rate, n_y, N};
    try {
      level.estimate = return_level(r.fit->params, spec);
      const ReturnLevelEstimate ci = cfg.ci == CiMethod::Delta ? delta_ci(*r.fit, spec, rate.se, cfg.ci_level)
                                                               : profile_ci(y, *r.fit, spec, cfg.ci_level);
      level.low = ci.low_open ? -std::numeric_limits<double>::infinity() : ci.ci_low;
      level.high = ci.high_open ? std::numeric_limits<double>::infinity() : ci.ci_high;
    } catch (const EstimateUnavailableError&) {
    } catch (const DomainError&) {
    }
    r.return_levels.push_back(level);
  }
  return r;
}

std::vector<SiteResult> run_sites(const std::vector<StationSeries>& sites, const BatchConfig& cfg,
                                  const NullTable* table) {
  std::vector<SiteResult> results(sites.size());
  parallel_for(sites.size(), cfg.workers, [&](std::size_t i) {
    try {
      results[i] = run_site(sites[i], cfg, table);
    } catch (const std::exception& e) {
      SiteResult r;
      r.station_id = sites[i].station_id;
      r.rule = cfg.rule;
      r.test = cfg.test;
      r.status = SiteStatus::FitFailed;
      r.message = e.what();
      results[i] = std::move(r);
    }
  });
  std::stable_sort(results.begin(), results.end(),
                   [](const SiteResult& a, const SiteResult& b) { return a.station_id < b.station_id; });
  return results;
}

BatchSummary run_batch(const std::string& input_dir, const std::string& output_csv, const BatchConfig& cfg,
                       const NullTable* table) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(input_dir)) throw std::runtime_error(input_dir + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".dly" || ext == ".csv")) files.push_back(entry.path());
  }
  if (files.empty()) throw std::runtime_error("no .dly or .csv station files in " + input_dir);
  std::sort(files.begin(), files.end());
  if ((cfg.test == TestKind::AD || cfg.test == TestKind::CVM) && table == nullptr) {
    throw DomainError("the " + std::string(to_string(cfg.test)) + " test needs a null table");
  }

  BatchSummary summary;
  std::vector<std::vector<StationSeries>> loaded(files.size());
  std::vector<std::string> errors(files.size());
  parallel_for(files.size(), cfg.workers, [&](std::size_t i) {
    try {
      loaded[i] = load_station_file(files[i].string());
    } catch (const std::exception& e) {
      errors[i] = files[i].filename().string() + ": " + e.what();
    }
  });
  std::vector<StationSeries> sites;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!errors[i].empty()) summary.unreadable.push_back(errors[i]);
    for (auto& s : loaded[i]) sites.push_back(std::move(s));
  }

  const auto results = run_sites(sites, cfg, table);
  std::ofstream out(output_csv);
  if (!out) throw std::runtime_error("cannot write " + output_csv);
  write_results_header(out, cfg.periods);
  for (const auto& r : results) {
    write_result_row(out, r, cfg.periods);
    ++summary.by_status[static_cast<std::size_t>(r.status)];
  }
  summary.sites = results.size();
  return summary;
}

void write_results_header(std::ostream& out, const std::vector<double>& periods) {
  out << "station_id,status,rule,test,chosen_percentile,chosen_threshold,n_exceed,sigma,xi,se_sigma,se_xi,zeta,"
         "theta_hat";
  for (double N : periods) {
    const std::string n = fmt(N);
    out << ",rl_" << n << ",rl_" << n << "_lo,rl_" << n << "_hi";
  }
  out << '\n';
}

void write_result_row(std::ostream& out, const SiteResult& r, const std::vector<double>& periods) {
  out << r.station_id << ',' << to_string(r.status) << ',' << to_string(r.rule) << ',' << to_string(r.test) << ','
      << fmt(r.chosen_percentile) << ',' << fmt(r.chosen_threshold) << ',';
  if (r.chosen_threshold) out << r.n_exceed;
  const bool fitted = r.status == SiteStatus::Ok;
  const auto& cov = fitted ? r.fit->covariance : std::optional<Covariance2>{};
  out << ',' << (fitted ? fmt(r.fit->params.scale) : "") << ',' << (fitted ? fmt(r.fit->params.shape) : "") << ','
      << (cov ? fmt(cov->se_scale()) : "") << ',' << (cov ? fmt(cov->se_shape()) : "") << ','
      << (fitted ? fmt(r.zeta) : "") << ',' << fmt(r.theta);
  for (double N : periods) {
    const auto it = std::find_if(r.return_levels.begin(), r.return_levels.end(),
                                 [&](const SiteReturnLevel& l) { return l.period == N; });
    if (it == r.return_levels.end()) {
      out << ",,,";
    } else {
      out << ',' << fmt(it->estimate) << ',' << fmt(it->low) << ',' << fmt(it->high);
    }
  }
  out << '\n';
}

void write_batch_summary(std::ostream& out, const BatchSummary& s) {
  out << "sites: " << s.sites << '\n';
  for (std::size_t i = 0; i < s.by_status.size(); ++i)
    out << "  " << to_string(static_cast<SiteStatus>(i)) << ": " << s.by_status[i] << '\n';
  if (!s.unreadable.empty()) {
    out << "unreadable files: " << s.unreadable.size() << '\n';
    for (const auto& u : s.unreadable) out << "  " << u << '\n';
  }
}

}  // namespace potsel
