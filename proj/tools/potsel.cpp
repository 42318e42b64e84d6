#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "potsel/batch.hpp"
#include "potsel/errors.hpp"
#include "potsel/null_table.hpp"
#include "potsel/rng.hpp"
#include "potsel/simstudy.hpp"

namespace fs = std::filesystem;
using namespace potsel;

namespace {

constexpr int kOk = 0, kPartial = 1, kFatal = 2;

// Flags shared by select and batch; anything set here overrides the config file.
struct PipelineFlags {
  std::string config;
  std::vector<std::string> tables;
  std::vector<std::string> settings;
  std::optional<std::string> test, rule, alpha, seed, workers;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f) {
  cmd->add_option("--config", f.config, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--table", f.tables, "null table file (repeatable; kind read from the file)");
  cmd->add_option("--test", f.test, "ad, cvm, moran or score");
  cmd->add_option("--rule", f.rule, "forwardstop, strongstop or unadjusted");
  cmd->add_option("--alpha", f.alpha, "stopping-rule level");
  cmd->add_option("--seed", f.seed, "bootstrap seed");
  cmd->add_option("--workers", f.workers, "worker threads");
  cmd->add_option("--set", f.settings, "any configuration key as key=value (repeatable)");
}

class TableSet {
 public:
  void add(const std::string& path) {
    NullTable t = load_table(path);
    tables_[t.kind] = std::move(t);
  }

  const NullTable* for_test(TestKind test) const {
    const auto kind = test == TestKind::AD ? StatisticKind::AD : StatisticKind::CVM;
    if (test != TestKind::AD && test != TestKind::CVM) return nullptr;
    const auto it = tables_.find(kind);
    return it == tables_.end() ? nullptr : &it->second;
  }

 private:
  std::map<StatisticKind, NullTable> tables_;
};

BatchConfig resolve_config(const PipelineFlags& f, TableSet& tables) {
  BatchConfig cfg;
  if (!f.config.empty()) load_config(f.config, cfg);
  auto set = [&](const char* key, const std::optional<std::string>& v) {
    if (v) apply_setting(cfg, key, *v);
  };
  set("test", f.test);
  set("rule", f.rule);
  set("alpha", f.alpha);
  set("seed", f.seed);
  set("workers", f.workers);
  for (const auto& kv : f.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw DomainError("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!cfg.table_path.empty()) tables.add(cfg.table_path);
  for (const auto& p : f.tables) tables.add(p);
  return cfg;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// build-table

struct BuildFlags {
  std::size_t replicates = 10000;
  std::size_t sample_size = 1000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string ad_out, cvm_out;
  std::optional<std::string> built;
};

int cmd_build_table(const BuildFlags& f) {
  if (f.ad_out.empty() && f.cvm_out.empty()) throw DomainError("give --ad-out and/or --cvm-out");
  TableBuildOptions opts;
  opts.replicates = f.replicates;
  opts.sample_size = f.sample_size;
  opts.seed = f.seed;
  opts.workers = f.workers;
  opts.built = f.built.value_or(utc_now());
  if (!f.ad_out.empty() && !f.cvm_out.empty()) {
    const auto [ad, cvm] = build_tables(opts);
    save_table(f.ad_out, ad);
    save_table(f.cvm_out, cvm);
  } else if (!f.ad_out.empty()) {
    save_table(f.ad_out, build_table(StatisticKind::AD, opts));
  } else {
    save_table(f.cvm_out, build_table(StatisticKind::CVM, opts));
  }
  return kOk;
}

// select

std::string num(double v, const char* fmt = "%.6g") {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

void print_site(std::ostream& out, const SiteResult& r, const std::vector<double>& periods) {
  out << "station " << r.station_id << "  status " << to_string(r.status);
  if (!r.message.empty()) out << " (" << r.message << ")";
  out << "\nyears " << r.years_available << "  retained days " << r.n_retained << "  theta " << num(r.theta)
      << (r.theta_warning ? "  [clustering: consider declustering]" : "") << '\n';
  if (!r.p_values.empty()) {
    out << "\n  k  percentile   threshold    p-value\n";
    for (std::size_t i = 0; i < r.p_values.size(); ++i) {
      char line[96];
      std::snprintf(line, sizeof line, "%3zu  %10.1f  %10.4g  %9.4g\n", i + 1, r.tested_percents[i],
                    r.tested_thresholds[i], r.p_values[i]);
      out << line;
    }
    if (r.skipped > 0) out << "  (" << r.skipped << " thresholds skipped)\n";
    out << "\nrejected: forwardstop " << r.k_hat_by_rule[0] << ", strongstop " << r.k_hat_by_rule[1]
        << ", unadjusted " << r.k_hat_by_rule[2] << "  (rule in use: " << to_string(r.rule) << ")\n";
  }
  if (r.status != SiteStatus::Ok) return;
  out << "chosen percentile " << num(*r.chosen_percentile) << "  threshold " << num(*r.chosen_threshold)
      << "  exceedances " << r.n_exceed << "  zeta " << num(r.zeta) << '\n';
  const auto& p = r.fit->params;
  out << "sigma " << num(p.scale) << "  xi " << num(p.shape);
  if (r.fit->covariance) {
    out << "  se " << num(r.fit->covariance->se_scale()) << ", " << num(r.fit->covariance->se_shape());
  }
  out << "\n\n  N-year    level        lower        upper\n";
  for (std::size_t i = 0; i < periods.size() && i < r.return_levels.size(); ++i) {
    const auto& l = r.return_levels[i];
    char line[96];
    std::snprintf(line, sizeof line, "%8g  %11s  %11s  %11s\n", l.period, num(l.estimate).c_str(),
                  num(l.low).c_str(), num(l.high).c_str());
    out << line;
  }
}

int cmd_select(const std::string& input, const std::string& station, const PipelineFlags& f) {
  TableSet tables;
  const BatchConfig cfg = resolve_config(f, tables);
  const auto sites = load_station_file(input);
  if (sites.empty()) throw std::runtime_error("no precipitation records in " + input);
  const StationSeries* s = &sites.front();
  if (!station.empty()) {
    s = nullptr;
    for (const auto& c : sites)
      if (c.station_id == station) s = &c;
    if (!s) throw std::runtime_error("station " + station + " not in " + input);
  } else if (sites.size() > 1) {
    std::cerr << input << " holds " << sites.size() << " stations; using " << s->station_id << '\n';
  }
  const NullTable* table = tables.for_test(cfg.test);
  if ((cfg.test == TestKind::AD || cfg.test == TestKind::CVM) && !table) {
    throw DomainError("the " + std::string(to_string(cfg.test)) + " test needs --table");
  }
  const SiteResult r = run_site(*s, cfg, table);
  print_site(std::cout, r, cfg.periods);
  return r.status == SiteStatus::Ok || r.status == SiteStatus::AllRejected ? kOk : kPartial;
}

// batch

int cmd_batch(const std::string& input, const std::string& output, const std::string& summary,
              const PipelineFlags& f) {
  TableSet tables;
  const BatchConfig cfg = resolve_config(f, tables);
  const BatchSummary s = run_batch(input, output, cfg, tables.for_test(cfg.test));
  if (summary.empty()) {
    write_batch_summary(std::cout, s);
  } else {
    std::ofstream out(summary);
    if (!out) throw std::runtime_error("cannot write " + summary);
    write_batch_summary(out, s);
  }
  for (const auto& u : s.unreadable) std::cerr << "unreadable: " << u << '\n';
  return s.unreadable.empty() ? kOk : kPartial;
}

// simulate

struct SimFlags {
  std::string study;
  std::size_t replicates = 2000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  double alpha = 0.05;
  std::string test = "ad";
  std::vector<std::string> tests{"score", "moran", "ad", "cvm"};
  std::vector<std::size_t> sizes{50, 100, 200, 400};
  std::vector<std::string> tables;
  std::string out_dir = ".";
};

void write_file(const fs::path& p, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  body(out);
}

int cmd_simulate(const SimFlags& f) {
  TableSet tables;
  for (const auto& p : f.tables) tables.add(p);
  const StudyTables st{tables.for_test(TestKind::AD), tables.for_test(TestKind::CVM)};
  auto need_table = [&](TestKind t) {
    if ((t == TestKind::AD || t == TestKind::CVM) && !tables.for_test(t)) {
      throw DomainError("the " + std::string(to_string(t)) + " test needs --table");
    }
  };
  fs::create_directories(f.out_dir);
  const fs::path dir(f.out_dir);

  if (f.study == "power") {
    PowerOptions opts;
    opts.tests.clear();
    for (const auto& t : f.tests) {
      opts.tests.push_back(test_kind_from_string(t));
      need_table(opts.tests.back());
    }
    opts.alpha = f.alpha;
    opts.tables = st;
    opts.workers = f.workers;
    opts.bootstrap.seed = f.seed;
    std::vector<Scenario> scenarios;
    for (const auto& g : power_study_generators()) {
      for (std::size_t n : f.sizes) {
        Scenario s{g, n, f.replicates, derive_seed(f.seed, scenarios.size())};
        s.validate();
        scenarios.push_back(s);
      }
    }
    const PowerReport r = power_study(scenarios, opts);
    write_file(dir / "power.csv", [&](std::ostream& o) { write_power_csv(o, r); });
    write_summary(std::cout, r);
  } else if (f.study == "fwer") {
    FwerOptions opts;
    opts.test = test_kind_from_string(f.test);
    need_table(opts.test);
    opts.tables = st;
    opts.replicates = f.replicates;
    opts.seed = f.seed;
    opts.workers = f.workers;
    const FwerReport r = fwer_null_study(opts);
    write_file(dir / "fwer.csv", [&](std::ostream& o) { write_fwer_csv(o, r); });
    write_summary(std::cout, r);
  } else {
    MisspecOptions opts;
    opts.test = test_kind_from_string(f.test);
    need_table(opts.test);
    opts.tables = st;
    opts.replicates = f.replicates;
    opts.alpha = f.alpha;
    opts.seed = f.seed;
    opts.workers = f.workers;
    const MisspecReport r = misspec_study(opts);
    write_file(dir / "misspec_kfreq.csv", [&](std::ostream& o) { write_misspec_kfreq_csv(o, r); });
    write_file(dir / "misspec_curve.csv", [&](std::ostream& o) { write_misspec_curve_csv(o, r); });
    write_file(dir / "misspec_metrics.csv", [&](std::ostream& o) { write_misspec_metrics_csv(o, r); });
    write_summary(std::cout, r);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Automated threshold selection for peaks-over-threshold precipitation analysis"};
  app.require_subcommand(1);

  BuildFlags build;
  auto* b = app.add_subcommand("build-table", "Simulate the AD/CVM null tables");
  b->add_option("--replicates", build.replicates, "samples per shape row")->check(CLI::PositiveNumber);
  b->add_option("--sample-size", build.sample_size, "size of each simulated sample")->check(CLI::Range(10, 100000000));
  b->add_option("--seed", build.seed);
  b->add_option("--workers", build.workers)->check(CLI::PositiveNumber);
  b->add_option("--ad-out", build.ad_out, "write the AD table here");
  b->add_option("--cvm-out", build.cvm_out, "write the CVM table here");
  b->add_option("--built", build.built, "build note stored in the table (default: current UTC time)");

  PipelineFlags sel_flags;
  std::string sel_input, sel_station;
  auto* sel = app.add_subcommand("select", "Run the selection pipeline on one station");
  sel->add_option("input", sel_input, ".dly or station CSV file")->required()->check(CLI::ExistingFile);
  sel->add_option("--station", sel_station, "station id when the file holds several");
  add_pipeline_flags(sel, sel_flags);

  PipelineFlags bat_flags;
  std::string bat_input, bat_output, bat_summary;
  auto* bat = app.add_subcommand("batch", "Process every station file of a directory");
  bat->add_option("--input", bat_input, "directory of .dly / .csv files")->required()->check(CLI::ExistingDirectory);
  bat->add_option("--output", bat_output, "results CSV")->required();
  bat->add_option("--summary", bat_summary, "summary file (default: stdout)");
  add_pipeline_flags(bat, bat_flags);

  SimFlags sim;
  auto* s = app.add_subcommand("simulate", "Run a simulation study");
  s->add_option("study", sim.study, "power, fwer or misspec")
      ->required()
      ->check(CLI::IsMember({"power", "fwer", "misspec"}));
  s->add_option("--replicates", sim.replicates)->check(CLI::Range(std::size_t{100}, std::size_t{100000000}));
  s->add_option("--seed", sim.seed);
  s->add_option("--workers", sim.workers)->check(CLI::PositiveNumber);
  s->add_option("--alpha", sim.alpha)->check(CLI::Range(0.0, 1.0));
  s->add_option("--test", sim.test, "test for fwer and misspec");
  s->add_option("--tests", sim.tests, "tests for power")->delimiter(',');
  s->add_option("--sizes", sim.sizes, "sample sizes for power")->delimiter(',');
  s->add_option("--table", sim.tables, "null table file (repeatable)");
  s->add_option("--out-dir", sim.out_dir, "directory for the CSV outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kFatal;
  }

  try {
    if (*b) return cmd_build_table(build);
    if (*sel) return cmd_select(sel_input, sel_station, sel_flags);
    if (*bat) return cmd_batch(bat_input, bat_output, bat_summary, bat_flags);
    return cmd_simulate(sim);
  } catch (const std::exception& e) {
    std::cerr << "potsel: " << e.what() << '\n';
    return kFatal;
  }
}
