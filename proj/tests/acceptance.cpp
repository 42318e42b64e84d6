// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance [--only N]... [--workers W] [--ad-table PATH] [--cvm-table PATH] [--work-dir DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "potsel/batch.hpp"
#include "potsel/errors.hpp"
#include "potsel/estimation.hpp"
#include "potsel/gof.hpp"
#include "potsel/gpd.hpp"
#include "potsel/null_table.hpp"
#include "potsel/parallel.hpp"
#include "potsel/return_levels.hpp"
#include "potsel/rng.hpp"
#include "potsel/sequential.hpp"
#include "potsel/simstudy.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace potsel;

namespace {

struct Context {
  unsigned workers = 1;
  std::string ad_path = POTSEL_AD_TABLE;
  std::string cvm_path = POTSEL_CVM_TABLE;
  fs::path work_dir = POTSEL_WORK_DIR;

  const NullTable& ad() {
    if (!ad_) ad_ = load_table(ad_path);
    return *ad_;
  }
  const NullTable& cvm() {
    if (!cvm_) cvm_ = load_table(cvm_path);
    return *cvm_;
  }

 private:
  std::optional<NullTable> ad_, cvm_;
};

// Collects sub-checks of one criterion; the criterion passes when all do.
class Verdict {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
    notes_.push_back((ok ? "ok   " : "FAIL ") + what);
  }
  [[nodiscard]] bool passed() const { return failures_.empty(); }
  [[nodiscard]] const std::vector<std::string>& notes() const { return notes_; }
  [[nodiscard]] const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::vector<std::string> notes_, failures_;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

template <class... T>
std::string cat(const T&... parts) {
  std::ostringstream s;
  (s << ... << parts);
  return s.str();
}

// Closed-form GPD distribution function, independent of the library.
double gpd_cdf_oracle(double y, double scale, double shape) {
  if (shape == 0.0) return 1.0 - std::exp(-y / scale);
  return 1.0 - std::pow(1.0 + shape * y / scale, -1.0 / shape);
}

double return_level_oracle(double u, double scale, double shape, double m) {
  if (shape == 0.0) return u + scale * std::log(m);
  return u + scale / shape * (std::pow(m, shape) - 1.0);
}

// 1. Distribution core

void criterion1(Context&, Verdict& v) {
  Rng rng(1001);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double p = rng.uniform();
    const double scale = std::exp(std::log(0.1) + rng.uniform() * std::log(100.0));
    const double shape = -0.9 + 2.9 * rng.uniform();
    const GpdParams g{scale, shape};
    worst = std::max(worst, std::fabs(gpd_cdf(gpd_quantile(p, g), g) - p));
  }
  v.check(worst < 1e-10, cat("cdf(quantile(p)) round trip max error ", fmt("%.2e", worst), " < 1e-10"));

  double cont = 0.0;
  for (double scale : {0.5, 1.0, 3.0}) {
    for (double y : {0.01, 0.5, 1.0, 5.0, 20.0}) {
      cont = std::max(cont, std::fabs(gpd_cdf(y, {scale, 1e-9}) - gpd_cdf(y, {scale, 0.0})));
      cont = std::max(cont, std::fabs(gpd_logpdf(y, {scale, 1e-9}) - gpd_logpdf(y, {scale, 0.0})));
    }
    for (double p : {0.01, 0.5, 0.9, 0.999})
      cont = std::max(cont, std::fabs(gpd_quantile(p, {scale, 1e-9}) - gpd_quantile(p, {scale, 0.0})));
  }
  v.check(cont < 1e-6, cat("shape 1e-9 vs 0 max difference ", fmt("%.2e", cont), " < 1e-6"));

  for (double shape : {0.25, -0.25}) {
    const auto x = gpd_sample(100000, {1.0, shape}, 1002);
    const double d = oracle::ks_distance(x, [&](double y) { return gpd_cdf_oracle(y, 1.0, shape); });
    v.check(d < 0.01, cat("KS distance at shape ", shape, ", n=1e5: ", fmt("%.4f", d), " < 0.01"));
  }
}

// 2. Estimation

void criterion2(Context& ctx, Verdict& v) {
  constexpr int reps = 500;
  std::vector<double> xi(reps, std::nan("")), covered(reps, 0.0), mps_ok(reps, 0.0);
  parallel_for(reps, ctx.workers, [&](std::size_t r) {
    const auto y = gpd_sample(2000, {2.0, 0.25}, derive_seed(2002, r));
    const FitResult mle = fit_mle(y);
    const FitResult mps = fit_mps(y);
    if (!mle.converged || !mle.covariance || !mps.converged) return;
    xi[r] = mle.params.shape;
    const double se_xi = mle.covariance->se_shape(), se_sigma = mle.covariance->se_scale();
    covered[r] = std::fabs(mle.params.shape - 0.25) <= 1.959963984540054 * se_xi;
    mps_ok[r] = std::fabs(mps.params.shape - mle.params.shape) <= 3.0 * se_xi &&
                std::fabs(mps.params.scale - mle.params.scale) <= 3.0 * se_sigma;
  });
  const auto fitted = std::count_if(xi.begin(), xi.end(), [](double x) { return !std::isnan(x); });
  double sum = 0.0;
  for (double x : xi)
    if (!std::isnan(x)) sum += x;
  const double mean = sum / static_cast<double>(fitted);
  double cov = 0.0, mps = 0.0;
  for (int r = 0; r < reps; ++r) cov += covered[r], mps += mps_ok[r];
  v.check(fitted == reps, cat("MLE and MPS converged with covariance in ", fitted, " of ", reps));
  v.check(std::fabs(mean - 0.25) <= 0.02, cat("mean MLE shape ", fmt("%.4f", mean), " within 0.25 +- 0.02"));
  const double coverage = 100.0 * cov / reps;
  v.check(coverage >= 92.0 && coverage <= 97.0, cat("Wald 95% coverage ", fmt("%.1f", coverage), "% in [92, 97]"));
  v.check(mps == reps, cat("MPS within 3 SE of MLE in ", mps, " of ", reps, " replicates"));
}

// 3. Power table

void criterion3(Context& ctx, Verdict& v) {
  PowerOptions base;
  base.tables = {&ctx.ad(), &ctx.cvm()};
  base.workers = ctx.workers;
  auto run = [&](const Generator& g, std::size_t n, std::vector<TestKind> tests, std::uint64_t seed) {
    PowerOptions o = base;
    o.tests = std::move(tests);
    return power_study({Scenario{g, n, 2000, seed}}, o);
  };
  auto cell = [&](const PowerReport& r, TestKind t) {
    for (const auto& c : r.cells)
      if (c.test == t) return 100.0 * c.rejections.rate();
    return std::nan("");
  };
  struct Target {
    Generator g;
    std::size_t n;
    TestKind test;
    double paper;
  };
  const std::vector<Target> targets{{gamma_generator(2.0, 1.0), 100, TestKind::AD, 64.7},
                                    {lognormal_generator(0.0, 1.0), 200, TestKind::AD, 69.3},
                                    {weibull_generator(1.0, 0.75), 200, TestKind::CVM, 66.4}};
  std::uint64_t seed = 3000;
  for (const auto& t : targets) {
    const double rate = cell(run(t.g, t.n, {t.test}, ++seed), t.test);
    v.check(std::fabs(rate - t.paper) <= 4.0, cat(t.g.name(), " n=", t.n, " ", to_string(t.test), " power ",
                                                  fmt("%.1f", rate), "% vs ", t.paper, " +- 4"));
  }
  const std::vector<TestKind> all{TestKind::Score, TestKind::Moran, TestKind::AD, TestKind::CVM};
  for (std::size_t n : {50, 100, 200, 400}) {
    const PowerReport r = run(gpd_generator(1.0, 0.25), n, all, ++seed);
    for (TestKind t : all) {
      const double rate = cell(r, t);
      v.check(rate >= 3.0 && rate <= 7.5,
              cat("GPD(1, 0.25) n=", n, " ", to_string(t), " size ", fmt("%.1f", rate), "% in [3, 7.5]"));
    }
  }
}

// 4. FWER under the null

void criterion4(Context& ctx, Verdict& v) {
  FwerOptions o;
  o.test = TestKind::AD;
  o.tables = {&ctx.ad(), nullptr};
  o.replicates = 2000;
  o.seed = 4004;
  o.workers = ctx.workers;
  const FwerReport r = fwer_null_study(o);
  double worst_ss = 0.0;
  std::string worst_ss_cell;
  double lo_ratio = 1e9, hi_ratio = 0.0;
  for (const auto& c : r.cells) {
    const double rate = c.errors.rate();
    const std::string where = cat("shape ", c.shape, " n=", c.n, " level ", c.level);
    if (c.rule == StoppingRule::StrongStop) {
      const double dev = std::fabs(rate - c.level);
      if (dev > worst_ss) worst_ss = dev, worst_ss_cell = cat(where, ": ", fmt("%.3f", rate));
    } else if (c.rule == StoppingRule::Unadjusted) {
      lo_ratio = std::min(lo_ratio, rate / c.level);
      hi_ratio = std::max(hi_ratio, rate / c.level);
    }
  }
  v.check(worst_ss <= 0.05, cat("StrongStop FWER max |observed - nominal| ", fmt("%.3f", worst_ss), " <= 0.05 (",
                                worst_ss_cell, ")"));
  v.check(lo_ratio >= 1.5 && hi_ratio <= 4.0,
          cat("unadjusted FWER / nominal in [", fmt("%.2f", lo_ratio), ", ", fmt("%.2f", hi_ratio), "] within [1.5, 4]"));
}

// 5. Misspecified mixture

void criterion5(Context& ctx, Verdict& v) {
  MisspecOptions o;
  o.replicates = 1000;
  o.test = TestKind::AD;
  o.alpha = 0.05;
  o.tables = {&ctx.ad(), nullptr};
  o.seed = 5005;
  o.workers = ctx.workers;
  const MisspecReport r = misspec_study(o);
  const std::map<StoppingRule, double> paper{
      {StoppingRule::ForwardStop, 33}, {StoppingRule::Unadjusted, 29}, {StoppingRule::StrongStop, 22}};
  const RuleSummary* fs = nullptr;
  for (const auto& s : r.rules) {
    if (s.rule == StoppingRule::ForwardStop) fs = &s;
    const double target = paper.at(s.rule);
    v.check(std::fabs(s.median_k_hat - target) <= 3.0,
            cat("median k_hat ", to_string(s.rule), " ", s.median_k_hat, " vs ", target, " +- 3"));
  }
  double worst_fdr = 0.0;
  for (const auto& p : r.curve) worst_fdr = std::max(worst_fdr, std::fabs(p.fdr_forward - p.level));
  v.check(worst_fdr <= 0.05, cat("ForwardStop FDR max |observed - nominal| ", fmt("%.3f", worst_fdr), " <= 0.05"));

  for (std::size_t m = 0; m < fs->metrics.size(); ++m) {
    const auto& f = fs->metrics[m];
    bool best_bias = true, best_cov = true;
    std::string others;
    for (const auto& s : r.rules) {
      if (&s == fs) continue;
      const auto& o2 = s.metrics[m];
      best_bias = best_bias && std::fabs(f.mean_bias) <= std::fabs(o2.mean_bias);
      best_cov = best_cov && f.coverage >= o2.coverage;
      others += cat(" ", to_string(s.rule), " ", fmt("%.4g", o2.mean_bias), "/", fmt("%.3f", o2.coverage));
    }
    const std::string detail =
        cat("(forwardstop ", fmt("%.4g", f.mean_bias), "/", fmt("%.3f", f.coverage), ";", others, ")");
    v.check(best_bias, cat(f.parameter, ": ForwardStop smallest |bias| ", detail));
    v.check(best_cov, cat(f.parameter, ": ForwardStop highest coverage ", detail));
  }
}

// 6. Null table quality

void criterion6(Context& ctx, Verdict& v) {
  const NullTable& t = ctx.ad();
  const std::vector<double> shapes{-0.2, 0.25, 0.6};
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const double xi = shapes[k];
    std::vector<double> ps(2000, std::nan(""));
    parallel_for(ps.size(), ctx.workers, [&](std::size_t r) {
      const auto y = gpd_sample(t.meta.sample_size, {1.0, xi}, derive_seed(6006 + k, r));
      const FitResult f = fit_mle(y);
      if (!f.converged) return;
      ps[r] = pvalue_lookup(edf_statistic(StatisticKind::AD, pit_transform(y, f.params)), f.params.shape, t).p;
    });
    std::erase_if(ps, [](double p) { return std::isnan(p); });
    const double pu = oracle::uniformity_pvalue(ps);
    v.check(ps.size() >= 1990 && pu > 0.01,
            cat("AD p-values at shape ", xi, ": ", ps.size(), " statistics, uniformity chi-square p ", fmt("%.3f", pu),
                " > 0.01"));
  }
  for (const NullTable* table : {&ctx.ad(), &ctx.cvm()}) {
    double worst = 0.0;
    for (std::size_t r = 0; r < table->xi_grid.size(); ++r) {
      const auto& row = table->quantiles[r];
      const double q = row.back();
      const double interp = pvalue_lookup(q, table->xi_grid[r], *table).p;
      const double extra = tail_extrapolate(q, row, table->upper_tail_probs);
      worst = std::max(worst, std::fabs(interp - extra) / table->upper_tail_probs.back());
    }
    v.check(worst < 0.15, cat(to_string(table->kind), " tail boundary max relative gap ", fmt("%.3f", worst), " < 0.15"));
  }
}

// 7. Stopping-rule algebra

void criterion7(Context&, Verdict& v) {
  using P = std::vector<double>;
  auto expect = [&](const char* name, const StoppingDecision& d, std::size_t k, std::optional<std::size_t> chosen) {
    v.check(d.k_hat == k && d.chosen == chosen && d.all_rejected == !chosen,
            cat(name, ": k_hat ", d.k_hat, " (expected ", k, ")"));
  };
  expect("forwardstop (0, 0, 0)", forward_stop(P{0, 0, 0}, 0.05), 3, std::nullopt);
  expect("forwardstop (0.01, 0.01, 0.8)", forward_stop(P{0.01, 0.01, 0.8}, 0.05), 2, 2);
  expect("forwardstop (0.9)", forward_stop(P{0.9}, 0.05), 0, 0);
  expect("strongstop (0.04)", strong_stop(P{0.04}, 0.05), 1, std::nullopt);
  expect("strongstop (0.001, 0.01, 0.9)", strong_stop(P{0.001, 0.01, 0.9}, 0.1), 1, 1);
  expect("strongstop (1, 1, 1)", strong_stop(P{1, 1, 1}, 0.05), 0, 0);
  expect("unadjusted (0.01, 0.2, 0.01)", unadjusted_stop(P{0.01, 0.2, 0.01}, 0.05), 1, 1);
  expect("unadjusted (0.5, 0.01)", unadjusted_stop(P{0.5, 0.01}, 0.05), 0, 0);
  expect("unadjusted (0.01, 0.02)", unadjusted_stop(P{0.01, 0.02}, 0.05), 2, std::nullopt);

  Rng rng(7007);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t l = 1 + static_cast<std::size_t>(rng.uniform() * 30);
    P p(l);
    // Skewed towards small values so that both rules reject a fair share.
    for (double& x : p) x = std::pow(rng.uniform(), 3.0);
    const double alpha = 0.01 + 0.19 * rng.uniform();
    P raised = p;
    const std::size_t j = static_cast<std::size_t>(rng.uniform() * l);
    raised[j] += (1.0 - raised[j]) * rng.uniform();
    violations += forward_stop(raised, alpha).k_hat > forward_stop(p, alpha).k_hat;
    violations += strong_stop(raised, alpha).k_hat > strong_stop(p, alpha).k_hat;
  }
  v.check(violations == 0, cat("raising one p-value increased k_hat in ", violations, " of 20000 rule evaluations"));
}

// 8. Return levels

void criterion8(Context& ctx, Verdict& v) {
  const double z = return_level({2.0, 0.0}, ReturnLevelSpec{5.0, 1.0, 1.0, std::exp(1.0)});
  v.check(std::fabs(z - 7.0) <= 4 * std::numeric_limits<double>::epsilon() * 7.0,
          cat("shape 0, N n_y zeta = e: z = ", fmt("%.17g", z)));

  Rng rng(8008);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const GpdParams g{0.5 + 4.5 * rng.uniform(), -0.4 + 1.2 * rng.uniform()};
    const ReturnLevelSpec s{10.0 * rng.uniform(), 0.01 + 0.2 * rng.uniform(), 365.0, 10.0 + 490.0 * rng.uniform()};
    const ReturnLevelGradient grad = return_level_gradient(g, s);
    auto fd = [&](auto perturb, double h) {
      GpdParams a = g, b = g;
      ReturnLevelSpec sa = s, sb = s;
      perturb(a, sa, h);
      perturb(b, sb, -h);
      return (return_level_oracle(sa.threshold, a.scale, a.shape, sa.exceedances_per_period()) -
              return_level_oracle(sb.threshold, b.scale, b.shape, sb.exceedances_per_period())) /
             (2 * h);
    };
    const double d_scale = fd([](GpdParams& p, ReturnLevelSpec&, double h) { p.scale += h; }, 1e-6 * g.scale);
    const double d_shape = fd([](GpdParams& p, ReturnLevelSpec&, double h) { p.shape += h; }, 1e-6);
    const double d_rate = fd([](GpdParams&, ReturnLevelSpec& q, double h) { q.rate += h; }, 1e-7 * s.rate);
    for (auto [a, b] : {std::pair{grad.d_scale, d_scale}, {grad.d_shape, d_shape}, {grad.d_rate, d_rate}})
      worst = std::max(worst, std::fabs(a - b) / std::max(1.0, std::fabs(b)));
  }
  v.check(worst < 1e-5, cat("gradient vs central differences max relative error ", fmt("%.2e", worst), " < 1e-5"));

  constexpr int reps = 1000;
  const ReturnLevelSpec spec{0.0, 0.05, 365.0, 100.0};
  const double truth = return_level_oracle(0.0, 2.0, 0.25, spec.exceedances_per_period());
  std::vector<int> cover(reps, -1), upper_longer(reps, 0);
  parallel_for(reps, ctx.workers, [&](std::size_t r) {
    const auto y = gpd_sample(2000, {2.0, 0.25}, derive_seed(8009, r));
    const FitResult f = fit_mle(y);
    if (!f.converged) return;
    try {
      const ReturnLevelEstimate e = profile_ci(y, f, spec);
      cover[r] = e.ci_low <= truth && truth <= e.ci_high;
      upper_longer[r] = e.ci_high - e.estimate > e.estimate - e.ci_low;
    } catch (const EstimateUnavailableError&) {
    }
  });
  int n = 0, hits = 0, longer = 0;
  for (int r = 0; r < reps; ++r)
    if (cover[r] >= 0) ++n, hits += cover[r], longer += upper_longer[r];
  const double coverage = 100.0 * hits / std::max(n, 1);
  v.check(n == reps, cat("profile intervals computed for ", n, " of ", reps));
  v.check(coverage >= 92.5 && coverage <= 97.5,
          cat("profile 95% coverage of z_100 ", fmt("%.1f", coverage), "% in [92.5, 97.5]"));
  v.check(longer > 0.8 * n, cat("upper side longer in ", longer, " of ", n, " (> 80%)"));
}

// 9. Batch pipeline

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void criterion9(Context& ctx, Verdict& v) {
  const fs::path dir = ctx.work_dir / "acceptance_corpus";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<StationSeries> corpus;
  for (int i = 0; i < 100; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "ACC%08d", i);
    const std::uint64_t seed = derive_seed(9009, i);
    StationSeries s;
    if (i % 10 == 9) {
      s = synthetic::gpd_site(id, 1960, 30, seed);  // too short
    } else if (i % 3 == 0) {
      double unused = 0.0;
      s = synthetic::mixture_site(id, 1950, 52, seed, 0.8, &unused);
      for (auto& o : s.observations) o.value = std::ceil(o.value * 10.0) / 10.0;
    } else {
      s = synthetic::gpd_site(id, 1950, 50 + i % 5, seed, 0.35, 4.0, 0.05 * (i % 4));
    }
    corpus.push_back(s);
    std::ofstream out(dir / (std::string(id) + ".dly"));
    write_ghcn_dly(out, s);
  }

  int exact = 0;
  for (const auto& s : corpus) {
    const auto back = load_station_file((dir / (s.station_id + ".dly")).string());
    exact += back.size() == 1 && back[0].station_id == s.station_id && back[0].observations == s.observations;
  }
  v.check(exact == 100, cat(".dly round trip exact for ", exact, " of 100 sites"));

  BatchConfig cfg;
  cfg.test = TestKind::AD;
  const fs::path one = ctx.work_dir / "acceptance_w1.csv", eight = ctx.work_dir / "acceptance_w8.csv";
  cfg.workers = 1;
  const BatchSummary s1 = run_batch(dir.string(), one.string(), cfg, &ctx.ad());
  cfg.workers = 8;
  const BatchSummary s8 = run_batch(dir.string(), eight.string(), cfg, &ctx.ad());
  v.check(slurp(one) == slurp(eight), "results CSV byte-identical for 1 and 8 workers");

  std::istringstream rows(slurp(one));
  std::string line;
  std::getline(rows, line);
  std::multiset<std::string> ids;
  std::map<std::string, int> statuses;
  while (std::getline(rows, line)) {
    const auto c1 = line.find(',');
    ids.insert(line.substr(0, c1));
    ++statuses[line.substr(c1 + 1, line.find(',', c1 + 1) - c1 - 1)];
  }
  bool one_each = ids.size() == 100;
  for (const auto& s : corpus) one_each = one_each && ids.count(s.station_id) == 1;
  std::size_t counted = 0;
  for (auto c : s1.by_status) counted += c;
  std::string mix;
  for (const auto& [k, n] : statuses) mix += cat(" ", k, "=", n);
  v.check(one_each && counted == 100 && s1.unreadable.empty() && s8.unreadable.empty(),
          cat("one status row per site, summary counts sum to ", counted, " (", mix.substr(1), ")"));
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  std::vector<int> only;
  CLI::App app{"acceptance criteria"};
  app.add_option("--only", only, "criteria to run (default: all)")->check(CLI::Range(1, 9));
  app.add_option("--workers", ctx.workers)->check(CLI::PositiveNumber);
  app.add_option("--ad-table", ctx.ad_path);
  app.add_option("--cvm-table", ctx.cvm_path);
  app.add_option("--work-dir", ctx.work_dir);
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<void(Context&, Verdict&)>>> criteria{
      {"distribution core", criterion1},  {"estimation", criterion2},       {"power table", criterion3},
      {"StrongStop FWER", criterion4},    {"misspecified mixture", criterion5}, {"null table quality", criterion6},
      {"stopping-rule algebra", criterion7}, {"return levels", criterion8},  {"batch pipeline", criterion9}};

  std::vector<std::string> summary;
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      criteria[i].second(ctx, v);
    } catch (const std::exception& e) {
      v.check(false, cat("threw: ", e.what()));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << id << " (" << criteria[i].first << ", " << fmt("%.0f", secs) << " s)\n";
    for (const auto& n : v.notes()) std::cout << "    " << n << '\n';
    std::cout << std::flush;
    all = all && v.passed();
    std::string line = cat("criterion ", id, ": ", v.passed() ? "PASS" : "FAIL", "  ", criteria[i].first);
    if (!v.passed()) line += cat(" (", v.failures().size(), " of ", v.notes().size(), " checks failed)");
    summary.push_back(line);
  }
  std::cout << "\nacceptance summary\n";
  for (const auto& s : summary) std::cout << s << '\n';
  return all ? 0 : 1;
}
