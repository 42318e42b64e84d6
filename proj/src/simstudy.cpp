#include "potsel/simstudy.hpp"

#include <algorithm>
#include <array>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>

#include "potsel/errors.hpp"
#include "potsel/estimation.hpp"
#include "potsel/gpd.hpp"
#include "potsel/parallel.hpp"
#include "potsel/return_levels.hpp"

namespace potsel {

namespace {

// Neumaier-compensated running sum.
class Sum {
 public:
  void add(double v) {
    const double t = s_ + v;
    c_ += std::fabs(s_) >= std::fabs(v) ? (s_ - t) + v : (v - t) + s_;
    s_ = t;
  }
  [[nodiscard]] double value() const { return s_ + c_; }

 private:
  double s_ = 0.0, c_ = 0.0;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt_param(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

LadderOptions ladder_options(TestKind test, const StudyTables& tables, const BootstrapOptions& boot) {
  LadderOptions o;
  o.test = test;
  o.bootstrap = boot;
  if (test == TestKind::AD) o.table = tables.ad;
  if (test == TestKind::CVM) o.table = tables.cvm;
  if ((test == TestKind::AD || test == TestKind::CVM) && o.table == nullptr) {
    throw DomainError("the " + std::string(to_string(test)) + " test needs a null table");
  }
  return o;
}

std::size_t count_at_most(std::span<const double> p, double level) {
  return static_cast<std::size_t>(std::count_if(p.begin(), p.end(), [&](double v) { return v <= level; }));
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

std::string Generator::name() const {
  const std::string ab = fmt_param(a) + ", " + fmt_param(b);
  switch (kind) {
    case GeneratorKind::Gamma: return "Gamma(" + ab + ")";
    case GeneratorKind::LogNormal: return "LogNormal(" + ab + ")";
    case GeneratorKind::Weibull: return "Weibull(" + ab + ")";
    case GeneratorKind::GpdMix: return "GPDMix(" + ab + ")";
    case GeneratorKind::Gpd: return "GPD(" + ab + ")";
    case GeneratorKind::BetaGpdMix: return "BetaGPDMix";
  }
  return "?";
}

std::vector<double> Generator::sample(std::size_t n, Rng& rng) const {
  std::vector<double> x(n);
  switch (kind) {
    case GeneratorKind::Gamma:
      for (auto& v : x) v = b * boost::math::gamma_p_inv(a, rng.uniform());
      break;
    case GeneratorKind::LogNormal: {
      const boost::math::normal norm;
      for (auto& v : x) v = std::exp(a + b * boost::math::quantile(norm, rng.uniform()));
      break;
    }
    case GeneratorKind::Weibull:
      for (auto& v : x) v = a * std::pow(-std::log(rng.uniform()), 1.0 / b);
      break;
    case GeneratorKind::GpdMix:
      for (auto& v : x) {
        const double shape = rng.uniform() < 0.5 ? a : b;
        v = gpd_quantile(rng.uniform(), {1.0, shape});
      }
      break;
    case GeneratorKind::Gpd:
      for (auto& v : x) v = gpd_quantile(rng.uniform(), {a, b});
      break;
    case GeneratorKind::BetaGpdMix: return mixture_generator(n / 2, n - n / 2, rng);
  }
  return x;
}

Generator gamma_generator(double shape, double scale) { return {GeneratorKind::Gamma, shape, scale}; }
Generator lognormal_generator(double mu, double sigma) { return {GeneratorKind::LogNormal, mu, sigma}; }
Generator weibull_generator(double scale, double shape) { return {GeneratorKind::Weibull, scale, shape}; }
Generator gpd_mix_generator(double shape_a, double shape_b) { return {GeneratorKind::GpdMix, shape_a, shape_b}; }
Generator gpd_generator(double scale, double shape) { return {GeneratorKind::Gpd, scale, shape}; }

std::vector<Generator> power_study_generators() {
  return {gamma_generator(2.0, 1.0),      lognormal_generator(0.0, 1.0), weibull_generator(1.0, 0.75),
          weibull_generator(1.0, 1.25),   gpd_mix_generator(-0.4, 0.4),  gpd_mix_generator(0.0, 0.4),
          gpd_mix_generator(-0.25, 0.25), gpd_generator(1.0, 0.25)};
}

std::vector<double> mixture_generator(std::size_t n1, std::size_t n2, Rng& rng) {
  std::vector<double> x;
  x.reserve(n1 + n2);
  for (std::size_t i = 0; i < n1; ++i) x.push_back(kMixtureChangepoint * std::sqrt(rng.uniform()));
  const GpdParams tail{kMixtureTail.scale, kMixtureTail.shape};
  for (std::size_t i = 0; i < n2; ++i) x.push_back(kMixtureChangepoint + gpd_quantile(rng.uniform(), tail));
  return x;
}

std::vector<double> mixture_generator(std::size_t n1, std::size_t n2, std::uint64_t seed) {
  Rng rng(seed);
  return mixture_generator(n1, n2, rng);
}

void Scenario::validate() const {
  if (replicates < 100) throw DomainError("a scenario needs at least 100 replicates");
  if (n < 10) throw DomainError("a scenario needs samples of at least 10 points");
}

double RateCell::rate() const { return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0; }

double RateCell::se() const {
  if (!total) return 0.0;
  const double r = rate();
  return std::sqrt(r * (1.0 - r) / static_cast<double>(total));
}

PowerReport power_study(const std::vector<Scenario>& scenarios, const PowerOptions& opts) {
  enum class Outcome : unsigned char { Accept, Reject, Unavailable };
  std::vector<LadderOptions> per_test;
  for (TestKind t : opts.tests) {
    LadderOptions o = ladder_options(t, opts.tables, opts.bootstrap);
    o.score_k = opts.score_k;
    per_test.push_back(o);
  }

  PowerReport report;
  report.alpha = opts.alpha;
  for (const Scenario& sc : scenarios) {
    sc.validate();
    std::vector<std::vector<Outcome>> outcomes(sc.replicates);
    std::vector<char> failed(sc.replicates, 0);
    parallel_for(sc.replicates, opts.workers, [&](std::size_t rep) {
      Rng rng(derive_seed(sc.seed, rep));
      const auto x = sc.generator.sample(sc.n, rng);
      if (!fit_mle(x).converged) {
        failed[rep] = 1;
        return;
      }
      auto& out = outcomes[rep];
      out.reserve(per_test.size());
      for (const auto& o : per_test) {
        try {
          const TestResult r = run_test(x, o);
          out.push_back(r.p_value < opts.alpha ? Outcome::Reject : Outcome::Accept);
        } catch (const TestUnavailableError&) {
          out.push_back(Outcome::Unavailable);
        } catch (const InsufficientDataError&) {
          out.push_back(Outcome::Unavailable);
        }
      }
    });

    const std::size_t n_failed = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
    for (std::size_t t = 0; t < per_test.size(); ++t) {
      PowerCell cell;
      cell.generator = sc.generator.name();
      cell.n = sc.n;
      cell.test = opts.tests[t];
      cell.failed_fits = n_failed;
      for (std::size_t rep = 0; rep < sc.replicates; ++rep) {
        if (failed[rep]) continue;
        const Outcome o = outcomes[rep][t];
        if (o == Outcome::Unavailable) {
          ++cell.unavailable;
          continue;
        }
        ++cell.rejections.total;
        cell.rejections.hits += o == Outcome::Reject;
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

std::vector<double> default_levels() {
  std::vector<double> v;
  for (int i = 1; i <= 10; ++i) v.push_back(i / 100.0);
  return v;
}

FwerReport fwer_null_study(const FwerOptions& opts) {
  if (opts.replicates < 100) throw DomainError("the FWER study needs at least 100 replicates");
  const LadderOptions lo = ladder_options(opts.test, opts.tables, opts.bootstrap);
  const std::size_t nl = opts.levels.size();

  FwerReport report;
  std::uint64_t setting_index = 0;
  for (double shape : opts.shapes) {
    for (std::size_t n : opts.sizes) {
      const std::uint64_t setting_seed = derive_seed(opts.seed, setting_index++);
      // errors[rep][2 * level + rule], rule 0 = StrongStop, 1 = unadjusted
      std::vector<std::vector<char>> errors(opts.replicates, std::vector<char>(2 * nl, 0));
      std::vector<char> ladder_failed(opts.replicates, 0);
      parallel_for(opts.replicates, opts.workers, [&](std::size_t rep) {
        const auto x = gpd_sample(n, {1.0, shape}, derive_seed(setting_seed, rep));
        const auto us = percentile_thresholds(x, opts.percents);
        std::vector<double> p;
        try {
          p = run_ladder(x, us, lo).ladder.p_values();
        } catch (const LadderError&) {
          ladder_failed[rep] = 1;
          return;
        }
        for (std::size_t l = 0; l < nl; ++l) {
          errors[rep][2 * l] = strong_stop(p, opts.levels[l]).k_hat > 0;
          errors[rep][2 * l + 1] = count_at_most(p, opts.levels[l]) > 0;
        }
      });

      FwerSetting s{shape, n, static_cast<std::size_t>(std::count(ladder_failed.begin(), ladder_failed.end(), 1))};
      report.settings.push_back(s);
      for (int rule = 0; rule < 2; ++rule) {
        for (std::size_t l = 0; l < nl; ++l) {
          FwerCell c;
          c.shape = shape;
          c.n = n;
          c.rule = rule == 0 ? StoppingRule::StrongStop : StoppingRule::Unadjusted;
          c.level = opts.levels[l];
          c.errors.total = opts.replicates;
          for (const auto& e : errors) c.errors.hits += e[2 * l + rule];
          report.cells.push_back(c);
        }
      }
    }
  }
  return report;
}

std::vector<double> removal_thresholds(std::span<const double> data, std::size_t count, std::size_t step) {
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  if (count == 0 || step * (count - 1) >= sorted.size()) {
    throw DomainError("removal ladder removes every point");
  }
  std::vector<double> u(count);
  u[0] = 0.0;
  for (std::size_t k = 1; k < count; ++k) u[k] = sorted[step * k - 1];
  return u;
}

double true_mixture_return_level(const MisspecOptions& opts, double period) {
  const double rate = static_cast<double>(opts.n2) / static_cast<double>(opts.n1 + opts.n2);
  return return_level({kMixtureTail.scale, kMixtureTail.shape},
                      {kMixtureChangepoint, rate, opts.obs_per_year, period});
}

MisspecReport misspec_study(const MisspecOptions& opts) {
  if (opts.replicates < 100) throw DomainError("the misspecification study needs at least 100 replicates");
  LadderOptions lo = ladder_options(opts.test, opts.tables, opts.bootstrap);
  lo.alpha = opts.alpha;
  constexpr std::array<StoppingRule, 3> kRules{StoppingRule::ForwardStop, StoppingRule::Unadjusted,
                                               StoppingRule::StrongStop};
  const std::size_t np = 1 + opts.periods.size();
  const std::size_t nl = opts.levels.size();
  const double total_n = static_cast<double>(opts.n1 + opts.n2);
  const double zq = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * opts.ci_level);

  std::vector<double> truth{kMixtureTail.shape};
  for (double N : opts.periods) truth.push_back(true_mixture_return_level(opts, N));

  struct Estimate {
    bool ok = false;
    std::vector<double> value, covered;
  };
  struct Replicate {
    bool ladder_ok = false;
    std::array<std::size_t, 3> k_hat{};
    std::array<bool, 3> all_rejected{};
    std::array<Estimate, 3> est;
    std::vector<double> fdp;
    std::vector<char> strong_error;
  };
  std::vector<Replicate> reps(opts.replicates);

  parallel_for(opts.replicates, opts.workers, [&](std::size_t r) {
    Replicate& out = reps[r];
    const auto x = mixture_generator(opts.n1, opts.n2, derive_seed(opts.seed, r));
    const double beta_max = *std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(opts.n1));
    LadderOutcome ladder;
    try {
      ladder = run_ladder(x, removal_thresholds(x, opts.thresholds, opts.step), lo);
    } catch (const LadderError&) {
      return;
    }
    out.ladder_ok = true;
    const auto& rungs = ladder.ladder.rungs;
    const auto p = ladder.ladder.p_values();
    std::vector<char> null_true(rungs.size());
    for (std::size_t i = 0; i < rungs.size(); ++i) null_true[i] = rungs[i].threshold >= beta_max;
    auto false_rejections = [&](std::size_t k) {
      return static_cast<std::size_t>(std::count(null_true.begin(), null_true.begin() + static_cast<std::ptrdiff_t>(k), 1));
    };

    out.fdp.resize(nl);
    out.strong_error.resize(nl);
    for (std::size_t l = 0; l < nl; ++l) {
      const std::size_t kf = forward_stop(p, opts.levels[l]).k_hat;
      out.fdp[l] = kf ? static_cast<double>(false_rejections(kf)) / static_cast<double>(kf) : 0.0;
      out.strong_error[l] = false_rejections(strong_stop(p, opts.levels[l]).k_hat) > 0;
    }

    std::vector<std::optional<Estimate>> cache(rungs.size());
    auto estimate_at = [&](std::size_t i) -> Estimate {
      Estimate e;
      const FitResult& fit = rungs[i].result.fit;
      if (fit.method != FitMethod::Mle || !fit.converged || !fit.covariance) return e;
      const double se = fit.covariance->se_shape();
      e.value.push_back(fit.params.shape);
      e.covered.push_back(std::fabs(fit.params.shape - truth[0]) <= zq * se);
      const auto y = exceedances_over(x, rungs[i].threshold);
      try {
        for (std::size_t j = 1; j < np; ++j) {
          const ReturnLevelSpec spec{rungs[i].threshold, static_cast<double>(y.size()) / total_n, opts.obs_per_year,
                                     opts.periods[j - 1]};
          const ReturnLevelEstimate ci = profile_ci(y, fit, spec, opts.ci_level);
          const bool lo_ok = ci.low_open || ci.ci_low <= truth[j];
          const bool hi_ok = ci.high_open || truth[j] <= ci.ci_high;
          e.value.push_back(ci.estimate);
          e.covered.push_back(lo_ok && hi_ok);
        }
      } catch (const EstimateUnavailableError&) {
        return {};
      } catch (const DomainError&) {
        return {};
      }
      e.ok = true;
      return e;
    };

    for (std::size_t k = 0; k < kRules.size(); ++k) {
      const StoppingDecision d = apply_rule(kRules[k], p, opts.alpha);
      out.k_hat[k] = d.k_hat;
      out.all_rejected[k] = d.all_rejected;
      if (!d.chosen) continue;
      const std::size_t i = *d.chosen;
      if (!cache[i]) cache[i] = estimate_at(i);
      out.est[k] = *cache[i];
    }
  });

  MisspecReport report;
  report.replicates = opts.replicates;
  for (const auto& r : reps) report.ladder_failures += !r.ladder_ok;

  for (std::size_t k = 0; k < kRules.size(); ++k) {
    RuleSummary s;
    s.rule = kRules[k];
    s.k_hat_counts.assign(opts.thresholds + 1, 0);
    std::vector<double> ks;
    std::vector<Sum> bias(np), sq(np), cov(np);
    std::size_t used = 0;
    for (const auto& r : reps) {
      if (!r.ladder_ok) continue;
      ++s.k_hat_counts[std::min(r.k_hat[k], opts.thresholds)];
      ks.push_back(static_cast<double>(r.k_hat[k]));
      if (r.all_rejected[k]) {
        ++s.all_rejected;
        continue;
      }
      const Estimate& e = r.est[k];
      if (!e.ok) {
        ++s.failed;
        continue;
      }
      ++used;
      for (std::size_t j = 0; j < np; ++j) {
        const double d = e.value[j] - truth[j];
        bias[j].add(d);
        sq[j].add(d * d);
        cov[j].add(e.covered[j]);
      }
    }
    s.median_k_hat = median_of(ks);
    for (std::size_t j = 0; j < np; ++j) {
      ParameterMetrics m;
      m.parameter = j == 0 ? "shape" : "z_" + fmt_param(opts.periods[j - 1]);
      m.truth = truth[j];
      m.count = used;
      if (used) {
        const double u = static_cast<double>(used);
        m.mean_bias = bias[j].value() / u;
        m.mse = sq[j].value() / u;
        m.coverage = cov[j].value() / u;
      }
      s.metrics.push_back(m);
    }
    report.rules.push_back(std::move(s));
  }

  for (std::size_t l = 0; l < nl; ++l) {
    Sum fdp, fdp2;
    RateCell strong;
    std::size_t m = 0;
    for (const auto& r : reps) {
      if (!r.ladder_ok) continue;
      ++m;
      fdp.add(r.fdp[l]);
      fdp2.add(r.fdp[l] * r.fdp[l]);
      ++strong.total;
      strong.hits += r.strong_error[l];
    }
    ErrorCurvePoint pt;
    pt.level = opts.levels[l];
    if (m) {
      const double dm = static_cast<double>(m);
      pt.fdr_forward = fdp.value() / dm;
      const double var = std::max(fdp2.value() / dm - pt.fdr_forward * pt.fdr_forward, 0.0);
      pt.fdr_forward_se = std::sqrt(var / dm);
    }
    pt.fwer_strong = strong.rate();
    pt.fwer_strong_se = strong.se();
    report.curve.push_back(pt);
  }
  return report;
}

void write_power_csv(std::ostream& out, const PowerReport& r) {
  out << "generator,n,test,alpha,rejections,total,rate,se,failed_fits,unavailable\n";
  for (const auto& c : r.cells) {
    out << '"' << c.generator << "\"," << c.n << ',' << to_string(c.test) << ',' << fmt(r.alpha) << ','
        << c.rejections.hits << ',' << c.rejections.total << ',' << fmt(c.rejections.rate()) << ','
        << fmt(c.rejections.se()) << ',' << c.failed_fits << ',' << c.unavailable << '\n';
  }
}

void write_fwer_csv(std::ostream& out, const FwerReport& r) {
  out << "shape,n,rule,level,errors,total,rate,se\n";
  for (const auto& c : r.cells) {
    out << fmt(c.shape) << ',' << c.n << ',' << to_string(c.rule) << ',' << fmt(c.level) << ',' << c.errors.hits
        << ',' << c.errors.total << ',' << fmt(c.errors.rate()) << ',' << fmt(c.errors.se()) << '\n';
  }
}

void write_misspec_kfreq_csv(std::ostream& out, const MisspecReport& r) {
  out << "rule,k_hat,count\n";
  for (const auto& s : r.rules)
    for (std::size_t k = 0; k < s.k_hat_counts.size(); ++k)
      out << to_string(s.rule) << ',' << k << ',' << s.k_hat_counts[k] << '\n';
}

void write_misspec_curve_csv(std::ostream& out, const MisspecReport& r) {
  out << "level,fdr_forwardstop,fdr_forwardstop_se,fwer_strongstop,fwer_strongstop_se\n";
  for (const auto& p : r.curve) {
    out << fmt(p.level) << ',' << fmt(p.fdr_forward) << ',' << fmt(p.fdr_forward_se) << ',' << fmt(p.fwer_strong)
        << ',' << fmt(p.fwer_strong_se) << '\n';
  }
}

void write_misspec_metrics_csv(std::ostream& out, const MisspecReport& r) {
  out << "rule,parameter,truth,count,mean_bias,mse,coverage\n";
  for (const auto& s : r.rules)
    for (const auto& m : s.metrics)
      out << to_string(s.rule) << ',' << m.parameter << ',' << fmt(m.truth) << ',' << m.count << ','
          << fmt(m.mean_bias) << ',' << fmt(m.mse) << ',' << fmt(m.coverage) << '\n';
}

void write_summary(std::ostream& out, const PowerReport& r) {
  out << "power study, rejection at level " << fmt(r.alpha) << " (percent, SE)\n";
  for (const auto& c : r.cells) {
    char line[200];
    std::snprintf(line, sizeof line, "  %-22s n=%-4zu %-6s %6.1f (%4.1f)  failed fits %zu, unavailable %zu\n",
                  c.generator.c_str(), c.n, std::string(to_string(c.test)).c_str(), 100.0 * c.rejections.rate(),
                  100.0 * c.rejections.se(), c.failed_fits, c.unavailable);
    out << line;
  }
}

void write_summary(std::ostream& out, const FwerReport& r) {
  out << "FWER under the null (observed / nominal)\n";
  for (const auto& s : r.settings) {
    out << "  shape " << fmt(s.shape) << ", n " << s.n;
    if (s.ladder_failures) out << " (" << s.ladder_failures << " ladder failures)";
    out << '\n';
    for (const auto& c : r.cells) {
      if (c.shape != s.shape || c.n != s.n) continue;
      char line[120];
      std::snprintf(line, sizeof line, "    %-10s level %.3f  observed %.4f (SE %.4f)\n",
                    std::string(to_string(c.rule)).c_str(), c.level, c.errors.rate(), c.errors.se());
      out << line;
    }
  }
}

void write_summary(std::ostream& out, const MisspecReport& r) {
  out << "misspecification study, " << r.replicates << " replicates";
  if (r.ladder_failures) out << ", " << r.ladder_failures << " ladder failures";
  out << '\n';
  for (const auto& s : r.rules) {
    out << "  " << to_string(s.rule) << ": median k_hat " << fmt(s.median_k_hat) << ", all rejected "
        << s.all_rejected << ", failed " << s.failed << '\n';
    for (const auto& m : s.metrics) {
      char line[160];
      std::snprintf(line, sizeof line, "    %-8s truth %9.4f  bias %9.4f  mse %10.4f  coverage %.3f\n",
                    m.parameter.c_str(), m.truth, m.mean_bias, m.mse, m.coverage);
      out << line;
    }
  }
  out << "  level  FDR(ForwardStop)  FWER(StrongStop)\n";
  for (const auto& p : r.curve) {
    char line[120];
    std::snprintf(line, sizeof line, "  %.3f  %.4f            %.4f\n", p.level, p.fdr_forward, p.fwer_strong);
    out << line;
  }
}

}  // namespace potsel
