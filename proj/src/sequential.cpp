#include "potsel/sequential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "potsel/errors.hpp"
#include "potsel/parallel.hpp"

namespace potsel {

namespace {

void check_inputs(std::span<const double> p, double alpha) {
  if (p.empty()) throw DomainError("stopping rule needs at least one p-value");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in [0, 1)");
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("p-values must lie in [0, 1]");
  }
}

StoppingDecision make_decision(StoppingRule rule, double alpha, std::size_t k_hat, std::size_t l) {
  StoppingDecision d;
  d.rule = rule;
  d.alpha = alpha;
  d.k_hat = k_hat;
  d.all_rejected = k_hat == l;
  if (!d.all_rejected) d.chosen = k_hat;
  return d;
}

}  // namespace

std::string_view to_string(StoppingRule r) {
  switch (r) {
    case StoppingRule::ForwardStop: return "forwardstop";
    case StoppingRule::StrongStop: return "strongstop";
    case StoppingRule::Unadjusted: return "unadjusted";
  }
  return "?";
}

StoppingRule stopping_rule_from_string(std::string_view s) {
  if (s == "forwardstop" || s == "forward" || s == "FORWARD_STOP") return StoppingRule::ForwardStop;
  if (s == "strongstop" || s == "strong" || s == "STRONG_STOP") return StoppingRule::StrongStop;
  if (s == "unadjusted" || s == "none" || s == "UNADJUSTED") return StoppingRule::Unadjusted;
  throw DomainError("unknown stopping rule '" + std::string(s) + "'");
}

StoppingDecision forward_stop(std::span<const double> p, double alpha) {
  check_inputs(p, alpha);
  double cum = 0.0;
  std::size_t k_hat = 0;
  for (std::size_t k = 1; k <= p.size(); ++k) {
    const double pk = p[k - 1];
    cum += pk <= 1.0 - 1e-16 ? -std::log1p(-pk) : std::numeric_limits<double>::infinity();
    if (cum / static_cast<double>(k) <= alpha) k_hat = k;
  }
  return make_decision(StoppingRule::ForwardStop, alpha, k_hat, p.size());
}

StoppingDecision strong_stop(std::span<const double> p, double alpha) {
  check_inputs(p, alpha);
  const std::size_t l = p.size();
  double tail = 0.0;  // sum_{j>=k} log(p_j)/j
  std::size_t k_hat = 0;
  for (std::size_t k = l; k >= 1; --k) {
    tail += std::log(p[k - 1]) / static_cast<double>(k);
    if (std::exp(tail) <= alpha * static_cast<double>(k) / static_cast<double>(l)) {
      k_hat = k;
      break;
    }
  }
  return make_decision(StoppingRule::StrongStop, alpha, k_hat, l);
}

StoppingDecision unadjusted_stop(std::span<const double> p, double alpha) {
  check_inputs(p, alpha);
  std::size_t k_hat = 0;
  while (k_hat < p.size() && p[k_hat] <= alpha) ++k_hat;
  return make_decision(StoppingRule::Unadjusted, alpha, k_hat, p.size());
}

StoppingDecision apply_rule(StoppingRule rule, std::span<const double> p, double alpha) {
  switch (rule) {
    case StoppingRule::ForwardStop: return forward_stop(p, alpha);
    case StoppingRule::StrongStop: return strong_stop(p, alpha);
    case StoppingRule::Unadjusted: return unadjusted_stop(p, alpha);
  }
  throw DomainError("unknown stopping rule");
}

std::vector<double> ThresholdLadder::p_values() const {
  std::vector<double> p;
  p.reserve(rungs.size());
  for (const auto& r : rungs) p.push_back(r.result.p_value);
  return p;
}

std::vector<double> exceedances_over(std::span<const double> data, double u) {
  std::vector<double> y;
  for (double x : data)
    if (x > u) y.push_back(x - u);
  return y;
}

std::vector<double> percentile_thresholds(std::span<const double> data, std::span<const double> percents) {
  if (data.empty()) throw InsufficientDataError("percentile thresholds need data");
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<double> out;
  out.reserve(percents.size());
  for (double q : percents) {
    if (!(q > 0.0 && q < 100.0)) throw DomainError("percentile must lie in (0, 100)");
    const double rank = std::ceil(q / 100.0 * n - 1e-9);
    out.push_back(sorted[static_cast<std::size_t>(std::clamp(rank, 1.0, n)) - 1]);
  }
  return out;
}

TestResult run_test(std::span<const double> y, const LadderOptions& opts) {
  switch (opts.test) {
    case TestKind::AD:
    case TestKind::CVM:
      if (opts.table == nullptr) throw DomainError("AD/CVM tests need a null table");
      return opts.test == TestKind::AD ? ad_test(y, *opts.table, opts.bootstrap)
                                       : cvm_test(y, *opts.table, opts.bootstrap);
    case TestKind::Moran: return moran_test(y);
    case TestKind::Score: return score_test(y, opts.score_k);
  }
  throw DomainError("unknown test");
}

LadderOutcome run_ladder(std::span<const double> data, std::span<const double> thresholds,
                         const LadderOptions& opts) {
  std::vector<double> us(thresholds.begin(), thresholds.end());
  std::sort(us.begin(), us.end());
  us.erase(std::unique(us.begin(), us.end()), us.end());

  struct Slot {
    std::size_t n = 0;
    std::optional<TestResult> result;
    std::string reason;
  };
  std::vector<Slot> slots(us.size());
  parallel_for(us.size(), opts.workers, [&](std::size_t i) {
    const auto y = exceedances_over(data, us[i]);
    slots[i].n = y.size();
    if (y.size() < opts.min_exceedances) {
      slots[i].reason = "fewer than " + std::to_string(opts.min_exceedances) + " exceedances";
      return;
    }
    try {
      slots[i].result = run_test(y, opts);
    } catch (const TestUnavailableError& e) {
      slots[i].reason = e.what();
    } catch (const InsufficientDataError& e) {
      slots[i].reason = e.what();
    }
  });

  LadderOutcome out;
  for (std::size_t i = 0; i < us.size(); ++i) {
    if (slots[i].result) {
      out.ladder.rungs.push_back({us[i], slots[i].n, std::move(*slots[i].result)});
    } else {
      out.ladder.skipped.push_back({us[i], slots[i].n, slots[i].reason});
    }
  }
  if (out.ladder.rungs.size() < 2) throw LadderError("fewer than 2 usable thresholds");
  const auto p = out.ladder.p_values();
  out.decision = apply_rule(opts.rule, p, opts.alpha);
  if (out.decision.chosen) {
    const auto& rung = out.ladder.rungs[*out.decision.chosen];
    FitResult fit = rung.result.fit;
    if (fit.method != FitMethod::Mle) fit = fit_mle(exceedances_over(data, rung.threshold));
    fit.params.threshold = rung.threshold;
    out.chosen_fit = fit;
    out.chosen_threshold = rung.threshold;
  }
  return out;
}

}  // namespace potsel
