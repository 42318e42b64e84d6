#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "potsel/errors.hpp"
#include "potsel/gpd.hpp"
#include "potsel/rng.hpp"
#include "potsel/sequential.hpp"

using namespace potsel;

namespace {

std::size_t brute_forward(const std::vector<double>& p, double alpha) {
  std::size_t best = 0;
  double acc = 0.0;
  for (std::size_t k = 1; k <= p.size(); ++k) {
    acc += -std::log(1.0 - p[k - 1]);
    if (acc / k <= alpha) best = k;
  }
  return best;
}

std::size_t brute_strong(const std::vector<double>& p, double alpha) {
  const double l = static_cast<double>(p.size());
  for (std::size_t k = p.size(); k >= 1; --k) {
    double acc = 0.0;
    for (std::size_t j = k; j <= p.size(); ++j) acc += std::log(p[j - 1]) / j;
    if (std::exp(acc) <= alpha * k / l) return k;
  }
  return 0;
}

std::size_t brute_unadjusted(const std::vector<double>& p, double alpha) {
  std::size_t k = 0;
  while (k < p.size() && p[k] <= alpha) ++k;
  return k;
}

void check_shape(const StoppingDecision& d, std::size_t l) {
  CHECK(d.k_hat <= l);
  CHECK(d.all_rejected == (d.k_hat == l));
  CHECK(d.chosen.has_value() == !d.all_rejected);
  if (d.chosen) CHECK(*d.chosen == d.k_hat);
}

std::vector<double> random_p(Rng& rng) {
  const std::size_t l = 1 + static_cast<std::size_t>(rng.uniform() * 20);
  std::vector<double> p(l);
  for (auto& v : p) {
    const double u = rng.uniform();
    v = u < 0.5 ? std::pow(rng.uniform(), 4.0) : rng.uniform();
  }
  return p;
}

}  // namespace

TEST_CASE("ForwardStop examples") {
  const std::vector<double> zeros{0.0, 0.0, 0.0};
  const StoppingDecision a = forward_stop(zeros, 0.05);
  CHECK(a.k_hat == 3);
  CHECK(a.all_rejected);
  CHECK_FALSE(a.chosen.has_value());

  const std::vector<double> p{0.01, 0.01, 0.8};
  const StoppingDecision b = forward_stop(p, 0.05);
  CHECK(b.k_hat == 2);
  REQUIRE(b.chosen.has_value());
  CHECK(*b.chosen == 2);
  CHECK(-std::log(0.99) == doctest::Approx(0.01005).epsilon(1e-3));
  CHECK((-2 * std::log(0.99) - std::log(0.2)) / 3 == doctest::Approx(0.54318).epsilon(1e-4));

  const StoppingDecision c = forward_stop(std::vector<double>{0.9}, 0.05);
  CHECK(c.k_hat == 0);
  REQUIRE(c.chosen.has_value());
  CHECK(*c.chosen == 0);
}

TEST_CASE("ForwardStop treats p = 1 as an infinite contribution") {
  const StoppingDecision d = forward_stop(std::vector<double>{0.0, 1.0, 0.0, 0.0}, 0.5);
  CHECK(d.k_hat == 1);
}

TEST_CASE("StrongStop examples") {
  const StoppingDecision a = strong_stop(std::vector<double>{0.04}, 0.05);
  CHECK(a.k_hat == 1);
  CHECK(a.all_rejected);

  const std::vector<double> p{0.001, 0.01, 0.9};
  const StoppingDecision b = strong_stop(p, 0.1);
  CHECK(b.k_hat == 1);
  REQUIRE(b.chosen.has_value());
  CHECK(*b.chosen == 1);
  const double c2 = std::exp(std::log(0.01) / 2 + std::log(0.9) / 3);
  CHECK(c2 == doctest::Approx(0.0965).epsilon(1e-3));
  CHECK(c2 > 0.1 * 2 / 3);

  CHECK(strong_stop(std::vector<double>{1.0, 1.0, 1.0}, 0.05).k_hat == 0);
  CHECK(strong_stop(std::vector<double>{0.5, 0.0, 0.9}, 0.05).k_hat == 2);
}

TEST_CASE("unadjusted rule examples") {
  const StoppingDecision a = unadjusted_stop(std::vector<double>{0.01, 0.2, 0.01}, 0.05);
  CHECK(a.k_hat == 1);
  REQUIRE(a.chosen.has_value());
  CHECK(*a.chosen == 1);
  CHECK(unadjusted_stop(std::vector<double>{0.5, 0.01}, 0.05).k_hat == 0);
  const StoppingDecision c = unadjusted_stop(std::vector<double>{0.01, 0.02}, 0.05);
  CHECK(c.all_rejected);
  CHECK_FALSE(c.chosen.has_value());
}

TEST_CASE("rule input validation") {
  const std::vector<double> empty;
  CHECK_THROWS_AS((void)forward_stop(empty, 0.05), DomainError);
  CHECK_THROWS_AS((void)strong_stop(empty, 0.05), DomainError);
  CHECK_THROWS_AS((void)unadjusted_stop(empty, 0.05), DomainError);
  CHECK_THROWS_AS((void)forward_stop(std::vector<double>{1.5}, 0.05), DomainError);
  CHECK_THROWS_AS((void)strong_stop(std::vector<double>{-0.1}, 0.05), DomainError);
  CHECK_THROWS_AS((void)apply_rule(StoppingRule::ForwardStop, std::vector<double>{0.1}, 1.0), DomainError);
  for (StoppingRule r : {StoppingRule::ForwardStop, StoppingRule::StrongStop, StoppingRule::Unadjusted}) {
    CHECK(stopping_rule_from_string(to_string(r)) == r);
  }
  CHECK_THROWS_AS((void)stopping_rule_from_string("bonferroni"), DomainError);
}

TEST_CASE("rules agree with brute-force definitions") {
  Rng rng(9);
  for (int rep = 0; rep < 10000; ++rep) {
    const auto p = random_p(rng);
    const double alpha = 0.3 * rng.uniform();
    const auto f = forward_stop(p, alpha);
    const auto s = strong_stop(p, alpha);
    const auto u = unadjusted_stop(p, alpha);
    CHECK(f.k_hat == brute_forward(p, alpha));
    CHECK(s.k_hat == brute_strong(p, alpha));
    CHECK(u.k_hat == brute_unadjusted(p, alpha));
    check_shape(f, p.size());
    check_shape(s, p.size());
    check_shape(u, p.size());
  }
}

TEST_CASE("raising one p-value never increases the rejections") {
  Rng rng(10);
  for (int rep = 0; rep < 10000; ++rep) {
    auto p = random_p(rng);
    const double alpha = 0.3 * rng.uniform();
    const auto f0 = forward_stop(p, alpha).k_hat;
    const auto s0 = strong_stop(p, alpha).k_hat;
    const auto u0 = unadjusted_stop(p, alpha).k_hat;
    const auto i = static_cast<std::size_t>(rng.uniform() * p.size());
    p[i] += (1.0 - p[i]) * rng.uniform();
    CHECK(forward_stop(p, alpha).k_hat <= f0);
    CHECK(strong_stop(p, alpha).k_hat <= s0);
    CHECK(unadjusted_stop(p, alpha).k_hat <= u0);
  }
}

TEST_CASE("exceedances_over keeps strict exceedances") {
  const std::vector<double> x{1.0, 2.0, 2.0, 3.5, 0.5};
  const auto e = exceedances_over(x, 2.0);
  REQUIRE(e.size() == 1);
  CHECK(e[0] == doctest::Approx(1.5));
}

TEST_CASE("ladder deduplicates thresholds and skips thin ones") {
  const auto data = gpd_sample(400, {1.0, 0.2}, 301);
  std::vector<double> sorted(data);
  std::sort(sorted.begin(), sorted.end());
  const std::vector<double> thresholds{sorted[100], 0.0, sorted[100], sorted[200], sorted[395]};
  LadderOptions o;
  o.test = TestKind::Moran;
  const LadderOutcome out = run_ladder(data, thresholds, o);
  REQUIRE(out.ladder.rungs.size() == 3);
  CHECK(out.ladder.rungs[0].threshold == 0.0);
  CHECK(out.ladder.rungs[1].threshold == sorted[100]);
  CHECK(out.ladder.rungs[2].threshold == sorted[200]);
  REQUIRE(out.ladder.skipped.size() == 1);
  CHECK(out.ladder.skipped[0].threshold == sorted[395]);
  CHECK(out.ladder.skipped[0].n_exceed == 4);
  for (std::size_t i = 1; i < out.ladder.rungs.size(); ++i)
    CHECK(out.ladder.rungs[i].n_exceed <= out.ladder.rungs[i - 1].n_exceed);
  CHECK(out.ladder.p_values().size() == 3);
}

TEST_CASE("ladder needs two usable thresholds") {
  const auto data = gpd_sample(100, {1.0, 0.2}, 302);
  LadderOptions o;
  o.test = TestKind::Moran;
  CHECK_THROWS_AS((void)run_ladder(data, std::vector<double>{0.0, 1e6}, o), LadderError);
  o.test = TestKind::AD;
  CHECK_THROWS_AS((void)run_ladder(data, std::vector<double>{0.0, 0.1}, o), DomainError);
}

TEST_CASE("ladder returns an MLE fit at the chosen threshold") {
  const auto data = gpd_sample(1000, {1.0, 0.2}, 303);
  const std::vector<double> thresholds{0.0, 0.2, 0.5, 1.0};
  LadderOptions o;
  o.test = TestKind::Moran;
  o.rule = StoppingRule::StrongStop;
  const LadderOutcome a = run_ladder(data, thresholds, o);
  o.workers = 2;
  const LadderOutcome b = run_ladder(data, thresholds, o);
  CHECK(a.ladder.p_values() == b.ladder.p_values());
  CHECK(a.decision.k_hat == b.decision.k_hat);
  if (a.decision.chosen) {
    REQUIRE(a.chosen_fit.has_value());
    REQUIRE(a.chosen_threshold.has_value());
    CHECK(a.chosen_fit->method == FitMethod::Mle);
    CHECK(*a.chosen_threshold == a.ladder.rungs[*a.decision.chosen].threshold);
    CHECK(a.chosen_fit->n == exceedances_over(data, *a.chosen_threshold).size());
  }
}

TEST_CASE("percentile thresholds sit on order statistics") {
  std::vector<double> data;
  for (int i = 100; i >= 1; --i) data.push_back(i);
  const std::vector<double> q{5, 10, 50, 99.5};
  const auto u = percentile_thresholds(data, q);
  CHECK(u == std::vector<double>{5, 10, 50, 100});
  CHECK(exceedances_over(data, u[0]).size() == 95);
  CHECK_THROWS_AS((void)percentile_thresholds(data, std::vector<double>{0.0}), DomainError);
  CHECK_THROWS_AS((void)percentile_thresholds(std::vector<double>{}, q), InsufficientDataError);
}

TEST_CASE("per-rung p-values are uniform on a null ladder") {
  std::vector<std::vector<double>> per_rung(5);
  for (int rep = 0; rep < 600; ++rep) {
    const auto data = gpd_sample(300, {1.0, 0.25}, derive_seed(304, rep));
    const auto thresholds = percentile_thresholds(data, std::vector<double>{5, 15, 25, 35, 45});
    LadderOptions o;
    o.test = TestKind::Moran;
    const LadderOutcome out = run_ladder(data, thresholds, o);
    if (out.ladder.rungs.size() != 5) continue;
    for (std::size_t k = 0; k < 5; ++k) per_rung[k].push_back(out.ladder.rungs[k].result.p_value);
  }
  for (const auto& ps : per_rung) {
    REQUIRE(ps.size() >= 590);
    CHECK(oracle::uniformity_pvalue(ps, 10) > 0.001);
  }
}
