#include "potsel/gof.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "potsel/errors.hpp"
#include "potsel/stats_util.hpp"

namespace potsel {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kMinPerInterval = 5;

// Excesses grouped by piecewise interval, measured from the interval's lower cut.
struct PiecewiseData {
  std::vector<double> cuts;
  std::vector<std::vector<double>> groups;
  std::vector<std::size_t> beyond;  // points in later intervals
};

PiecewiseData group_by_interval(std::span<const double> cuts, std::span<const double> y) {
  PiecewiseData d;
  d.cuts.assign(cuts.begin(), cuts.end());
  const std::size_t k = cuts.size();
  d.groups.resize(k + 1);
  for (double v : y) {
    const auto i = static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
    d.groups[i].push_back(v - (i == 0 ? 0.0 : cuts[i - 1]));
  }
  d.beyond.assign(k + 1, 0);
  std::size_t acc = 0;
  for (std::size_t i = k + 1; i-- > 0;) {
    d.beyond[i] = acc;
    acc += d.groups[i].size();
  }
  return d;
}

double piecewise_loglik_grouped(std::span<const double> params, const PiecewiseData& d) {
  double scale = params[0];
  double total = 0.0;
  const std::size_t k = d.cuts.size();
  for (std::size_t i = 0; i <= k; ++i) {
    if (!(scale > 0.0)) return kNegInf;
    const GpdParams p{scale, params[1 + i], 0.0};
    for (double v : d.groups[i]) total += gpd_logpdf(v, p);
    if (i < k) {
      const double width = d.cuts[i] - (i == 0 ? 0.0 : d.cuts[i - 1]);
      if (d.beyond[i] > 0) total += static_cast<double>(d.beyond[i]) * gpd_log_survival(width, p);
      scale += p.shape * width;
    }
    if (!std::isfinite(total)) return kNegInf;
  }
  return total;
}

// (log(a) - x/a) / x^2 with a = 1 + x
double g_term(double x, double a) {
  if (std::fabs(x) < 1e-2) {
    double sum = 0.0, pw = 1.0;
    for (int j = 2; j < 12; ++j) {
      sum += ((j % 2 == 0) ? 1.0 : -1.0) * (j - 1.0) / j * pw;
      pw *= x;
    }
    return sum;
  }
  return (std::log(a) - x / a) / (x * x);
}

// Partial derivatives of log S (density = false) or log f wrt (scale, shape), given
// z = v / scale and a = 1 + shape * z.
std::pair<double, double> gpd_partials(double z, double a, double scale, double shape, bool density) {
  double ds = z / (scale * a);
  double dx = z * z * g_term(a - 1.0, a);
  if (density) {
    ds = -1.0 / scale + (1.0 + shape) * z / (scale * a);
    dx -= z / a;
  }
  return {ds, dx};
}

// Score of one observation in interval i with excess v over that interval's lower cut.
// A non-negative `tail_t` replaces v by the excess whose conditional log-survival is -tail_t.
void point_score(const GpdParams& p, std::span<const double> cuts, std::size_t i, double v,
                 std::vector<double>& out, double tail_t = -1.0) {
  std::fill(out.begin(), out.end(), 0.0);
  double scale = p.scale;
  double lower = 0.0;
  std::vector<double> widths(i), dscale(i + 1);
  for (std::size_t j = 0; j <= i; ++j) {
    const bool last = j == i;
    const double w = last ? v : cuts[j] - lower;
    double z = w / scale;
    double a = 1.0 + p.shape * z;
    if (last && tail_t >= 0.0) {
      const bool flat = std::fabs(p.shape) < kShapeZeroTol;
      z = flat ? tail_t : std::expm1(p.shape * tail_t) / p.shape;
      a = std::exp(p.shape * tail_t);
    }
    const auto [ds, dx] = gpd_partials(z, a, scale, p.shape, last);
    dscale[j] = ds;
    out[1 + j] += dx;
    if (!last) {
      widths[j] = w;
      lower = cuts[j];
      scale += p.shape * w;
    }
  }
  double tail = 0.0;
  for (std::size_t j = i + 1; j-- > 0;) {
    if (j < i) out[1 + j] += tail * widths[j];
    tail += dscale[j];
  }
  out[0] = tail;
}

const std::vector<std::pair<double, double>>& laguerre_rule() {
  static const std::vector<std::pair<double, double>> rule = [] {
    constexpr int m = 48;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      jac(i, i) = 2.0 * i + 1.0;
      if (i > 0) jac(i, i - 1) = jac(i - 1, i) = i;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    std::vector<std::pair<double, double>> out;
    for (int i = 0; i < m; ++i) {
      const double w0 = es.eigenvectors()(0, i);
      out.emplace_back(es.eigenvalues()(i), w0 * w0);
    }
    return out;
  }();
  return rule;
}

// Expected information n E[s s'] under the restricted GPD, row-major.
std::vector<double> expected_information(const GpdParams& p, std::span<const double> cuts, std::size_t n) {
  const std::size_t dim = cuts.size() + 2;
  std::vector<double> info(dim * dim, 0.0), s(dim);
  auto accumulate = [&](std::size_t i, double y, double weight, double tail_t = -1.0) {
    const double lower = i == 0 ? 0.0 : cuts[i - 1];
    point_score(p, cuts, i, std::max(y - lower, 0.0), s, tail_t);
    for (std::size_t a = 0; a < dim; ++a)
      for (std::size_t b = a; b < dim; ++b) info[a * dim + b] += weight * s[a] * s[b];
  };
  using Gauss = boost::math::quadrature::gauss<double, 30>;
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    const double lo = i == 0 ? 0.0 : gpd_cdf(cuts[i - 1], p);
    const double hi = gpd_cdf(cuts[i], p);
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    const auto& x = Gauss::abscissa();
    const auto& w = Gauss::weights();
    for (std::size_t q = 0; q < x.size(); ++q) {
      for (double sign : {-1.0, 1.0}) {
        if (q == 0 && sign > 0.0 && x[0] == 0.0) continue;
        accumulate(i, gpd_quantile(mid + sign * half * x[q], p), w[q] * half);
      }
    }
  }
  // Tail interval: conditional log-survival beyond the last cut is -t, t ~ Exp(1).
  const double s0 = std::exp(gpd_log_survival(cuts.back(), p));
  // Rescaling t matches the e^{2|shape| t} growth of s s' when shape < 0.
  const double lambda = 1.0 + 2.0 * std::min(p.shape, 0.0);
  for (const auto& [tau, w] : laguerre_rule()) {
    const double t = tau / lambda;
    accumulate(cuts.size(), cuts.back(), w * std::exp(tau - t) / lambda * s0, t);
  }
  for (std::size_t a = 0; a < dim; ++a)
    for (std::size_t b = 0; b < a; ++b) info[a * dim + b] = info[b * dim + a];
  for (double& v : info) v *= static_cast<double>(n);
  return info;
}

std::vector<double> total_score(const GpdParams& p, const PiecewiseData& d) {
  const std::size_t dim = d.cuts.size() + 2;
  std::vector<double> score(dim, 0.0), s(dim);
  for (std::size_t i = 0; i < d.groups.size(); ++i) {
    for (double v : d.groups[i]) {
      point_score(p, d.cuts, i, v, s);
      for (std::size_t a = 0; a < dim; ++a) score[a] += s[a];
    }
  }
  return score;
}

TestResult edf_test(StatisticKind kind, std::span<const double> y, const NullTable& table,
                    const BootstrapOptions& boot) {
  if (table.kind != kind) throw DomainError("null table kind does not match the requested test");
  TestResult r;
  r.test = kind == StatisticKind::AD ? TestKind::AD : TestKind::CVM;
  r.n = y.size();
  r.fit = fit_mle(y);
  if (!r.fit.converged) throw TestUnavailableError("MLE did not converge");
  const PitSample z = pit_transform(y, r.fit.params);
  r.pit_clamped = z.clamped;
  r.statistic = edf_statistic(kind, z);
  const double xi = r.fit.params.shape;
  if (xi >= table.xi_grid.front() && xi <= table.xi_grid.back()) {
    const PValue pv = pvalue_lookup(r.statistic, xi, table);
    r.p_value = pv.p;
    r.path = pv.path;
  } else {
    const BootstrapPValue bp = bootstrap_pvalue(y, kind, boot.size, boot.seed);
    r.p_value = bp.p;
    r.path = PValuePath::Bootstrap;
    r.p_lower_bound = bp.lower_bound;
  }
  return r;
}

}  // namespace

std::string_view to_string(TestKind t) {
  switch (t) {
    case TestKind::AD: return "ad";
    case TestKind::CVM: return "cvm";
    case TestKind::Moran: return "moran";
    case TestKind::Score: return "score";
  }
  return "?";
}

TestKind test_kind_from_string(std::string_view s) {
  if (s == "ad" || s == "AD") return TestKind::AD;
  if (s == "cvm" || s == "CVM") return TestKind::CVM;
  if (s == "moran" || s == "MORAN") return TestKind::Moran;
  if (s == "score" || s == "SCORE") return TestKind::Score;
  throw DomainError("unknown test '" + std::string(s) + "'");
}

PitSample pit_transform(std::span<const double> y, const GpdParams& params) {
  validate(params);
  PitSample out;
  out.z.reserve(y.size());
  const double upper = gpd_upper_endpoint(params);
  for (double v : y) {
    double z;
    if (v >= upper) {
      z = 1.0 - kPitClamp;
      out.clamped = true;
    } else {
      z = gpd_cdf(v, params);
    }
    if (z < kPitClamp || z > 1.0 - kPitClamp) {
      z = std::clamp(z, kPitClamp, 1.0 - kPitClamp);
      out.clamped = true;
    }
    out.z.push_back(z);
  }
  std::sort(out.z.begin(), out.z.end());
  return out;
}

double ad_statistic(const PitSample& pit) {
  const auto& z = pit.z;
  const std::size_t n = z.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += (2.0 * i + 1.0) * (std::log(z[i]) + std::log1p(-z[n - 1 - i]));
  }
  return -static_cast<double>(n) - sum / static_cast<double>(n);
}

double cvm_statistic(const PitSample& pit) {
  const auto& z = pit.z;
  const double n = static_cast<double>(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double d = z[i] - (2.0 * i + 1.0) / (2.0 * n);
    sum += d * d;
  }
  return sum + 1.0 / (12.0 * n);
}

double edf_statistic(StatisticKind kind, const PitSample& z) {
  return kind == StatisticKind::AD ? ad_statistic(z) : cvm_statistic(z);
}

TestResult ad_test(std::span<const double> y, const NullTable& table, const BootstrapOptions& boot) {
  return edf_test(StatisticKind::AD, y, table, boot);
}

TestResult cvm_test(std::span<const double> y, const NullTable& table, const BootstrapOptions& boot) {
  return edf_test(StatisticKind::CVM, y, table, boot);
}

MoranConstants moran_constants(std::size_t n) {
  const double m = static_cast<double>(n) + 1.0;
  const double nn = static_cast<double>(n);
  MoranConstants c;
  c.mean = m * (std::log(m) + std::numbers::egamma) - 0.5 - 1.0 / (12.0 * m);
  c.variance = m * (std::numbers::pi * std::numbers::pi / 6.0 - 1.0) - 0.5 - 1.0 / (6.0 * m);
  const double sd = std::sqrt(c.variance);
  c.c1 = c.mean - std::sqrt(nn / 2.0) * sd;
  c.c2 = sd / std::sqrt(2.0 * nn);
  return c;
}

TestResult moran_test(std::span<const double> y) {
  TestResult r;
  r.test = TestKind::Moran;
  r.n = y.size();
  r.fit = fit_mps(y);
  if (!r.fit.converged) throw TestUnavailableError("MPS fit did not converge");
  const MoranConstants c = moran_constants(y.size());
  r.statistic = (r.fit.objective_value + 1.0 - c.c1) / c.c2;
  r.dof = static_cast<int>(y.size());
  r.p_value = chi_square_upper(r.statistic, static_cast<double>(y.size()));
  r.path = PValuePath::ChiSquare;
  return r;
}

double piecewise_loglik(std::span<const double> params, std::span<const double> cuts,
                        std::span<const double> y) {
  if (params.size() != cuts.size() + 2) throw DomainError("piecewise model needs k+2 parameters");
  return piecewise_loglik_grouped(params, group_by_interval(cuts, y));
}

std::vector<double> piecewise_score(const GpdParams& restricted, std::span<const double> cuts,
                                    std::span<const double> y) {
  return total_score(restricted, group_by_interval(cuts, y));
}

std::vector<double> piecewise_information(const GpdParams& restricted, std::span<const double> cuts,
                                          std::size_t n) {
  if (cuts.empty()) throw DomainError("piecewise model needs at least one cut");
  return expected_information(restricted, cuts, n);
}

double score_statistic(std::span<const double> score, std::span<const double> information) {
  const auto dim = static_cast<Eigen::Index>(score.size());
  if (information.size() != score.size() * score.size()) throw DomainError("information matrix size mismatch");
  Eigen::MatrixXd info(dim, dim);
  Eigen::VectorXd u(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    u(i) = score[i];
    for (Eigen::Index j = 0; j < dim; ++j) info(i, j) = information[i * dim + j];
  }
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) throw TestUnavailableError("information matrix is not positive definite");
  const double s = u.dot(llt.solve(u));
  if (!std::isfinite(s)) throw TestUnavailableError("score statistic is not finite");
  return std::max(s, 0.0);
}

TestResult score_test(std::span<const double> y, int k) {
  if (k <= 0) throw DomainError("score test needs at least one internal threshold");
  TestResult r;
  r.test = TestKind::Score;
  r.n = y.size();
  r.dof = k;
  r.path = PValuePath::ChiSquare;

  std::vector<double> sorted(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.size() < (static_cast<std::size_t>(k) + 1) * kMinPerInterval) {
    throw TestUnavailableError("too few exceedances for " + std::to_string(k) + " internal thresholds");
  }
  std::vector<double> cuts;
  for (int j = 1; j <= k; ++j) cuts.push_back(quantile_type7(sorted, static_cast<double>(j) / (k + 1)));
  const PiecewiseData data = group_by_interval(cuts, sorted);
  for (const auto& g : data.groups) {
    if (g.size() < kMinPerInterval) throw TestUnavailableError("a piecewise interval holds fewer than 5 points");
  }

  r.fit = fit_mle(sorted);
  if (!r.fit.converged) throw TestUnavailableError("restricted MLE did not converge");
  if (r.fit.params.shape <= -0.5) throw TestUnavailableError("Fisher information does not exist for shape <= -0.5");

  const std::vector<double> score = total_score(r.fit.params, data);
  const std::vector<double> info = expected_information(r.fit.params, cuts, sorted.size());
  for (double v : info)
    if (!std::isfinite(v)) throw TestUnavailableError("information matrix is not finite");
  r.statistic = score_statistic(score, info);
  r.p_value = chi_square_upper(r.statistic, k);
  return r;
}

}  // namespace potsel
