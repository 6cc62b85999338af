#include "dtqs/significance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "dtqs/csv.hpp"
#include "dtqs/error.hpp"

namespace dtqs {
namespace {

const std::string kModule = "significance";

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

double normal_sf(double z) { return boost::math::cdf(boost::math::complement(boost::math::normal(), z)); }

// c[0] + c[1] x + c[2] x^2 + ...
double poly(std::initializer_list<double> c, double x) {
  double r = 0.0;
  for (auto it = std::rbegin(c); it != std::rend(c); ++it) r = r * x + *it;
  return r;
}

std::vector<double> differences(std::span<const double> theo, std::span<const double> real) {
  if (theo.size() != real.size()) {
    throw Error(kModule, ErrorCategory::contract,
                fmt::format("paired samples differ in length ({} vs {})", theo.size(), real.size()));
  }
  std::vector<double> d(theo.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(theo[i]) || !std::isfinite(real[i])) throw Error(kModule, ErrorCategory::input, "non-finite sample");
    d[i] = real[i] - theo[i];
  }
  return d;
}

double mean_of(std::span<const double> v) {
  long double s = 0.0L;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : static_cast<double>(s / static_cast<long double>(v.size()));
}

// Midranks of |d|, 1-based.
std::vector<double> abs_ranks(std::span<const double> d) {
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::fabs(d[a]) < std::fabs(d[b]); });
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::fabs(d[order[j + 1]]) == std::fabs(d[order[i]])) ++j;
    const double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = mid;
    i = j + 1;
  }
  return r;
}

}  // namespace

NormalityResult shapiro_wilk(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 3 || n > 5000) throw Error(kModule, ErrorCategory::input, fmt::format("shapiro-wilk needs 3..5000 values, got {}", n));
  std::vector<double> x(sample.begin(), sample.end());
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(kModule, ErrorCategory::input, "non-finite sample");
  }
  std::sort(x.begin(), x.end());
  const double range = x.back() - x.front();
  if (!(range > 0.0)) throw Error(kModule, ErrorCategory::degenerate, "constant sample");
  const double centre = x[n / 2];
  for (double& v : x) v = (v - centre) / range;

  // Coefficients a[1..n/2] for the lower half (sign applied below).
  const std::size_t half = n / 2;
  const double an = static_cast<double>(n);
  std::vector<double> a(half + 1, 0.0);
  if (n == 3) {
    a[1] = std::sqrt(0.5);
  } else {
    double summ2 = 0.0;
    std::vector<double> m(half + 1);
    for (std::size_t i = 1; i <= half; ++i) {
      m[i] = normal_quantile((static_cast<double>(i) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly({0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056}, rsn) - m[1] / ssumm2;
    std::size_t first = 2;
    double fac = 0.0;
    if (n > 5) {
      first = 3;
      const double a2 = -m[2] / ssumm2 + poly({0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633}, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[1] * m[1] - 2.0 * m[2] * m[2]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[2] = a2;
    } else {
      fac = std::sqrt((summ2 - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1));
    }
    a[1] = a1;
    for (std::size_t i = first; i <= half; ++i) a[i] = -m[i] / fac;
  }

  // W as the squared correlation of x with the antisymmetric coefficient
  // vector; 1 - W computed directly.
  std::vector<double> coef(n, 0.0);
  for (std::size_t i = 0; i < half; ++i) {
    coef[i] = -a[i + 1];
    coef[n - 1 - i] = a[i + 1];
  }
  const double ma = mean_of(coef);
  const double mx = mean_of(x);
  double ssa = 0.0, ssx = 0.0, sax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = coef[i] - ma;
    const double dx = x[i] - mx;
    ssa += da * da;
    ssx += dx * dx;
    sax += da * dx;
  }
  const double root = std::sqrt(ssa * ssx);
  const double w1 = (root - sax) * (root + sax) / (ssa * ssx);
  NormalityResult r;
  r.w = 1.0 - w1;

  if (n == 3) {
    const double pi6 = 6.0 / std::acos(-1.0);
    const double stqr = std::acos(-1.0) / 3.0;
    r.p = std::clamp(pi6 * (std::asin(std::sqrt(r.w)) - stqr), 0.0, 1.0);
    return r;
  }
  double y = std::log(w1);
  double mu = 0.0, sigma = 1.0;
  if (n <= 11) {
    const double gamma = poly({-2.273, 0.459}, an);
    if (y >= gamma) {
      r.p = 1e-99;
      return r;
    }
    y = -std::log(gamma - y);
    mu = poly({0.544, -0.39978, 0.025054, -6.714e-4}, an);
    sigma = std::exp(poly({1.3822, -0.77857, 0.062767, -0.0020322}, an));
  } else {
    const double ln = std::log(an);
    mu = poly({-1.5861, -0.31082, -0.083751, 0.0038915}, ln);
    sigma = std::exp(poly({-0.4803, -0.082676, 0.0030302}, ln));
  }
  r.p = std::clamp(normal_sf((y - mu) / sigma), 0.0, 1.0);
  return r;
}

std::string_view to_string(TestKind kind) { return kind == TestKind::t ? "t" : "wilcoxon"; }

TestResult paired_t_test(std::span<const double> theo, std::span<const double> real) {
  const auto d = differences(theo, real);
  const std::size_t n = d.size();
  if (n < 2) throw Error(kModule, ErrorCategory::input, "t test needs at least 2 pairs");
  const double m = mean_of(d);
  double ss = 0.0;
  for (double v : d) ss += (v - m) * (v - m);
  TestResult r;
  r.n = n;
  r.test_used = TestKind::t;
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  // Spread below rounding noise counts as constant.
  const double scale = std::max(1.0, std::fabs(m));
  if (!(sd > 1e-12 * scale)) {
    if (std::fabs(m) <= 1e-12) {
      r.statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.statistic = std::copysign(std::numeric_limits<double>::infinity(), m);
      r.p_value = 0.0;
    }
    return r;
  }
  r.statistic = m / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  r.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.statistic))), 0.0, 1.0);
  return r;
}

double wilcoxon_exact_p(std::span<const double> ranks, double w_plus) {
  // Doubled ranks are integers, so the null distribution is a subset-sum count.
  std::vector<std::size_t> r2(ranks.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    r2[i] = static_cast<std::size_t>(std::llround(2.0 * ranks[i]));
    total += r2[i];
  }
  std::vector<double> count(total + 1, 0.0);
  count[0] = 1.0;
  std::size_t reach = 0;
  for (std::size_t r : r2) {
    for (std::size_t s = reach + 1; s-- > 0;) {
      if (count[s] != 0.0) count[s + r] += count[s];
    }
    reach += r;
  }
  const auto w2 = static_cast<std::size_t>(std::llround(2.0 * w_plus));
  double le = 0.0, ge = 0.0, all = 0.0;
  for (std::size_t s = 0; s <= total; ++s) {
    all += count[s];
    if (s <= w2) le += count[s];
    if (s >= w2) ge += count[s];
  }
  return std::min(1.0, 2.0 * std::min(le, ge) / all);
}

TestResult wilcoxon_signed_rank(std::span<const double> theo, std::span<const double> real) {
  const auto all = differences(theo, real);
  std::vector<double> d;
  for (double v : all) {
    if (v != 0.0) d.push_back(v);
  }
  TestResult r;
  r.test_used = TestKind::wilcoxon;
  r.n = all.size();
  if (d.empty()) {
    r.p_value = 1.0;
    return r;
  }
  const auto ranks = abs_ranks(d);
  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? w_plus : w_minus) += ranks[i];
  r.statistic = std::min(w_plus, w_minus);
  const double n = static_cast<double>(d.size());
  if (d.size() <= kWilcoxonExactMax) {
    r.p_value = wilcoxon_exact_p(ranks, w_plus);
    return r;
  }
  std::vector<double> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  double ties = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
  if (!(var > 0.0)) {
    r.p_value = 1.0;
    return r;
  }
  const double dev = std::max(0.0, std::fabs(w_plus - mean) - 0.5);
  r.p_value = std::clamp(2.0 * normal_sf(dev / std::sqrt(var)), 0.0, 1.0);
  return r;
}

std::vector<double> bonferroni_adjust(std::span<const double> pvals) {
  std::vector<double> out(pvals.size());
  const double m = static_cast<double>(pvals.size());
  for (std::size_t i = 0; i < pvals.size(); ++i) out[i] = std::min(1.0, pvals[i] * m);
  return out;
}

std::vector<double> benjamini_hochberg(std::span<const double> pvals) {
  const std::size_t m = pvals.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pvals[a] < pvals[b]; });
  std::vector<double> out(m);
  double running = 1.0;
  for (std::size_t r = m; r-- > 0;) {
    const double p = pvals[order[r]];
    const double q = std::max(p, p * static_cast<double>(m) / static_cast<double>(r + 1));
    running = std::min(running, q);
    out[order[r]] = running;
  }
  return out;
}

std::string_view to_string(SignificanceClass c) {
  switch (c) {
    case SignificanceClass::strong_significant: return "strong_significant";
    case SignificanceClass::significant: return "significant";
    case SignificanceClass::weak_evidence: return "weak_evidence";
    case SignificanceClass::little_no_evidence: return "little_no_evidence";
  }
  return "unknown";
}

std::string_view color_of(SignificanceClass c) {
  switch (c) {
    case SignificanceClass::strong_significant: return "blue";
    case SignificanceClass::significant: return "green";
    case SignificanceClass::weak_evidence: return "yellow";
    case SignificanceClass::little_no_evidence: return "orange";
  }
  return "gray";
}

SignificanceClass classify_fixed_bins(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(kModule, ErrorCategory::input, fmt::format("p-value {} outside [0, 1]", p));
  if (p < 0.01) return SignificanceClass::strong_significant;
  if (p < 0.05) return SignificanceClass::significant;
  if (p < 0.10) return SignificanceClass::weak_evidence;
  return SignificanceClass::little_no_evidence;
}

std::vector<SignificanceClass> classify_adaptive(const std::vector<bool>& rejected, std::span<const double> pvals) {
  if (rejected.size() != pvals.size()) throw Error(kModule, ErrorCategory::contract, "flags and p-values differ in length");
  std::vector<SignificanceClass> out(pvals.size());
  for (bool side : {true, false}) {
    double lo = 2.0, hi = -1.0;
    for (std::size_t i = 0; i < pvals.size(); ++i) {
      if (rejected[i] != side) continue;
      lo = std::min(lo, pvals[i]);
      hi = std::max(hi, pvals[i]);
    }
    const double mid = lo + (hi - lo) / 2.0;
    for (std::size_t i = 0; i < pvals.size(); ++i) {
      if (rejected[i] != side) continue;
      const bool low = pvals[i] <= mid;
      out[i] = side ? (low ? SignificanceClass::strong_significant : SignificanceClass::significant)
                    : (low ? SignificanceClass::weak_evidence : SignificanceClass::little_no_evidence);
    }
  }
  return out;
}

std::string_view to_string(Correction c) { return c == Correction::bh ? "bh" : "bonferroni"; }
std::string_view to_string(BinMode m) { return m == BinMode::fixed ? "fixed" : "adaptive"; }

void correct_and_classify(std::span<ClusterTest> tests, const TestOptions& options) {
  std::vector<double> raw(tests.size());
  for (std::size_t i = 0; i < tests.size(); ++i) raw[i] = tests[i].result.p_value;
  const auto adj = options.correction == Correction::bh ? benjamini_hochberg(raw) : bonferroni_adjust(raw);
  const double level = options.correction == Correction::bh ? options.q : options.alpha;
  std::vector<bool> flags(tests.size());
  for (std::size_t i = 0; i < tests.size(); ++i) {
    tests[i].p_adjusted = adj[i];
    tests[i].rejected = adj[i] <= level;
    flags[i] = tests[i].rejected;
  }
  if (options.bins == BinMode::fixed) {
    for (auto& t : tests) t.cls = classify_fixed_bins(t.p_adjusted);
    return;
  }
  const auto classes = classify_adaptive(flags, adj);
  for (std::size_t i = 0; i < tests.size(); ++i) tests[i].cls = classes[i];
}

ClusterTests run_cluster_tests(std::span<const ClusterSample> samples, const TestOptions& options) {
  ClusterTests out;
  for (const auto& s : samples) {
    if (!s.testable(options.n_min)) {
      out.skipped.push_back({s.id(), s.real.size(), fmt::format("fewer than {} traversals", options.n_min)});
      continue;
    }
    ClusterTest ct;
    const auto d = differences(s.theo, s.real);
    // n > 5000 or constant differences leave the gate undecided; the t test
    // handles both.
    bool normal = true;
    if (d.size() <= 5000) {
      try {
        ct.normality_p = shapiro_wilk(d).p;
        normal = ct.normality_p >= options.normality_alpha;
      } catch (const Error& e) {
        if (e.category() != ErrorCategory::degenerate) throw;
      }
    }
    ct.result = normal ? paired_t_test(s.theo, s.real) : wilcoxon_signed_rank(s.theo, s.real);
    ct.result.cluster_id = s.id();
    ct.mean_theo_s = mean_of(s.theo);
    ct.mean_real_s = mean_of(s.real);
    out.tests.push_back(std::move(ct));
  }
  correct_and_classify(out.tests, options);
  return out;
}

std::string stats_csv(std::span<const ClusterTest> tests) {
  std::string out = "cluster_id,n,test_used,statistic,p_raw,p_adjusted,class\n";
  for (const auto& t : tests) {
    out += fmt::format("{},{},{},{:.10g},{:.10g},{:.10g},{}\n", csv::escape(t.result.cluster_id), t.result.n,
                       to_string(t.result.test_used), t.result.statistic, t.result.p_value, t.p_adjusted,
                       to_string(t.cls));
  }
  return out;
}

}  // namespace dtqs
