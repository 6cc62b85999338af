#include "dtqs/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <limits>
#include <random>
#include <string>

#include <fmt/format.h>

#include "dtqs/error.hpp"

namespace dtqs {
namespace {

const std::string kModule = "clustering";

// Values sorted and centred on their mean, with prefix sums for O(1) range
// moments.
class SortedData {
 public:
  explicit SortedData(std::span<const double> values) {
    const std::size_t n = values.size();
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    long double total = 0.0L;
    for (double v : values) total += v;
    shift_ = static_cast<double>(total / static_cast<long double>(n));
    x_.resize(n);
    s1_.assign(n + 1, 0.0L);
    s2_.assign(n + 1, 0.0L);
    for (std::size_t i = 0; i < n; ++i) {
      x_[i] = values[order_[i]] - shift_;
      s1_[i + 1] = s1_[i] + x_[i];
      s2_[i + 1] = s2_[i] + static_cast<long double>(x_[i]) * x_[i];
    }
  }

  std::size_t size() const { return x_.size(); }
  double x(std::size_t i) const { return x_[i]; }
  double shift() const { return shift_; }
  std::size_t original(std::size_t i) const { return order_[i]; }
  long double sum(std::size_t l, std::size_t r) const { return s1_[r] - s1_[l]; }

  // Sum of squared distances of x[l..r) to c.
  long double spread(std::size_t l, std::size_t r, long double c) const {
    const long double v = (s2_[r] - s2_[l]) - 2.0L * c * (s1_[r] - s1_[l]) + c * c * static_cast<long double>(r - l);
    return std::max(0.0L, v);
  }

  long double inertia_at_mean(std::size_t l, std::size_t r) const {
    if (r <= l) return 0.0L;
    const long double s = s1_[r] - s1_[l];
    return std::max(0.0L, (s2_[r] - s2_[l]) - s * s / static_cast<long double>(r - l));
  }

  // bounds[j] .. bounds[j+1] is the range nearest to sorted centroid j; a value
  // on a midpoint goes to the left cluster.
  std::vector<std::size_t> bounds(const std::vector<double>& c) const {
    std::vector<std::size_t> b(c.size() + 1, 0);
    b.back() = x_.size();
    for (std::size_t j = 1; j < c.size(); ++j) {
      const double mid = c[j - 1] + (c[j] - c[j - 1]) / 2.0;
      b[j] = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), mid) - x_.begin());
      b[j] = std::max(b[j], b[j - 1]);
    }
    return b;
  }

 private:
  std::vector<std::size_t> order_;
  std::vector<double> x_;
  std::vector<long double> s1_, s2_;
  double shift_ = 0.0;
};

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Farthest point from its nearest centroid; lowest sorted index on ties.
std::size_t farthest_point(const SortedData& data, const std::vector<double>& c) {
  const auto b = data.bounds(c);
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    for (std::size_t i : {b[j], b[j + 1] == 0 ? 0 : b[j + 1] - 1}) {
      if (b[j] >= b[j + 1]) continue;
      const double d = std::fabs(data.x(i) - c[j]);
      if (d > best_d || (d == best_d && i < best)) {
        best_d = d;
        best = i;
      }
    }
  }
  return best;
}

std::vector<double> plus_plus_seed(const SortedData& data, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = data.size();
  std::vector<double> c{data.x(std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * n)))};
  while (c.size() < k) {
    const auto b = data.bounds(c);
    std::vector<long double> w(c.size());
    long double total = 0.0L;
    for (std::size_t j = 0; j < c.size(); ++j) {
      w[j] = data.spread(b[j], b[j + 1], c[j]);
      total += w[j];
    }
    std::size_t pick = n;
    if (total > 0.0L) {
      long double u = static_cast<long double>(uniform01(rng)) * total;
      std::size_t j = 0;
      while (j + 1 < c.size() && u >= w[j]) {
        u -= w[j];
        ++j;
      }
      // Smallest t with spread(b[j], t + 1) > u.
      std::size_t lo = b[j], hi = b[j + 1];
      while (lo + 1 < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (data.spread(b[j], mid, c[j]) > u) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      pick = lo;
      if (pick >= n || std::find(c.begin(), c.end(), data.x(pick)) != c.end()) pick = n;
    }
    if (pick == n) pick = farthest_point(data, c);
    c.push_back(data.x(pick));
    std::sort(c.begin(), c.end());
  }
  return c;
}

struct Fit {
  std::vector<double> centroids;  // centred
  long double inertia = 0.0L;
  std::size_t iterations = 0;
  std::vector<double> history;
};

Fit lloyd(const SortedData& data, std::vector<double> c, const KMeansOptions& options) {
  Fit fit;
  const std::size_t k = c.size();
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    auto b = data.bounds(c);
    // Reseed empty clusters with the farthest point, one at a time.
    for (std::size_t guard = 0; guard < 2 * k; ++guard) {
      std::size_t empty = k;
      for (std::size_t j = 0; j < k; ++j) {
        if (b[j] == b[j + 1]) {
          empty = j;
          break;
        }
      }
      if (empty == k) break;
      c[empty] = data.x(farthest_point(data, c));
      std::sort(c.begin(), c.end());
      b = data.bounds(c);
    }
    double shift = 0.0;
    long double inertia = 0.0L;
    std::vector<double> next(k);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t cnt = b[j + 1] - b[j];
      next[j] = cnt ? static_cast<double>(data.sum(b[j], b[j + 1]) / static_cast<long double>(cnt)) : c[j];
      shift = std::max(shift, std::fabs(next[j] - c[j]));
      inertia += data.inertia_at_mean(b[j], b[j + 1]);
    }
    c = std::move(next);
    std::sort(c.begin(), c.end());
    fit.history.push_back(static_cast<double>(inertia));
    fit.inertia = inertia;
    fit.iterations = iter + 1;
    if (shift < options.tolerance_m) break;
  }
  fit.centroids = std::move(c);
  // Inertia of the final assignment at its own means.
  const auto b = data.bounds(fit.centroids);
  long double inertia = 0.0L;
  for (std::size_t j = 0; j < k; ++j) inertia += data.inertia_at_mean(b[j], b[j + 1]);
  fit.inertia = inertia;
  return fit;
}

ClusterModel to_model(const SortedData& data, const Fit& fit) {
  ClusterModel m;
  m.k = fit.centroids.size();
  const auto b = data.bounds(fit.centroids);
  m.assignments.assign(data.size(), 0);
  m.sizes.assign(m.k, 0);
  m.centroids.resize(m.k);
  for (std::size_t j = 0; j < m.k; ++j) {
    const std::size_t cnt = b[j + 1] - b[j];
    m.sizes[j] = cnt;
    const double centred = cnt ? static_cast<double>(data.sum(b[j], b[j + 1]) / static_cast<long double>(cnt))
                               : fit.centroids[j];
    m.centroids[j] = centred + data.shift();
    for (std::size_t i = b[j]; i < b[j + 1]; ++i) m.assignments[data.original(i)] = j;
  }
  m.inertia = static_cast<double>(fit.inertia);
  m.iterations = fit.iterations;
  m.inertia_history = fit.history;
  return m;
}

void check_values(std::span<const double> values) {
  if (values.empty()) throw Error(kModule, ErrorCategory::input, "no values to cluster");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(kModule, ErrorCategory::input, "non-finite value");
  }
}

ClusterModel fit_sorted(const SortedData& data, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  Fit best;
  bool have = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, options.restarts); ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(k)};
    std::mt19937_64 rng(seq);
    Fit fit = lloyd(data, plus_plus_seed(data, k, rng), options);
    if (!have || fit.inertia < best.inertia) {
      best = std::move(fit);
      have = true;
    }
  }
  return to_model(data, best);
}

}  // namespace

std::size_t distinct_count(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

std::string_view to_string(KSelector selector) { return selector == KSelector::bic ? "bic" : "silhouette"; }

ClusterModel kmeans_1d(std::span<const double> values, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  check_values(values);
  if (k == 0) throw Error(kModule, ErrorCategory::input, "k must be at least 1");
  const std::size_t distinct = distinct_count(values);
  if (k > distinct) {
    throw Error(kModule, ErrorCategory::input, fmt::format("k = {} exceeds {} distinct values", k, distinct));
  }
  SortedData data(values);
  return fit_sorted(data, k, seed, options);
}

double bic_score(std::span<const double> values, const ClusterModel& model) {
  const double n = static_cast<double>(values.size());
  const double k = static_cast<double>(model.k);
  if (model.k == 0 || values.size() != model.assignments.size()) {
    throw Error(kModule, ErrorCategory::contract, "model does not match values");
  }
  const double dof = n - k;
  const double variance = std::max(dof > 0.0 ? model.inertia / dof : 0.0, 1e-9);
  double l = -n * std::log(n) - n / 2.0 * std::log(2.0 * std::numbers::pi) - n / 2.0 * std::log(variance) - dof / 2.0;
  for (std::size_t size : model.sizes) {
    if (size) l += static_cast<double>(size) * std::log(static_cast<double>(size));
  }
  const double p = 2.0 * k;
  return l - p / 2.0 * std::log(n);
}

double silhouette_score(std::span<const double> values, const ClusterModel& model) {
  if (values.size() != model.assignments.size()) throw Error(kModule, ErrorCategory::contract, "model does not match values");
  if (model.k <= 1) return 0.0;
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] != values[b] ? values[a] < values[b] : model.assignments[a] < model.assignments[b];
  });
  std::vector<long double> s(n + 1, 0.0L);
  for (std::size_t i = 0; i < n; ++i) s[i + 1] = s[i] + values[order[i]];
  // Clusters are intervals in sorted order.
  std::vector<std::size_t> lo(model.k, n), hi(model.k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = model.assignments[order[i]];
    lo[c] = std::min(lo[c], i);
    hi[c] = std::max(hi[c], i + 1);
  }
  long double total = 0.0L;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t c = model.assignments[order[t]];
    const std::size_t l = lo[c], r = hi[c];
    if (r - l <= 1) continue;  // singleton scores 0
    const long double x = values[order[t]];
    const long double own = x * static_cast<long double>(t - l) - (s[t] - s[l]) + (s[r] - s[t + 1]) -
                            x * static_cast<long double>(r - t - 1);
    const long double a = own / static_cast<long double>(r - l - 1);
    long double b = std::numeric_limits<long double>::infinity();
    for (long d : {-1L, 1L}) {
      const long nb = static_cast<long>(c) + d;
      if (nb < 0 || nb >= static_cast<long>(model.k) || lo[nb] >= hi[nb]) continue;
      const long double mean = (s[hi[nb]] - s[lo[nb]]) / static_cast<long double>(hi[nb] - lo[nb]);
      b = std::min(b, std::fabs(x - mean));
    }
    if (!std::isfinite(static_cast<double>(b))) continue;
    const long double m = std::max(a, b);
    if (m > 0.0L) total += (b - a) / m;
  }
  return static_cast<double>(total / static_cast<long double>(n));
}

Selection select_k(std::span<const double> values, KRange range, KSelector selector, std::uint64_t seed,
                   const KMeansOptions& options) {
  check_values(values);
  if (range.lo == 0 || range.lo > range.hi) {
    throw Error(kModule, ErrorCategory::input, fmt::format("empty k range {}..{}", range.lo, range.hi));
  }
  const std::size_t distinct = distinct_count(values);
  if (range.hi > distinct) {
    throw Error(kModule, ErrorCategory::input,
                fmt::format("k range {}..{} exceeds {} distinct values", range.lo, range.hi, distinct));
  }
  SortedData data(values);
  Selection sel;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = range.lo; k <= range.hi; ++k) {
    ClusterModel m = fit_sorted(data, k, seed, options);
    const double score = selector == KSelector::bic ? bic_score(values, m) : silhouette_score(values, m);
    sel.scores.emplace_back(k, score);
    if (sel.model.k == 0 || score > best) {
      best = score;
      sel.model = std::move(m);
    }
  }
  return sel;
}

ContiguityReport verify_cluster_contiguity(const ClusterModel& model, std::span<const double> values) {
  ContiguityReport report;
  if (values.size() != model.assignments.size()) {
    report.pass = false;
    return report;
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<std::uint8_t> closed(model.k + 1, 0);
  std::size_t current = model.k;  // none yet
  for (std::size_t idx : order) {
    const std::size_t c = model.assignments[idx];
    if (c != current) {
      if (current < closed.size()) closed[current] = 1;
      current = c;
    }
    if (c >= model.k || closed[c]) report.offending.push_back(idx);
  }
  std::sort(report.offending.begin(), report.offending.end());
  report.pass = report.offending.empty();
  return report;
}

}  // namespace dtqs
