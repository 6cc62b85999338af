#include "dtqs/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "dtqs/error.hpp"
#include "dtqs/io.hpp"
#include "dtqs/significance.hpp"

namespace dtqs::selftest {
namespace {

double rel_diff(double a, double b) { return std::fabs(a - b) / std::max(1.0, std::fabs(b)); }

struct Worst {
  double err = 0.0;
  std::size_t at = 0;
  void see(double e, std::size_t i) {
    if (!(e <= err)) {
      err = e;
      at = i;
    }
  }
};

Check verdict(std::string name, const Worst& w, double tol, std::size_t count) {
  return {std::move(name), w.err <= tol, fmt::format("{} cases, max error {:.3g} (case {})", count, w.err, w.at)};
}

}  // namespace

std::vector<Check> check_reference(const std::filesystem::path& reference_json, double tolerance) {
  const auto doc = nlohmann::json::parse(read_text_file(reference_json, "selftest"));
  Worst t_stat, t_p, sw_w, sw_p, wx;
  const auto& paired = doc.at("paired");
  for (std::size_t i = 0; i < paired.size(); ++i) {
    const auto theo = paired[i].at("theo").get<std::vector<double>>();
    const auto real = paired[i].at("real").get<std::vector<double>>();
    const auto t = paired_t_test(theo, real);
    t_stat.see(rel_diff(t.statistic, paired[i].at("t").get<double>()), i);
    t_p.see(std::fabs(t.p_value - paired[i].at("t_p").get<double>()), i);
    std::vector<double> d(theo.size());
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = real[j] - theo[j];
    const auto sw = shapiro_wilk(d);
    sw_w.see(std::fabs(sw.w - paired[i].at("sw_w").get<double>()), i);
    sw_p.see(std::fabs(sw.p - paired[i].at("sw_p").get<double>()), i);
  }
  const auto& wil = doc.at("wilcoxon");
  for (std::size_t i = 0; i < wil.size(); ++i) {
    const auto d = wil[i].at("diff").get<std::vector<double>>();
    const std::vector<double> zero(d.size(), 0.0);
    const auto r = wilcoxon_signed_rank(zero, d);
    wx.see(std::max(std::fabs(r.p_value - wil[i].at("p").get<double>()),
                    std::fabs(r.statistic - wil[i].at("statistic").get<double>())),
           i);
  }
  return {verdict("paired t statistic", t_stat, tolerance, paired.size()),
          verdict("paired t p-value", t_p, tolerance, paired.size()),
          verdict("shapiro-wilk W", sw_w, tolerance, paired.size()),
          verdict("shapiro-wilk p-value", sw_p, tolerance, paired.size()),
          verdict("wilcoxon reference", wx, 2e-3, wil.size())};
}

Check check_wilcoxon_enumeration(std::uint64_t seed, int trials) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> mag(1, 6);
  std::bernoulli_distribution neg(0.4);
  std::size_t cases = 0, bad = 0;
  double worst = 0.0;
  for (std::size_t n = 1; n <= kWilcoxonExactMax; ++n) {
    for (int trial = 0; trial < trials; ++trial) {
      // Small integer magnitudes so ties are common.
      std::vector<double> d(n);
      for (double& v : d) v = (neg(rng) ? -1.0 : 1.0) * mag(rng);
      const std::vector<double> zero(n, 0.0);
      const auto r = wilcoxon_signed_rank(zero, d);
      std::vector<double> a(n);
      for (std::size_t i = 0; i < n; ++i) a[i] = std::fabs(d[i]);
      std::vector<double> ranks(n);
      for (std::size_t i = 0; i < n; ++i) {
        double below = 0.0, equal = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          below += a[j] < a[i];
          equal += a[j] == a[i];
        }
        ranks[i] = below + (equal + 1.0) / 2.0;
      }
      double w = 0.0;
      for (std::size_t i = 0; i < n; ++i) w += d[i] > 0 ? ranks[i] : 0.0;
      double le = 0.0, ge = 0.0;
      for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (mask >> i & 1U) s += ranks[i];
        }
        le += s <= w + 1e-9;
        ge += s >= w - 1e-9;
      }
      const double p = std::min(1.0, 2.0 * std::min(le, ge) / std::ldexp(1.0, static_cast<int>(n)));
      const double err = std::fabs(p - r.p_value);
      worst = std::max(worst, err);
      bad += err > 1e-12;
      ++cases;
    }
  }
  return {"wilcoxon exact vs enumeration", bad == 0, fmt::format("{} cases, {} mismatches, max error {:.3g}", cases, bad, worst)};
}

Check check_bh_definition(std::uint64_t seed, int vectors) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(1, 20);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution tiny(0.3), dup(0.15);
  std::size_t bad = 0;
  for (int v = 0; v < vectors; ++v) {
    std::vector<double> p(static_cast<std::size_t>(len(rng)));
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = tiny(rng) ? u(rng) * 0.01 : u(rng);
      if (i > 0 && dup(rng)) p[i] = p[i - 1];
    }
    const auto got = benjamini_hochberg(p);
    const std::size_t m = p.size();
    std::vector<double> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < m; ++i) {
      // Rank of p[i] among the sorted values; ties share the largest rank's
      // bound through the min below.
      const auto first = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), p[i]) - sorted.begin());
      double q = 1.0;
      for (std::size_t j = first; j < m; ++j) {
        q = std::min(q, std::max(sorted[j], sorted[j] * static_cast<double>(m) / static_cast<double>(j + 1)));
      }
      bad += got[i] != q;
    }
  }
  return {"benjamini-hochberg vs definition", bad == 0, fmt::format("{} vectors, {} mismatched entries", vectors, bad)};
}

std::vector<Check> run_all(const std::filesystem::path& reference_json, std::uint64_t seed) {
  auto checks = check_reference(reference_json);
  checks.push_back(check_wilcoxon_enumeration(seed));
  checks.push_back(check_bh_definition(seed));
  return checks;
}

}  // namespace dtqs::selftest
