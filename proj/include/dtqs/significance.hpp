#ifndef DTQS_SIGNIFICANCE_HPP
#define DTQS_SIGNIFICANCE_HPP

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtqs/trajectory_metrics.hpp"

namespace dtqs {

struct NormalityResult {
  double w = 1.0;
  double p = 1.0;
};

/// Royston's approximation. Requires 3 <= n <= 5000 and a non-constant sample.
NormalityResult shapiro_wilk(std::span<const double> sample);

enum class TestKind { t, wilcoxon };

std::string_view to_string(TestKind kind);

struct TestResult {
  std::string cluster_id;
  std::size_t n = 0;
  double statistic = 0.0;
  double p_value = 1.0;
  TestKind test_used = TestKind::t;
};

/// Two-sided test on real - theo. Constant differences give p = 1 when they
/// are zero and p = 0 otherwise.
TestResult paired_t_test(std::span<const double> theo, std::span<const double> real);

inline constexpr std::size_t kWilcoxonExactMax = 12;

/// Two-sided signed-rank test on real - theo with zero differences dropped.
/// Exact null distribution up to kWilcoxonExactMax nonzero differences
/// (midranks on ties); normal approximation with tie and continuity
/// correction above. The statistic is min(W+, W-).
TestResult wilcoxon_signed_rank(std::span<const double> theo, std::span<const double> real);

/// Exact two-sided p for the sum of positive ranks `w_plus` given the ranks
/// of the nonzero differences.
double wilcoxon_exact_p(std::span<const double> ranks, double w_plus);

std::vector<double> bonferroni_adjust(std::span<const double> pvals);
std::vector<double> benjamini_hochberg(std::span<const double> pvals);

enum class SignificanceClass { strong_significant, significant, weak_evidence, little_no_evidence };

std::string_view to_string(SignificanceClass c);
std::string_view color_of(SignificanceClass c);

/// [0, .01) strong, [.01, .05) significant, [.05, .10) weak, [.10, 1] little.
SignificanceClass classify_fixed_bins(double p);

/// Rejected clusters split at the midpoint of their p range into strong and
/// significant; accepted clusters likewise into weak and little evidence.
/// Values on the midpoint take the stronger class.
std::vector<SignificanceClass> classify_adaptive(const std::vector<bool>& rejected, std::span<const double> pvals);

enum class Correction { bonferroni, bh };
enum class BinMode { fixed, adaptive };

std::string_view to_string(Correction c);
std::string_view to_string(BinMode m);

struct TestOptions {
  double alpha = 0.05;  // rejection level for Bonferroni
  double q = 0.05;      // rejection level for BH
  double normality_alpha = 0.05;
  Correction correction = Correction::bh;
  BinMode bins = BinMode::fixed;
  std::size_t n_min = kMinTraversals;
};

struct ClusterTest {
  TestResult result;
  double normality_p = 1.0;
  double p_adjusted = 1.0;
  bool rejected = false;
  SignificanceClass cls = SignificanceClass::little_no_evidence;
  double mean_theo_s = 0.0;
  double mean_real_s = 0.0;
};

struct SkippedCluster {
  std::string cluster_id;
  std::size_t n = 0;
  std::string reason;
};

struct ClusterTests {
  std::vector<ClusterTest> tests;  // in sample order
  std::vector<SkippedCluster> skipped;
};

/// Shapiro-Wilk gate on the differences picks the t test or Wilcoxon; the
/// correction spans every tested cluster passed in.
ClusterTests run_cluster_tests(std::span<const ClusterSample> samples, const TestOptions& options = {});

/// Corrects and classifies already computed raw p-values in place.
void correct_and_classify(std::span<ClusterTest> tests, const TestOptions& options);

/// cluster_id, n, test_used, statistic, p_raw, p_adjusted, class
std::string stats_csv(std::span<const ClusterTest> tests);

}  // namespace dtqs

#endif  // DTQS_SIGNIFICANCE_HPP
