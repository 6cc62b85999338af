#ifndef DTQS_SELFTEST_HPP
#define DTQS_SELFTEST_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dtqs::selftest {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

inline constexpr double kReferenceTolerance = 1e-6;

/// Paired t and Shapiro-Wilk against the stored reference values, plus the
/// Wilcoxon cases that carry a reference p.
std::vector<Check> check_reference(const std::filesystem::path& reference_json,
                                   double tolerance = kReferenceTolerance);

/// Exact Wilcoxon p against brute-force enumeration of all 2^n sign
/// assignments, for every n in 1..12 and `trials` samples each.
Check check_wilcoxon_enumeration(std::uint64_t seed, int trials = 20);

/// BH against the min-over-larger-ranks definition on random vectors of
/// length 1..20; requires exact equality.
Check check_bh_definition(std::uint64_t seed, int vectors = 500);

std::vector<Check> run_all(const std::filesystem::path& reference_json, std::uint64_t seed);

}  // namespace dtqs::selftest

#endif  // DTQS_SELFTEST_HPP
