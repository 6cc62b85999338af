#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dtqs/error.hpp"
#include "dtqs/pipeline.hpp"
#include "dtqs/selftest.hpp"
#include "dtqs/testkit.hpp"

using namespace dtqs;

namespace {

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config:
      return 2;
    case ErrorCategory::io:
      return 3;
    case ErrorCategory::parse:
    case ErrorCategory::schema:
    case ErrorCategory::validation:
      return 4;
    default:
      return 5;
  }
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("dtqs");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("DTQS_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    if (level != "info") spdlog::warn("DTQS_LOG={} not recognised; using info", level);
    spdlog::set_level(spdlog::level::info);
  }
}

KRange parse_k_range(const std::string& text) {
  const auto dots = text.find("..");
  std::size_t lo = 0, hi = 0;
  try {
    if (dots == std::string::npos) throw std::invalid_argument("no ..");
    std::size_t used = 0;
    lo = std::stoul(text.substr(0, dots), &used);
    if (used != dots) throw std::invalid_argument("lo");
    const auto rest = text.substr(dots + 2);
    hi = std::stoul(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("hi");
  } catch (const std::exception&) {
    throw Error("cli", ErrorCategory::config, fmt::format("--k-range expects A..B, got '{}'", text));
  }
  return {lo, hi};
}

int run_analyze(RunConfig& config, const std::string& k_range) {
  config.analysis.k_range = parse_k_range(k_range);
  const auto summary = run_pipeline(config);
  const auto& r = summary.result;
  std::size_t flagged = 0;
  for (const auto& p : r.points) flagged += p.cls == SignificanceClass::strong_significant || p.cls == SignificanceClass::significant;
  spdlog::info("{} trajectories, {} profiles, {} tested clusters, {} significant or stronger", r.trajectories.size(),
               r.profiles.size(), r.points.size(), flagged);
  spdlog::info("outputs written to {}", config.out.string());
  return 0;
}

int run_synth(testkit::ScenarioSpec spec, const std::string& out, const std::string& shares) {
  if (!shares.empty()) {
    testkit::ShareTargets t;
    if (std::sscanf(shares.c_str(), "%lf/%lf/%lf", &t.point_pct, &t.stop_pct, &t.others_pct) != 3) {
      throw Error("cli", ErrorCategory::config, fmt::format("--shares expects P/S/O, got '{}'", shares));
    }
    spec.shares = t;
  }
  const auto scenario = testkit::generate_scenario(spec);
  const auto files = testkit::write_scenario(scenario, out);
  spdlog::info("{} trajectories, {} fixes, {} injected delay nodes", scenario.truth.trajectories.size(),
               scenario.fixes.size(), scenario.truth.injected.size());
  for (const auto& p : {files.network, files.courses, files.locations, files.ground_truth}) std::cout << p.string() << "\n";
  return 0;
}

int run_selftest(const std::string& reference, std::uint64_t seed) {
  const auto checks = selftest::run_all(reference, seed);
  bool ok = true;
  for (const auto& c : checks) {
    std::cout << fmt::format("{} {} {}\n", c.pass ? "PASS" : "FAIL", c.name, c.detail);
    ok = ok && c.pass;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Bus delay decomposition and point-delay significance"};
  app.require_subcommand(1);

  RunConfig config;
  std::string k_range = "2..40";
  auto* analyze = app.add_subcommand("analyze", "run the full pipeline");
  analyze->add_option("--network", config.network, "road network GeoJSON")->required();
  analyze->add_option("--courses", config.courses, "courses CSV")->required();
  analyze->add_option("--locations", config.locations, "locations CSV")->required();
  analyze->add_option("--out", config.out, "output directory")->required();
  analyze->add_option("--spc", config.analysis.spc_kmh, "operator speed limit, km/h")->capture_default_str();
  analyze->add_option("--snap-threshold", config.analysis.snap_threshold_m, "snap radius, m")->capture_default_str();
  analyze->add_option("--k-range", k_range, "cluster counts A..B")->capture_default_str();
  std::string selector = "bic", correction = "bh", bin_mode = "fixed";
  analyze->add_option("--k-selector", selector, "bic or silhouette")
      ->check(CLI::IsMember({"bic", "silhouette"}))
      ->capture_default_str();
  analyze->add_option("--correction", correction, "bonferroni or bh")
      ->check(CLI::IsMember({"bonferroni", "bh"}))
      ->capture_default_str();
  analyze->add_option("--bins", bin_mode, "fixed or adaptive")
      ->check(CLI::IsMember({"fixed", "adaptive"}))
      ->capture_default_str();
  analyze->add_option("--alpha", config.analysis.tests.alpha, "Bonferroni level")->capture_default_str();
  analyze->add_option("--q", config.analysis.tests.q, "false discovery rate")->capture_default_str();
  analyze->add_option("--seed", config.analysis.seed, "clustering seed")->capture_default_str();
  analyze->add_option("--workers", config.analysis.workers, "threads, 0 = all cores")->capture_default_str();

  testkit::ScenarioSpec spec;
  std::string synth_out, shares;
  auto* synth = app.add_subcommand("synth", "generate a synthetic scenario with ground truth");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", spec.seed)->capture_default_str();
  synth->add_option("--trajectories", spec.trajectories)->capture_default_str();
  synth->add_option("--vehicles", spec.vehicles)->capture_default_str();
  synth->add_option("--trips-per-day", spec.trips_per_day)->capture_default_str();
  synth->add_option("--nodes", spec.node_count, "corridor nodes")->capture_default_str();
  synth->add_option("--delay-fraction", spec.delay_node_fraction)->capture_default_str();
  synth->add_option("--delay-s", spec.delay_s)->capture_default_str();
  synth->add_option("--noise-sd", spec.noise_sd_m, "position noise, m")->capture_default_str();
  synth->add_option("--outliers", spec.outlier_fraction, "fraction of fixes far off the road")->capture_default_str();
  synth->add_flag("--both-directions", spec.both_directions);
  synth->add_option("--shares", shares, "point/stop/others percentages, e.g. 23.5/65/11.5");

  std::string reference = DTQS_REFERENCE_STATS;
  std::uint64_t selftest_seed = 1;
  auto* selftest_cmd = app.add_subcommand("stats-selftest", "check the statistical routines against the oracle suite");
  selftest_cmd->add_option("--reference", reference, "reference values JSON")->capture_default_str();
  selftest_cmd->add_option("--seed", selftest_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (*analyze) {
      config.analysis.k_selector = selector == "bic" ? KSelector::bic : KSelector::silhouette;
      config.analysis.tests.correction = correction == "bh" ? Correction::bh : Correction::bonferroni;
      config.analysis.tests.bins = bin_mode == "fixed" ? BinMode::fixed : BinMode::adaptive;
      return run_analyze(config, k_range);
    }
    if (*synth) return run_synth(spec, synth_out, shares);
    return run_selftest(reference, selftest_seed);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.category());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 5;
  }
}
