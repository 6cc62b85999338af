#ifndef DTQS_CLUSTERING_HPP
#define DTQS_CLUSTERING_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace dtqs {

/// 1-D k-means result. Centroids are ascending, so cluster j is the j-th
/// interval from the left.
struct ClusterModel {
  std::size_t k = 0;
  std::vector<double> centroids;
  std::vector<std::size_t> assignments;  // per input value
  std::vector<std::size_t> sizes;
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::vector<double> inertia_history;  // per Lloyd iteration of the chosen restart
};

struct KMeansOptions {
  std::size_t restarts = 10;
  double tolerance_m = 1e-6;
  std::size_t max_iterations = 500;
};

/// Lloyd iterations from k-means++ seeding; best restart by inertia.
/// Throws input error when k exceeds the number of distinct values.
ClusterModel kmeans_1d(std::span<const double> values, std::size_t k, std::uint64_t seed,
                       const KMeansOptions& options = {});

std::size_t distinct_count(std::span<const double> values);

enum class KSelector { bic, silhouette };

std::string_view to_string(KSelector selector);

struct KRange {
  std::size_t lo = 2;
  std::size_t hi = 40;
};

/// Spherical-Gaussian log-likelihood at the fitted centroids minus (p/2) ln n
/// with p = 2k free parameters.
double bic_score(std::span<const double> values, const ClusterModel& model);

/// Mean silhouette coefficient; 0 for k = 1.
double silhouette_score(std::span<const double> values, const ClusterModel& model);

struct Selection {
  ClusterModel model;
  std::vector<std::pair<std::size_t, double>> scores;  // (k, score)
};

/// Fits every k in range and keeps the best score; ties go to the smaller k.
Selection select_k(std::span<const double> values, KRange range, KSelector selector, std::uint64_t seed,
                   const KMeansOptions& options = {});

struct ContiguityReport {
  bool pass = true;
  std::vector<std::size_t> offending;  // indices whose cluster reappears out of order
};

ContiguityReport verify_cluster_contiguity(const ClusterModel& model, std::span<const double> values);

}  // namespace dtqs

#endif  // DTQS_CLUSTERING_HPP
