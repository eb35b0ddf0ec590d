#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gsaug/properties.hpp"

namespace gsaug {

/// Self-assigned graph label used to condition the denoiser.
struct ClusterLabel {
  int k = 0;
  friend bool operator==(const ClusterLabel&, const ClusterLabel&) = default;
};

/// Per-candidate diagnostics recorded while fitting.
struct ClusterCandidate {
  int k = 0;
  double silhouette = 0;
  double inertia = 0;
  double min_centroid_distance = 0;
};

struct ClusterModel {
  int num_clusters = 0;
  PropertyMatrix centroids;  // num_clusters x kNumProperties, normalized space
  NormalizationStats normalization;
  double silhouette = 0;
  std::uint64_t seed = 0;
  std::vector<int> train_labels;
  std::vector<ClusterCandidate> candidates;
};

struct KMeansResult {
  PropertyMatrix centroids;
  std::vector<int> labels;
  double inertia = 0;
};

/// Lloyd's algorithm with k-means++ seeding; best of `restarts` by inertia.
KMeansResult kmeans(const PropertyMatrix& x, int k, std::uint64_t seed, int restarts = 10,
                    int max_iter = 300);

/// Mean silhouette coefficient. Singleton clusters contribute 0.
double silhouette_score(const PropertyMatrix& x, std::span<const int> labels);

/// Runs seeded k-means for every candidate K and keeps the one with the highest
/// mean silhouette (ties toward smaller K). Throws ConfigError when a candidate
/// is < 2 or >= the row count.
ClusterModel fit_clusters(const PropertyMatrix& normalized, std::span<const int> candidate_ks,
                          std::uint64_t seed, const NormalizationStats& stats = {});

/// Nearest centroid in normalized space; ties go to the lower index.
ClusterLabel assign_label(const ClusterModel& model, const PropertyVector& v);
ClusterLabel assign_label_normalized(const ClusterModel& model,
                                     std::span<const double, kNumProperties> z);

/// JSON text with K, centroids, normalization, silhouette, seed and the
/// per-candidate fit log. Fit-time train labels are not stored.
std::string cluster_model_to_json(const ClusterModel& model);
/// Throws DataError on malformed input.
ClusterModel cluster_model_from_json(std::string_view text);

}  // namespace gsaug
