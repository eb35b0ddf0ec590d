#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gsaug/graph.hpp"

namespace gsaug {

inline constexpr std::size_t kNumProperties = 6;
/// Exponent value reported when no power-law fit is possible (m = 0).
inline constexpr double kUndefinedExponent = 0.0;

/// Structural summary of one graph, in a fixed column order.
struct PropertyVector {
  double num_nodes = 0;
  double density = 0;
  double network_entropy = 0;
  double avg_degree = 0;
  double degree_variance = 0;
  double scale_free_exponent = kUndefinedExponent;

  std::array<double, kNumProperties> as_array() const {
    return {num_nodes, density, network_entropy, avg_degree, degree_variance, scale_free_exponent};
  }
  static std::array<const char*, kNumProperties> names() {
    return {"num_nodes", "density", "network_entropy", "avg_degree", "degree_variance",
            "scale_free_exponent"};
  }
};

/// Robust per-column center (median) and scale (interquartile range), applied
/// after log1p on num_nodes and density.
struct NormalizationStats {
  std::array<double, kNumProperties> center{};
  std::array<double, kNumProperties> scale{1, 1, 1, 1, 1, 1};

  std::array<double, kNumProperties> apply(const PropertyVector& v) const;
};

using PropertyMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Degree entropy -sum p_i ln p_i with p_i = deg(i) / 2m, and the continuous
/// power-law MLE exponent with d_min = 1 over nodes of degree >= 1.
PropertyVector compute_properties(const Graph& g);

struct NormalizedProperties {
  PropertyMatrix values;
  NormalizationStats stats;
};

/// Throws ConfigError for fewer than two vectors.
NormalizedProperties normalize_properties(std::span<const PropertyVector> vs);

/// Linear-interpolated quantile of unsorted data (q in [0, 1]).
double quantile(std::vector<double> data, double q);

struct RejectedGraph {
  std::size_t index = 0;
  std::string reason;
};

struct FilterResult {
  GraphCorpus corpus;
  std::vector<std::size_t> kept;
  std::vector<RejectedGraph> rejected;
};

/// Keeps graphs whose normalized property vector has max-abs <= z_max and raw
/// density <= density_max.
FilterResult filter_outliers(const GraphCorpus& corpus, double z_max, double density_max);

/// Tab-separated table with a header row naming the six properties.
void write_property_table(std::ostream& out, std::span<const PropertyVector> vs);

}  // namespace gsaug
