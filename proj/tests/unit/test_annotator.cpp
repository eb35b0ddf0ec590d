#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>

#include "gsaug/annotator.hpp"
#include "gsaug/error.hpp"
#include "helpers.hpp"

namespace gsaug {
namespace {

// Brute-force mean silhouette: O(n^2) distances, singletons contribute 0.
double oracle_silhouette(const PropertyMatrix& x, const std::vector<int>& labels) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::map<int, std::size_t> sizes;
  for (int l : labels) ++sizes[l];
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[labels[i]] == 1) continue;
    std::map<int, double> sum;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      sum[labels[j]] += (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).norm();
    }
    const double a = sum[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [l, s] : sum) {
      if (l != labels[i]) b = std::min(b, s / static_cast<double>(sizes[l]));
    }
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

PropertyMatrix blobs(const std::vector<std::array<double, kNumProperties>>& centers, int per, double spread, Rng& rng,
                     std::vector<int>* truth = nullptr) {
  PropertyMatrix x(static_cast<Eigen::Index>(centers.size()) * per, kNumProperties);
  Eigen::Index r = 0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (int i = 0; i < per; ++i, ++r) {
      for (std::size_t k = 0; k < kNumProperties; ++k) x(r, static_cast<Eigen::Index>(k)) = centers[c][k] + spread * rng.normal();
      if (truth) truth->push_back(static_cast<int>(c));
    }
  }
  return x;
}

TEST(Silhouette, MatchesBruteForce) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    PropertyMatrix x(15, kNumProperties);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
    std::vector<int> labels;
    for (int i = 0; i < 15; ++i) labels.push_back(static_cast<int>(rng.uniform_int(0, 3)));
    EXPECT_NEAR(silhouette_score(x, labels), oracle_silhouette(x, labels), 1e-12);
  }
}

TEST(FitClusters, TwoBlobs) {
  Rng rng(2);
  std::vector<int> truth;
  const auto x = blobs({{0, 0, 0, 0, 0, 0}, {20, 20, 20, 20, 20, 20}}, 20, 0.5, rng, &truth);
  const std::vector<int> ks{2, 3, 4};
  const auto model = fit_clusters(x, ks, 7);
  EXPECT_EQ(model.num_clusters, 2);
  EXPECT_GT(model.silhouette, 0.7);
  EXPECT_NEAR(model.silhouette, oracle_silhouette(x, model.train_labels), 1e-12);
  EXPECT_EQ(model.candidates.size(), 3u);
}

TEST(FitClusters, ThreeBlobsBruteForceChoice) {
  Rng rng(3);
  const auto x = blobs({{0, 0, 0, 0, 0, 0}, {15, 0, 0, 0, 0, 0}, {0, 15, 0, 0, 0, 0}}, 15, 0.5, rng);
  const std::vector<int> ks{2, 3};
  const auto model = fit_clusters(x, ks, 11);
  // Pick K by the oracle silhouette of each candidate's k-means labels.
  const auto k2 = kmeans(x, 2, 11);
  const auto k3 = kmeans(x, 3, 11);
  EXPECT_GT(oracle_silhouette(x, k3.labels), oracle_silhouette(x, k2.labels));
  EXPECT_EQ(model.num_clusters, 3);
}

TEST(FitClusters, ForcedSplit) {
  PropertyMatrix x = PropertyMatrix::Zero(8, kNumProperties);
  x(6, 0) = 5;
  x(7, 0) = -5;
  const std::vector<int> ks{2};
  const auto model = fit_clusters(x, ks, 1);
  EXPECT_EQ(model.num_clusters, 2);
  EXPECT_NE(model.train_labels[6], model.train_labels[7]);
}

TEST(FitClusters, RejectsBadCandidates) {
  PropertyMatrix x = PropertyMatrix::Zero(3, kNumProperties);
  EXPECT_THROW(fit_clusters(x, std::vector<int>{1}, 0), ConfigError);
  EXPECT_THROW(fit_clusters(x, std::vector<int>{3}, 0), ConfigError);
}

TEST(AssignLabel, NearestCentroid) {
  ClusterModel m;
  m.num_clusters = 3;
  m.centroids = PropertyMatrix::Zero(3, kNumProperties);
  m.centroids(1, 0) = 2;
  m.centroids(2, 1) = 4;
  std::array<double, kNumProperties> z{2, 0, 0, 0, 0, 0};
  EXPECT_EQ(assign_label_normalized(m, z).k, 1);
  z = {1, 0, 0, 0, 0, 0};  // equidistant from 0 and 1
  EXPECT_EQ(assign_label_normalized(m, z).k, 0);

  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    for (auto& v : z) v = 3 * rng.normal();
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
      double d = 0;
      for (std::size_t c = 0; c < kNumProperties; ++c) d += std::pow(z[c] - m.centroids(k, static_cast<Eigen::Index>(c)), 2);
      if (d < bd) {
        bd = d;
        best = k;
      }
    }
    EXPECT_EQ(assign_label_normalized(m, z).k, best);
  }
}

TEST(AssignLabel, PermutationInvariantProperty) {
  Rng rng(5);
  std::vector<PropertyVector> vs;
  std::vector<Graph> gs;
  for (int i = 0; i < 30; ++i) {
    gs.push_back(test::random_graph(static_cast<NodeId>(rng.uniform_int(5, 15)), 0.1 + 0.5 * rng.uniform(), rng));
    vs.push_back(compute_properties(gs.back()));
  }
  const auto norm = normalize_properties(vs);
  const auto model = fit_clusters(norm.values, std::vector<int>{2, 3}, 5, norm.stats);
  for (const auto& g : gs) {
    const Graph q = permute_graph(g, test::random_permutation(g.num_nodes(), rng));
    EXPECT_EQ(assign_label(model, compute_properties(g)).k, assign_label(model, compute_properties(q)).k);
  }
}

TEST(ClusterJson, RoundTrip) {
  Rng rng(6);
  const auto x = blobs({{0, 0, 0, 0, 0, 0}, {9, 9, 9, 9, 9, 9}}, 6, 0.3, rng);
  NormalizationStats stats;
  stats.center = {1, 2, 3, 4, 5, 6};
  stats.scale = {0.5, 1, 2, 1, 1, 3};
  const auto model = fit_clusters(x, std::vector<int>{2, 3}, 8, stats);
  const auto back = cluster_model_from_json(cluster_model_to_json(model));
  EXPECT_EQ(back.num_clusters, model.num_clusters);
  EXPECT_EQ(back.centroids, model.centroids);
  EXPECT_EQ(back.normalization.center, stats.center);
  EXPECT_EQ(back.normalization.scale, stats.scale);
  EXPECT_EQ(back.seed, 8u);
  EXPECT_EQ(back.candidates.size(), model.candidates.size());
  EXPECT_THROW(cluster_model_from_json("{\"K\": 2"), DataError);
}

}  // namespace
}  // namespace gsaug
