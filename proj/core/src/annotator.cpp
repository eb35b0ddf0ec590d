#include "gsaug/annotator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "gsaug/error.hpp"
#include "gsaug/rng.hpp"

namespace gsaug {
namespace {

using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

int nearest(const PropertyMatrix& centroids, const Eigen::Ref<const RowVec>& x, double* dist2 = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist2) *dist2 = best_d;
  return best;
}

KMeansResult lloyd(const PropertyMatrix& x, int k, Rng& rng, int max_iter) {
  const Eigen::Index n = x.rows();
  PropertyMatrix centroids(k, x.cols());

  // k-means++ seeding
  centroids.row(0) = x.row(rng.uniform_int(0, n - 1));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (int c = 1; c < k; ++c) {
    double total = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < c; ++j) best = std::min(best, (x.row(i) - centroids.row(j)).squaredNorm());
      d2[i] = best;
      total += best;
    }
    Eigen::Index pick = 0;
    if (total > 0) {
      double r = rng.uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        r -= d2[pick];
        if (r < 0) break;
      }
    } else {
      pick = rng.uniform_int(0, n - 1);
    }
    centroids.row(c) = x.row(pick);
  }

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = nearest(centroids, x.row(i));
      if (c != labels[i]) {
        labels[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
    PropertyMatrix sums = PropertyMatrix::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[i]) += x.row(i);
      ++counts[labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centroids.row(c) = sums.row(c) / counts[c];
        continue;
      }
      // Empty cluster: move it onto the point farthest from its centroid.
      Eigen::Index far = 0;
      double far_d = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = (x.row(i) - centroids.row(labels[i])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centroids.row(c) = x.row(far);
      labels[far] = c;
    }
  }

  KMeansResult out{centroids, labels, 0};
  for (Eigen::Index i = 0; i < n; ++i) {
    double d = 0;
    out.labels[i] = nearest(centroids, x.row(i), &d);
    out.inertia += d;
  }
  return out;
}

}  // namespace

KMeansResult kmeans(const PropertyMatrix& x, int k, std::uint64_t seed, int restarts, int max_iter) {
  if (k < 1 || k > x.rows()) throw ConfigError("k-means needs 1 <= k <= rows");
  Rng rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(restarts, 1); ++r) {
    auto res = lloyd(x, k, rng, max_iter);
    if (res.inertia < best.inertia) best = std::move(res);
  }
  return best;
}

double silhouette_score(const PropertyMatrix& x, std::span<const int> labels) {
  const auto n = static_cast<std::size_t>(x.rows());
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++sizes[l];
  double total = 0;
  std::vector<double> sum(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[labels[i]] <= 1) continue;
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sum[labels[j]] += (x.row(i) - x.row(j)).norm();
    }
    const double a = sum[labels[i]] / (sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c != labels[i] && sizes[c] > 0) b = std::min(b, sum[c] / sizes[c]);
    }
    const double denom = std::max(a, b);
    if (denom > 0 && std::isfinite(b)) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

ClusterModel fit_clusters(const PropertyMatrix& normalized, std::span<const int> candidate_ks,
                          std::uint64_t seed, const NormalizationStats& stats) {
  if (candidate_ks.empty()) throw ConfigError("no candidate cluster counts");
  for (int k : candidate_ks) {
    if (k < 2) throw ConfigError("candidate cluster count " + std::to_string(k) + " < 2");
    if (k >= normalized.rows()) {
      throw ConfigError("candidate cluster count " + std::to_string(k) + " needs more than " +
                        std::to_string(normalized.rows()) + " rows");
    }
  }
  std::vector<int> ks(candidate_ks.begin(), candidate_ks.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  ClusterModel model;
  model.normalization = stats;
  model.seed = seed;
  model.silhouette = -std::numeric_limits<double>::infinity();
  for (int k : ks) {
    auto res = kmeans(normalized, k, seed);
    ClusterCandidate cand{k, silhouette_score(normalized, res.labels), res.inertia,
                          std::numeric_limits<double>::infinity()};
    for (int a = 0; a < k; ++a) {
      for (int b = a + 1; b < k; ++b) {
        cand.min_centroid_distance =
            std::min(cand.min_centroid_distance, (res.centroids.row(a) - res.centroids.row(b)).norm());
      }
    }
    model.candidates.push_back(cand);
    if (cand.silhouette > model.silhouette) {
      model.silhouette = cand.silhouette;
      model.num_clusters = k;
      model.centroids = res.centroids;
      model.train_labels = res.labels;
    }
  }
  return model;
}

ClusterLabel assign_label_normalized(const ClusterModel& model,
                                     std::span<const double, kNumProperties> z) {
  RowVec x(static_cast<Eigen::Index>(kNumProperties));
  for (std::size_t c = 0; c < kNumProperties; ++c) x(static_cast<Eigen::Index>(c)) = z[c];
  return {nearest(model.centroids, x)};
}

ClusterLabel assign_label(const ClusterModel& model, const PropertyVector& v) {
  const auto z = model.normalization.apply(v);
  return assign_label_normalized(model, std::span<const double, kNumProperties>(z));
}

using json = nlohmann::ordered_json;

std::string cluster_model_to_json(const ClusterModel& c) {
  json j;
  j["num_clusters"] = c.num_clusters;
  json rows = json::array();
  for (Eigen::Index r = 0; r < c.centroids.rows(); ++r) {
    rows.push_back(std::vector<double>(c.centroids.row(r).data(), c.centroids.row(r).data() + c.centroids.cols()));
  }
  j["centroids"] = rows;
  j["center"] = c.normalization.center;
  j["scale"] = c.normalization.scale;
  j["silhouette"] = c.silhouette;
  j["seed"] = c.seed;
  json cands = json::array();
  for (const auto& cand : c.candidates) {
    cands.push_back({{"k", cand.k},
                     {"silhouette", cand.silhouette},
                     {"inertia", cand.inertia},
                     {"min_centroid_distance", cand.min_centroid_distance}});
  }
  j["candidates"] = cands;
  return j.dump();
}

ClusterModel cluster_model_from_json(std::string_view text) {
  ClusterModel c;
  try {
    const json j = json::parse(text);
    c.num_clusters = j.at("num_clusters").get<int>();
    const auto rows = j.at("centroids").get<std::vector<std::vector<double>>>();
    c.centroids.resize(static_cast<Eigen::Index>(rows.size()), kNumProperties);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != kNumProperties) throw DataError("centroid row has wrong width");
      for (std::size_t k = 0; k < kNumProperties; ++k) c.centroids(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
    }
    c.normalization.center = j.at("center").get<std::array<double, kNumProperties>>();
    c.normalization.scale = j.at("scale").get<std::array<double, kNumProperties>>();
    c.silhouette = j.at("silhouette").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& cand : j.at("candidates")) {
      c.candidates.push_back({cand.at("k").get<int>(), cand.at("silhouette").get<double>(),
                              cand.at("inertia").get<double>(), cand.at("min_centroid_distance").get<double>()});
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed cluster model: ") + e.what());
  }
  return c;
}

}  // namespace gsaug
