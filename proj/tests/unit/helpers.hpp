#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "gsaug/diffusion.hpp"
#include "gsaug/graph.hpp"
#include "gsaug/rng.hpp"

namespace gsaug::test {

inline Graph path_graph(NodeId n) {
  std::vector<NodePair> e;
  for (NodeId i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
  return Graph(n, e);
}

inline Graph cycle_graph(NodeId n) {
  std::vector<NodePair> e;
  for (NodeId i = 0; i < n; ++i) e.push_back({i, (i + 1) % n});
  return Graph(n, e);
}

inline Graph star_graph(NodeId n) {
  std::vector<NodePair> e;
  for (NodeId i = 1; i < n; ++i) e.push_back({0, i});
  return Graph(n, e);
}

inline Graph complete_graph(NodeId n) { return Graph(n, all_pairs(n)); }

inline Graph random_graph(NodeId n, double p, Rng& rng) {
  std::vector<NodePair> e;
  for (const auto& pr : all_pairs(n)) {
    if (rng.bernoulli(p)) e.push_back(pr);
  }
  return Graph(n, e);
}

inline std::vector<NodeId> random_permutation(NodeId n, Rng& rng) {
  std::vector<NodeId> perm(static_cast<std::size_t>(n));
  for (NodeId i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  return perm;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("gsaug_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Denoiser stand-in that predicts a fixed clean graph: p_hat = `on` for
/// pairs of `target`, `off` otherwise. Hidden states are one constant column.
class OracleModel final : public DenoisingModel {
 public:
  OracleModel(Graph target, double on = 1.0, double off = 0.0) : target_(std::move(target)), on_(on), off_(off) {}

  ag::Var hidden(const DiffusionState& state, Rng*) const override {
    return ag::Var::constant(ag::Matrix::Ones(state.a_t.num_nodes(), 1));
  }
  ag::Var edge_probs(const ag::Var&, std::span<const NodePair> pairs, const Graph&) const override {
    ag::Matrix p(static_cast<Eigen::Index>(pairs.size()), 1);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      p(static_cast<Eigen::Index>(i), 0) = target_.has_edge(pairs[i].u, pairs[i].v) ? on_ : off_;
    }
    return ag::Var::constant(std::move(p));
  }

 private:
  Graph target_;
  double on_;
  double off_;
};

}  // namespace gsaug::test
