#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace gsaug {

using NodeId = std::int32_t;
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Unordered node pair stored with u < v.
struct NodePair {
  NodeId u = 0;
  NodeId v = 0;

  friend auto operator<=>(const NodePair&, const NodePair&) = default;
};

/// Class id for classification datasets, real vector for regression targets.
using GraphLabel = std::variant<int, std::vector<double>>;

/// Immutable undirected simple graph. Edges are kept sorted as (u < v) pairs and
/// a CSR adjacency with ascending neighbor lists is built at construction.
class Graph {
 public:
  Graph() : Graph(1, {}) {}

  /// Builds a graph from arbitrary pairs. Self-loops are dropped (counted in
  /// `dropped_self_loops` when given), reversed and duplicate pairs collapse.
  /// Throws DataError for endpoints outside [0, n) or n < 1.
  Graph(NodeId n, std::span<const NodePair> pairs, std::size_t* dropped_self_loops = nullptr);
  Graph(NodeId n, std::initializer_list<NodePair> pairs)
      : Graph(n, std::span<const NodePair>(pairs.begin(), pairs.size())) {}

  NodeId num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  std::span<const NodePair> edges() const { return edges_; }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
  }
  int degree(NodeId v) const { return static_cast<int>(offsets_[v + 1] - offsets_[v]); }
  bool has_edge(NodeId u, NodeId v) const;

  const std::optional<FeatureMatrix>& node_features() const { return features_; }
  const std::optional<std::vector<int>>& node_labels() const { return node_labels_; }
  const std::optional<GraphLabel>& graph_label() const { return graph_label_; }

  /// Copy with node data replaced. Throws DataError on a row-count mismatch.
  Graph with_features(std::optional<FeatureMatrix> features) const;
  Graph with_node_labels(std::optional<std::vector<int>> labels) const;
  Graph with_graph_label(std::optional<GraphLabel> label) const;
  /// Same node set and node data, different edge set.
  Graph with_edges(std::span<const NodePair> pairs) const;

  /// Structural equality plus equality of all attached node/graph data.
  bool operator==(const Graph& other) const;

 private:
  NodeId n_ = 1;
  std::vector<NodePair> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> adjacency_;
  std::optional<FeatureMatrix> features_;
  std::optional<std::vector<int>> node_labels_;
  std::optional<GraphLabel> graph_label_;
};

struct ManifestEntry {
  std::string source;
  std::string domain;
};

/// Ordered graph collection with per-graph provenance.
struct GraphCorpus {
  std::vector<Graph> graphs;
  std::vector<ManifestEntry> manifest;
  std::optional<std::vector<int>> cluster_labels;

  std::size_t size() const { return graphs.size(); }
  /// Throws DataError when the manifest or cluster labels are inconsistent.
  void validate(int num_clusters = -1) const;
};

struct EgoSubgraph {
  Graph graph;
  NodeId center = 0;
  int hop_radius = 1;
  /// Global node id for every local node (local 0 is the center).
  std::vector<NodeId> origin_nodes;
  std::size_t source_graph = 0;
};

struct PartitionBlock {
  Graph graph;
  std::vector<NodeId> global_ids;
};

struct Partition {
  NodeId source_nodes = 0;
  std::vector<PartitionBlock> blocks;
  std::vector<NodePair> cut_edges;
};

std::vector<int> degree_vector(const Graph& g);

/// Induced subgraph of all nodes within `hop_radius` BFS hops of `center`.
/// Node order: center first, then BFS order with ascending-index tie-break.
EgoSubgraph extract_ego_subgraph(const Graph& g, NodeId center, int hop_radius,
                                 std::size_t source_graph = 0);

/// Induced subgraph on `nodes` (order defines local ids). Carries node data.
Graph induced_subgraph(const Graph& g, std::span<const NodeId> nodes);

/// Repeated BFS growth from the lowest-index unassigned node, each block capped
/// at `max_block_nodes` nodes.
Partition partition_graph(const Graph& g, NodeId max_block_nodes);

/// Maps augmented block edges back to global ids and restores every cut edge.
/// Node data is taken from `source` when given.
Graph assemble_partitions(const Partition& p, std::span<const Graph> augmented_blocks,
                          const Graph* source = nullptr);

/// New graph where node i of `g` becomes node perm[i]. Throws ConfigError when
/// `perm` is not a bijection on [0, n).
Graph permute_graph(const Graph& g, std::span<const NodeId> perm);

/// All pairs (u < v) of an n-node graph in lexicographic order.
std::vector<NodePair> all_pairs(NodeId n);

/// Number of neighbors shared by u and v.
int common_neighbors(const Graph& g, NodeId u, NodeId v);

/// Disjoint union; node ids of graph k are shifted by the sizes of graphs < k.
/// Node data is dropped.
Graph disjoint_union(std::span<const Graph> graphs, std::vector<NodeId>* offsets = nullptr);

}  // namespace gsaug
