#include "gsaug/graph.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <sstream>

#include "gsaug/error.hpp"

namespace gsaug {

Graph::Graph(NodeId n, std::span<const NodePair> pairs, std::size_t* dropped_self_loops) : n_(n) {
  if (n < 1) throw DataError("graph must have at least one node");
  std::size_t self_loops = 0;
  edges_.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    if (a < 0 || b < 0 || a >= n || b >= n) {
      std::ostringstream msg;
      msg << "edge (" << a << ", " << b << ") out of range for n=" << n;
      throw DataError(msg.str());
    }
    if (a == b) {
      ++self_loops;
      continue;
    }
    edges_.push_back(a < b ? NodePair{a, b} : NodePair{b, a});
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  if (dropped_self_loops) *dropped_self_loops = self_loops;

  offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
  for (const auto& e : edges_) {
    ++offsets_[e.u + 1];
    ++offsets_[e.v + 1];
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  adjacency_.resize(2 * edges_.size());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const auto& e : edges_) {
    adjacency_[cursor[e.u]++] = e.v;
    adjacency_[cursor[e.v]++] = e.u;
  }
  for (NodeId v = 0; v < n; ++v) {
    std::sort(adjacency_.begin() + offsets_[v], adjacency_.begin() + offsets_[v + 1]);
  }
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  if (u == v || u < 0 || v < 0 || u >= n_ || v >= n_) return false;
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

Graph Graph::with_features(std::optional<FeatureMatrix> features) const {
  if (features && features->rows() != n_) {
    throw DataError("feature matrix has " + std::to_string(features->rows()) + " rows, graph has " +
                    std::to_string(n_) + " nodes");
  }
  Graph out = *this;
  out.features_ = std::move(features);
  return out;
}

Graph Graph::with_node_labels(std::optional<std::vector<int>> labels) const {
  if (labels && static_cast<NodeId>(labels->size()) != n_) {
    throw DataError("node label vector length does not match node count");
  }
  Graph out = *this;
  out.node_labels_ = std::move(labels);
  return out;
}

Graph Graph::with_graph_label(std::optional<GraphLabel> label) const {
  Graph out = *this;
  out.graph_label_ = std::move(label);
  return out;
}

Graph Graph::with_edges(std::span<const NodePair> pairs) const {
  Graph out(n_, pairs);
  out.features_ = features_;
  out.node_labels_ = node_labels_;
  out.graph_label_ = graph_label_;
  return out;
}

bool Graph::operator==(const Graph& other) const {
  if (n_ != other.n_ || edges_ != other.edges_) return false;
  if (features_.has_value() != other.features_.has_value()) return false;
  if (features_ && *features_ != *other.features_) return false;
  return node_labels_ == other.node_labels_ && graph_label_ == other.graph_label_;
}

void GraphCorpus::validate(int num_clusters) const {
  if (manifest.size() != graphs.size()) {
    throw DataError("corpus manifest has " + std::to_string(manifest.size()) + " entries for " +
                    std::to_string(graphs.size()) + " graphs");
  }
  if (cluster_labels) {
    if (cluster_labels->size() != graphs.size()) throw DataError("cluster label count mismatch");
    for (int k : *cluster_labels) {
      if (k < 0 || (num_clusters > 0 && k >= num_clusters)) {
        throw DataError("cluster label " + std::to_string(k) + " out of range");
      }
    }
  }
}

std::vector<int> degree_vector(const Graph& g) {
  std::vector<int> deg(static_cast<std::size_t>(g.num_nodes()));
  for (NodeId v = 0; v < g.num_nodes(); ++v) deg[v] = g.degree(v);
  return deg;
}

Graph induced_subgraph(const Graph& g, std::span<const NodeId> nodes) {
  std::vector<NodeId> local(static_cast<std::size_t>(g.num_nodes()), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) local[nodes[i]] = static_cast<NodeId>(i);
  std::vector<NodePair> pairs;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (NodeId w : g.neighbors(nodes[i])) {
      NodeId j = local[w];
      if (j > static_cast<NodeId>(i)) pairs.push_back({static_cast<NodeId>(i), j});
    }
  }
  Graph sub(static_cast<NodeId>(nodes.size()), pairs);
  if (g.node_features()) {
    FeatureMatrix f(nodes.size(), g.node_features()->cols());
    for (std::size_t i = 0; i < nodes.size(); ++i) f.row(i) = g.node_features()->row(nodes[i]);
    sub = sub.with_features(std::move(f));
  }
  if (g.node_labels()) {
    std::vector<int> labels(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) labels[i] = (*g.node_labels())[nodes[i]];
    sub = sub.with_node_labels(std::move(labels));
  }
  return sub;
}

EgoSubgraph extract_ego_subgraph(const Graph& g, NodeId center, int hop_radius,
                                 std::size_t source_graph) {
  if (center < 0 || center >= g.num_nodes()) {
    throw ConfigError("ego center " + std::to_string(center) + " out of range");
  }
  if (hop_radius < 1) throw ConfigError("hop radius must be >= 1");
  std::vector<int> dist(static_cast<std::size_t>(g.num_nodes()), -1);
  std::vector<NodeId> order{center};
  dist[center] = 0;
  for (std::size_t head = 0; head < order.size(); ++head) {
    NodeId v = order[head];
    if (dist[v] == hop_radius) continue;
    for (NodeId w : g.neighbors(v)) {
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        order.push_back(w);
      }
    }
  }
  EgoSubgraph ego{induced_subgraph(g, order), 0, hop_radius, order, source_graph};
  return ego;
}

Partition partition_graph(const Graph& g, NodeId max_block_nodes) {
  if (max_block_nodes < 1) throw ConfigError("max_block_nodes must be >= 1");
  const NodeId n = g.num_nodes();
  std::vector<int> block_of(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<NodeId>> members;
  NodeId next_seed = 0;
  while (true) {
    while (next_seed < n && block_of[next_seed] >= 0) ++next_seed;
    if (next_seed == n) break;
    const int b = static_cast<int>(members.size());
    members.emplace_back();
    auto& block = members.back();
    std::deque<NodeId> queue{next_seed};
    block_of[next_seed] = b;
    while (!queue.empty() && static_cast<NodeId>(block.size()) < max_block_nodes) {
      NodeId v = queue.front();
      queue.pop_front();
      block.push_back(v);
      for (NodeId w : g.neighbors(v)) {
        if (block_of[w] < 0 && static_cast<NodeId>(block.size() + queue.size()) < max_block_nodes) {
          block_of[w] = b;
          queue.push_back(w);
        }
      }
    }
    // Nodes still queued were claimed but never expanded; they belong to the block.
    for (NodeId v : queue) block.push_back(v);
  }

  Partition p;
  p.source_nodes = n;
  for (auto& block : members) {
    std::sort(block.begin(), block.end());
    p.blocks.push_back({induced_subgraph(g, block), block});
  }
  for (const auto& e : g.edges()) {
    if (block_of[e.u] != block_of[e.v]) p.cut_edges.push_back(e);
  }
  return p;
}

Graph assemble_partitions(const Partition& p, std::span<const Graph> augmented_blocks,
                          const Graph* source) {
  if (augmented_blocks.size() != p.blocks.size()) {
    throw DataError("expected " + std::to_string(p.blocks.size()) + " augmented blocks, got " +
                    std::to_string(augmented_blocks.size()));
  }
  std::vector<NodePair> pairs(p.cut_edges.begin(), p.cut_edges.end());
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    const auto& ids = p.blocks[b].global_ids;
    const Graph& aug = augmented_blocks[b];
    if (aug.num_nodes() != static_cast<NodeId>(ids.size())) {
      throw DataError("augmented block " + std::to_string(b) + " has " +
                      std::to_string(aug.num_nodes()) + " nodes, expected " +
                      std::to_string(ids.size()));
    }
    for (const auto& e : aug.edges()) pairs.push_back({ids[e.u], ids[e.v]});
  }
  if (source) return source->with_edges(pairs);
  return Graph(p.source_nodes, pairs);
}

Graph permute_graph(const Graph& g, std::span<const NodeId> perm) {
  const NodeId n = g.num_nodes();
  if (static_cast<NodeId>(perm.size()) != n) throw ConfigError("permutation length mismatch");
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (NodeId p : perm) {
    if (p < 0 || p >= n || seen[p]) throw ConfigError("permutation is not a bijection");
    seen[p] = true;
  }
  std::vector<NodePair> pairs;
  pairs.reserve(g.num_edges());
  for (const auto& e : g.edges()) pairs.push_back({perm[e.u], perm[e.v]});
  Graph out(n, pairs);
  if (g.node_features()) {
    FeatureMatrix f(n, g.node_features()->cols());
    for (NodeId v = 0; v < n; ++v) f.row(perm[v]) = g.node_features()->row(v);
    out = out.with_features(std::move(f));
  }
  if (g.node_labels()) {
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (NodeId v = 0; v < n; ++v) labels[perm[v]] = (*g.node_labels())[v];
    out = out.with_node_labels(std::move(labels));
  }
  return out.with_graph_label(g.graph_label());
}

std::vector<NodePair> all_pairs(NodeId n) {
  std::vector<NodePair> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) pairs.push_back({u, v});
  }
  return pairs;
}

int common_neighbors(const Graph& g, NodeId u, NodeId v) {
  auto a = g.neighbors(u);
  auto b = g.neighbors(v);
  int count = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

Graph disjoint_union(std::span<const Graph> graphs, std::vector<NodeId>* offsets) {
  std::vector<NodePair> pairs;
  NodeId total = 0;
  if (offsets) offsets->clear();
  for (const auto& g : graphs) {
    if (offsets) offsets->push_back(total);
    for (const auto& e : g.edges()) pairs.push_back({e.u + total, e.v + total});
    total += g.num_nodes();
  }
  if (offsets) offsets->push_back(total);
  return Graph(std::max<NodeId>(total, 1), pairs);
}

}  // namespace gsaug
