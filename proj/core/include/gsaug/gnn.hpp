#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsaug/autograd.hpp"
#include "gsaug/graph.hpp"
#include "gsaug/nn.hpp"

namespace gsaug {

/// Node input features: the attached feature matrix, or [1, log1p(degree)]
/// for featureless graphs.
ag::Matrix input_features(const Graph& g);

/// D^{-1/2} (A + I) D^{-1/2} as a sparse matrix.
ag::Csr normalized_adjacency(const Graph& g);
/// A + (1 + eps) I with eps = 0 (GIN aggregation).
ag::Csr gin_adjacency(const Graph& g);

/// Graph Isomorphism Network: `layers` rounds of h <- MLP(h + sum of
/// neighbors), optional virtual node, mean readout and a linear output layer.
class Gin {
 public:
  Gin(int in_dim, int hidden, int layers, int out_dim, bool virtual_node, std::uint64_t seed);
  /// One output row per graph of the disjoint union described by `segment`.
  ag::Var forward(const Graph& joined, const ag::Matrix& x, std::span<const int> segment, int num_graphs,
                  Rng* dropout = nullptr, double rate = 0.0) const;
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }
  int in_dim() const { return in_dim_; }

 private:
  int in_dim_;
  bool virtual_node_;
  nn::ParameterStore store_;
  nn::Linear input_;
  std::vector<nn::Mlp2> mlps_;
  std::vector<nn::Mlp2> vn_mlps_;
  ag::Var vn_init_;
  nn::Linear output_;
};

/// Two-layer graph convolution: A_hat relu(A_hat X W1) W2.
class Gcn {
 public:
  Gcn(int in_dim, int hidden, int out_dim, std::uint64_t seed);
  ag::Var forward(const Graph& g, const ag::Matrix& x, Rng* dropout = nullptr, double rate = 0.0) const;
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }
  nn::Linear first;
  nn::Linear second;

 private:
  nn::ParameterStore store_;
};

struct DownstreamSpec {
  std::string model = "gin";  // gin | gcn | gcn_link
  int hidden = 64;
  int layers = 5;
  bool virtual_node = false;
  int epochs = 100;
  double lr = 0.01;
  double dropout = 0.0;
  /// Early stopping on the validation metric.
  int patience = 50;
  int batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Graph-level supervision: class ids (num_classes > 0) or regression rows.
struct GraphTaskData {
  std::vector<Graph> graphs;
  int num_classes = 0;
  int out_dim = 1;
};

class GraphModel {
 public:
  GraphModel(const DownstreamSpec& spec, int in_dim, int num_classes, int out_dim);
  /// Class probabilities (classification) or predicted values per graph.
  ag::Matrix predict(std::span<const Graph> graphs) const;
  const Gin& network() const { return gin_; }
  Gin& network() { return gin_; }
  int num_classes() const { return num_classes_; }

 private:
  DownstreamSpec spec_;
  int num_classes_;
  Gin gin_;
};

/// Trains a GIN on labeled graphs with Adam; model selection on `val` when
/// non-empty (accuracy or negative MAE).
GraphModel train_graph_model(const GraphTaskData& train, std::span<const Graph> val, const DownstreamSpec& spec);

/// Ego-subgraph classifier: a two-layer GCN whose center-node (row 0) output
/// is the prediction.
class EgoModel {
 public:
  EgoModel(const DownstreamSpec& spec, int in_dim, int num_classes);
  ag::Matrix predict(std::span<const Graph> egos) const;
  ag::Var logits(std::span<const Graph> egos, Rng* dropout) const;
  Gcn& network() { return gcn_; }

 private:
  DownstreamSpec spec_;
  Gcn gcn_;
};

/// `egos` carry the center label in node_labels()[0].
EgoModel train_ego_model(std::span<const Graph> egos, std::span<const Graph> val, int num_classes,
                         const DownstreamSpec& spec);

/// GCN encoder plus a three-layer MLP scoring h_u * h_v.
class LinkModel {
 public:
  LinkModel(const DownstreamSpec& spec, int in_dim);
  ag::Var embed(const Graph& g, Rng* dropout) const;
  ag::Var score(const ag::Var& h, std::span<const NodePair> pairs) const;
  std::vector<double> score_pairs(const Graph& g, std::span<const NodePair> pairs) const;
  nn::ParameterStore& params() { return store_; }

 private:
  DownstreamSpec spec_;
  nn::ParameterStore store_;
  nn::Linear enc1_, enc2_;
  nn::Linear mlp1_, mlp2_, mlp3_;
};

struct LinkSplit {
  Graph train;  // training edges only, with node features
  std::vector<NodePair> val;
  std::vector<NodePair> test;
  /// Shared pool of non-edges of the full graph for ranking.
  std::vector<NodePair> negatives;
};

/// Seeded split of the edge set (fractions of edges for val and test) and a
/// pool of `num_negatives` non-edges.
LinkSplit split_edges(const Graph& g, double val_fraction, double test_fraction, std::size_t num_negatives,
                      std::uint64_t seed);

/// `structure` is the graph used for message passing (original or augmented
/// training graph); supervision uses `supervision` edges.
LinkModel train_link_model(const Graph& structure, std::span<const NodePair> supervision, const LinkSplit& split,
                           const DownstreamSpec& spec, int hits_k);

// Metrics.
double accuracy(std::span<const int> predicted, std::span<const int> labels);
double mean_absolute_error(const ag::Matrix& predicted, const ag::Matrix& labels);
struct RankingMetrics {
  double mrr = 0;
  double hits = 0;
};
/// Rank of a positive = 1 + number of pool negatives scoring strictly higher.
RankingMetrics ranking_metrics(std::span<const double> positive_scores, std::span<const double> negative_scores,
                               int k);
/// Population SD of per-bin accuracy over 5 equal-width homophily bins.
double homophily_group_sd(const Graph& g, std::span<const int> predictions);
/// Same, with only `nodes` binned (predictions still indexed by node id).
double homophily_group_sd(const Graph& g, std::span<const int> predictions, std::span<const NodeId> nodes);

std::vector<int> argmax_rows(const ag::Matrix& m);

struct EvalReport {
  std::string metric;
  double mean = 0;
  double std = 0;
  std::vector<double> values;
  std::string fingerprint;
  bool single_run() const { return values.size() < 2; }
};

/// Mean and sample standard deviation (0 for a single run).
EvalReport summarize(std::string metric, std::vector<double> values, std::string fingerprint);

}  // namespace gsaug
