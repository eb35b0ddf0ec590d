#include "gsaug/gnn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>

#include "gsaug/error.hpp"
#include "gsaug/rng.hpp"

namespace gsaug {

ag::Matrix input_features(const Graph& g) {
  if (g.node_features()) return *g.node_features();
  ag::Matrix x(g.num_nodes(), 2);
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    x(v, 0) = 1.0;
    x(v, 1) = std::log1p(static_cast<double>(g.degree(v)));
  }
  return x;
}

ag::Csr normalized_adjacency(const Graph& g) {
  ag::Csr a;
  a.rows = a.cols = g.num_nodes();
  a.offsets.push_back(0);
  std::vector<double> inv_sqrt(static_cast<std::size_t>(g.num_nodes()));
  for (NodeId v = 0; v < g.num_nodes(); ++v) inv_sqrt[v] = 1.0 / std::sqrt(g.degree(v) + 1.0);
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    bool self_done = false;
    for (NodeId u : g.neighbors(v)) {
      if (!self_done && u > v) {
        a.indices.push_back(v);
        a.weights.push_back(inv_sqrt[v] * inv_sqrt[v]);
        self_done = true;
      }
      a.indices.push_back(u);
      a.weights.push_back(inv_sqrt[v] * inv_sqrt[u]);
    }
    if (!self_done) {
      a.indices.push_back(v);
      a.weights.push_back(inv_sqrt[v] * inv_sqrt[v]);
    }
    a.offsets.push_back(a.indices.size());
  }
  return a;
}

ag::Csr gin_adjacency(const Graph& g) {
  ag::Csr a;
  a.rows = a.cols = g.num_nodes();
  a.offsets.push_back(0);
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    a.indices.push_back(v);
    for (NodeId u : g.neighbors(v)) a.indices.push_back(u);
    a.offsets.push_back(a.indices.size());
  }
  return a;
}

Gin::Gin(int in_dim, int hidden, int layers, int out_dim, bool virtual_node, std::uint64_t seed)
    : in_dim_(in_dim), virtual_node_(virtual_node) {
  if (in_dim < 1 || hidden < 1 || layers < 1 || out_dim < 1) throw ConfigError("GIN sizes must be >= 1");
  Rng rng(seed);
  input_ = nn::Linear(store_, "gin.input", in_dim, hidden, rng);
  for (int l = 0; l < layers; ++l) {
    mlps_.emplace_back(store_, "gin.layer" + std::to_string(l), hidden, hidden, hidden, rng);
  }
  if (virtual_node_) {
    vn_init_ = store_.zeros("gin.vn.init", 1, hidden);
    for (int l = 0; l + 1 < layers; ++l) {
      vn_mlps_.emplace_back(store_, "gin.vn" + std::to_string(l), hidden, hidden, hidden, rng);
    }
  }
  output_ = nn::Linear(store_, "gin.output", hidden, out_dim, rng);
}

ag::Var Gin::forward(const Graph& joined, const ag::Matrix& x, std::span<const int> segment, int num_graphs,
                     Rng* dropout, double rate) const {
  if (x.cols() != in_dim_) throw DataError("GIN input has " + std::to_string(x.cols()) + " features, expected " +
                                           std::to_string(in_dim_));
  const auto adj = gin_adjacency(joined);
  auto h = input_(ag::Var::constant(x));
  ag::Var vn;
  if (virtual_node_) {
    const std::vector<int> zeros(static_cast<std::size_t>(num_graphs), 0);
    vn = ag::gather_rows(vn_init_, zeros);
  }
  for (std::size_t l = 0; l < mlps_.size(); ++l) {
    if (virtual_node_) h = h + ag::gather_rows(vn, segment);
    h = ag::relu(mlps_[l](ag::spmm(adj, h)));
    if (dropout && rate > 0) h = ag::dropout(h, rate, *dropout);
    if (virtual_node_ && l + 1 < mlps_.size()) {
      vn = ag::relu(vn_mlps_[l](ag::segment_sum(h, segment, num_graphs) + vn));
    }
  }
  return output_(ag::segment_mean(h, segment, num_graphs));
}

Gcn::Gcn(int in_dim, int hidden, int out_dim, std::uint64_t seed) {
  Rng rng(seed);
  first = nn::Linear(store_, "gcn.0", in_dim, hidden, rng);
  second = nn::Linear(store_, "gcn.1", hidden, out_dim, rng);
}

ag::Var Gcn::forward(const Graph& g, const ag::Matrix& x, Rng* dropout, double rate) const {
  const auto a = normalized_adjacency(g);
  auto h = ag::relu(ag::add_row(ag::spmm(a, ag::matmul(ag::Var::constant(x), first.weight)), first.bias));
  if (dropout && rate > 0) h = ag::dropout(h, rate, *dropout);
  return ag::add_row(ag::spmm(a, ag::matmul(h, second.weight)), second.bias);
}

void DownstreamSpec::validate() const {
  if (model != "gin" && model != "gcn" && model != "gcn_link") {
    throw ConfigError("unknown downstream model '" + model + "' (expected gin, gcn or gcn_link)");
  }
  if (hidden < 1 || layers < 1 || epochs < 0 || batch_size < 1 || patience < 1) {
    throw ConfigError("downstream sizes must be positive");
  }
  if (!(lr > 0)) throw ConfigError("downstream lr must be > 0");
  if (!(dropout >= 0 && dropout < 1)) throw ConfigError("downstream dropout must be in [0, 1)");
}

namespace {

struct Batch {
  Graph joined;
  ag::Matrix x;
  std::vector<int> segment;
  std::vector<NodeId> offsets;
};

Batch make_batch(std::span<const Graph> graphs, std::span<const std::size_t> index) {
  std::vector<Graph> picked;
  picked.reserve(index.size());
  Eigen::Index rows = 0;
  Eigen::Index cols = -1;
  std::vector<ag::Matrix> xs;
  for (std::size_t i : index) {
    picked.push_back(graphs[i]);
    xs.push_back(input_features(graphs[i]));
    if (cols >= 0 && xs.back().cols() != cols) throw DataError("graphs disagree on node feature width");
    cols = xs.back().cols();
    rows += xs.back().rows();
  }
  Batch b;
  b.joined = disjoint_union(picked, &b.offsets);
  b.x.resize(rows, std::max<Eigen::Index>(cols, 0));
  Eigen::Index at = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    b.x.middleRows(at, xs[k].rows()) = xs[k];
    b.segment.insert(b.segment.end(), static_cast<std::size_t>(xs[k].rows()), static_cast<int>(k));
    at += xs[k].rows();
  }
  return b;
}

std::vector<std::size_t> iota_index(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

ag::Matrix softmax_rows(const ag::Matrix& logits) {
  ag::Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - mx).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

ag::Var cross_entropy(const ag::Var& logits, std::span<const int> labels) {
  ag::Matrix w = ag::Matrix::Zero(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= logits.cols()) throw DataError("class label out of range");
    w(static_cast<Eigen::Index>(i), labels[i]) = 1.0 / static_cast<double>(labels.size());
  }
  return ag::scale(ag::sum(ag::hadamard(ag::Var::constant(std::move(w)), ag::log_softmax_rows(logits))), -1.0);
}

int class_of(const Graph& g) {
  if (!g.graph_label()) throw DataError("graph without a label in a labeled split");
  const int* k = std::get_if<int>(&*g.graph_label());
  if (!k) throw DataError("expected a class label, found a regression target");
  return *k;
}

ag::Matrix regression_targets(std::span<const Graph> graphs, std::span<const std::size_t> index, int out_dim) {
  ag::Matrix y(static_cast<Eigen::Index>(index.size()), out_dim);
  for (std::size_t r = 0; r < index.size(); ++r) {
    const auto& g = graphs[index[r]];
    if (!g.graph_label()) throw DataError("graph without a label in a labeled split");
    const auto* v = std::get_if<std::vector<double>>(&*g.graph_label());
    if (!v || static_cast<int>(v->size()) != out_dim) throw DataError("regression target width mismatch");
    for (int c = 0; c < out_dim; ++c) y(static_cast<Eigen::Index>(r), c) = (*v)[static_cast<std::size_t>(c)];
  }
  return y;
}

/// Keeps the parameters with the best validation score and stops after
/// `patience` epochs without improvement.
class EarlyStopper {
 public:
  EarlyStopper(nn::ParameterStore& store, int patience) : store_(store), patience_(patience) {}
  /// Returns false when training should stop.
  bool update(double score) {
    if (!best_ || score > *best_) {
      best_ = score;
      params_ = store_.flatten();
      since_ = 0;
      return true;
    }
    return ++since_ < patience_;
  }
  void restore() {
    if (best_) store_.load(params_);
  }

 private:
  nn::ParameterStore& store_;
  int patience_;
  std::optional<double> best_;
  std::vector<double> params_;
  int since_ = 0;
};

}  // namespace

GraphModel::GraphModel(const DownstreamSpec& spec, int in_dim, int num_classes, int out_dim)
    : spec_(spec),
      num_classes_(num_classes),
      gin_(in_dim, spec.hidden, spec.layers, num_classes > 0 ? num_classes : out_dim, spec.virtual_node, spec.seed) {}

ag::Matrix GraphModel::predict(std::span<const Graph> graphs) const {
  ag::NoGradGuard guard;
  if (graphs.empty()) return ag::Matrix(0, num_classes_);
  const auto idx = iota_index(graphs.size());
  const Batch b = make_batch(graphs, idx);
  const auto out = gin_.forward(b.joined, b.x, b.segment, static_cast<int>(graphs.size())).value();
  return num_classes_ > 0 ? softmax_rows(out) : out;
}

GraphModel train_graph_model(const GraphTaskData& train, std::span<const Graph> val, const DownstreamSpec& spec) {
  spec.validate();
  if (train.graphs.empty()) throw DataError("empty training split");
  const auto in_dim = static_cast<int>(input_features(train.graphs.front()).cols());
  GraphModel model(spec, in_dim, train.num_classes, train.out_dim);
  nn::Adam adam(model.network().params(), {spec.lr});
  EarlyStopper stopper(model.network().params(), spec.patience);
  Rng rng(spec.seed ^ 0x9fb21c651e98df25ULL);
  auto order = iota_index(train.graphs.size());

  std::vector<int> val_labels;
  ag::Matrix val_values;
  if (!val.empty()) {
    if (train.num_classes > 0) {
      for (const auto& g : val) val_labels.push_back(class_of(g));
    } else {
      val_values = regression_targets(val, iota_index(val.size()), train.out_dim);
    }
  }

  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(spec.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(spec.batch_size));
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Batch b = make_batch(train.graphs, idx);
      auto out = model.network().forward(b.joined, b.x, b.segment, static_cast<int>(idx.size()),
                                         &rng, spec.dropout);
      ag::Var loss;
      if (train.num_classes > 0) {
        std::vector<int> labels;
        for (std::size_t i : idx) labels.push_back(class_of(train.graphs[i]));
        loss = cross_entropy(out, labels);
      } else {
        loss = ag::mean(ag::square(out - ag::Var::constant(regression_targets(train.graphs, idx, train.out_dim))));
      }
      if (!std::isfinite(loss.item())) throw NumericalError("non-finite downstream loss in epoch " + std::to_string(epoch));
      ag::backward(loss);
      adam.step();
      model.network().params().zero_grad();
    }
    if (!val.empty()) {
      const auto pred = model.predict(val);
      const double score = train.num_classes > 0 ? accuracy(argmax_rows(pred), val_labels)
                                                 : -mean_absolute_error(pred, val_values);
      if (!stopper.update(score)) break;
    }
  }
  stopper.restore();
  return model;
}

EgoModel::EgoModel(const DownstreamSpec& spec, int in_dim, int num_classes)
    : spec_(spec), gcn_(in_dim, spec.hidden, num_classes, spec.seed) {}

ag::Var EgoModel::logits(std::span<const Graph> egos, Rng* dropout) const {
  const Batch b = make_batch(egos, iota_index(egos.size()));
  std::vector<int> centers(b.offsets.begin(), b.offsets.begin() + static_cast<std::ptrdiff_t>(egos.size()));
  return ag::gather_rows(gcn_.forward(b.joined, b.x, dropout, spec_.dropout), centers);
}

ag::Matrix EgoModel::predict(std::span<const Graph> egos) const {
  ag::NoGradGuard guard;
  return softmax_rows(logits(egos, nullptr).value());
}

namespace {

int center_label(const Graph& ego) {
  if (!ego.node_labels() || ego.node_labels()->empty() || (*ego.node_labels())[0] < 0) {
    throw DataError("ego subgraph without a center label");
  }
  return (*ego.node_labels())[0];
}

}  // namespace

EgoModel train_ego_model(std::span<const Graph> egos, std::span<const Graph> val, int num_classes,
                         const DownstreamSpec& spec) {
  spec.validate();
  if (egos.empty()) throw DataError("empty training split");
  if (num_classes < 2) throw ConfigError("node classification needs >= 2 classes");
  EgoModel model(spec, static_cast<int>(input_features(egos.front()).cols()), num_classes);
  nn::Adam adam(model.network().params(), {spec.lr});
  EarlyStopper stopper(model.network().params(), spec.patience);
  Rng rng(spec.seed ^ 0x94d049bb133111ebULL);
  auto order = iota_index(egos.size());
  std::vector<int> val_labels;
  for (const auto& g : val) val_labels.push_back(center_label(g));
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(spec.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(spec.batch_size));
      std::vector<Graph> batch;
      std::vector<int> labels;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(egos[order[i]]);
        labels.push_back(center_label(batch.back()));
      }
      auto loss = cross_entropy(model.logits(batch, spec.dropout > 0 ? &rng : nullptr), labels);
      ag::backward(loss);
      adam.step();
      model.network().params().zero_grad();
    }
    if (!val.empty() && !stopper.update(accuracy(argmax_rows(model.predict(val)), val_labels))) break;
  }
  stopper.restore();
  return model;
}

LinkModel::LinkModel(const DownstreamSpec& spec, int in_dim) : spec_(spec) {
  Rng rng(spec.seed);
  const int h = spec.hidden;
  enc1_ = nn::Linear(store_, "link.enc0", in_dim, h, rng);
  enc2_ = nn::Linear(store_, "link.enc1", h, h, rng);
  mlp1_ = nn::Linear(store_, "link.mlp0", h, h, rng);
  mlp2_ = nn::Linear(store_, "link.mlp1", h, h, rng);
  mlp3_ = nn::Linear(store_, "link.mlp2", h, 1, rng);
}

ag::Var LinkModel::embed(const Graph& g, Rng* dropout) const {
  const auto a = normalized_adjacency(g);
  auto h = ag::relu(ag::add_row(ag::spmm(a, ag::matmul(ag::Var::constant(input_features(g)), enc1_.weight)), enc1_.bias));
  if (dropout && spec_.dropout > 0) h = ag::dropout(h, spec_.dropout, *dropout);
  return ag::add_row(ag::spmm(a, ag::matmul(h, enc2_.weight)), enc2_.bias);
}

ag::Var LinkModel::score(const ag::Var& h, std::span<const NodePair> pairs) const {
  std::vector<int> us(pairs.size());
  std::vector<int> vs(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    us[i] = pairs[i].u;
    vs[i] = pairs[i].v;
  }
  auto z = ag::hadamard(ag::gather_rows(h, us), ag::gather_rows(h, vs));
  return mlp3_(ag::relu(mlp2_(ag::relu(mlp1_(z)))));
}

std::vector<double> LinkModel::score_pairs(const Graph& g, std::span<const NodePair> pairs) const {
  ag::NoGradGuard guard;
  const auto s = score(embed(g, nullptr), pairs).value();
  return {s.data(), s.data() + s.size()};
}

LinkSplit split_edges(const Graph& g, double val_fraction, double test_fraction, std::size_t num_negatives,
                      std::uint64_t seed) {
  if (val_fraction < 0 || test_fraction < 0 || val_fraction + test_fraction >= 1) {
    throw ConfigError("edge split fractions must be >= 0 and sum below 1");
  }
  std::vector<NodePair> edges(g.edges().begin(), g.edges().end());
  Rng rng(seed);
  std::shuffle(edges.begin(), edges.end(), rng.engine());
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(edges.size())));
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(edges.size())));
  LinkSplit s;
  s.val.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.test.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_val),
                edges.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  std::vector<NodePair> train(edges.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), edges.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  s.train = g.with_edges(train);

  const NodeId n = g.num_nodes();
  const std::size_t available = static_cast<std::size_t>(n) * (n - 1) / 2 - g.num_edges();
  num_negatives = std::min(num_negatives, available);
  std::set<NodePair> pool;
  if (num_negatives * 2 > available) {
    std::vector<NodePair> all;
    for (const auto& p : all_pairs(n)) {
      if (!g.has_edge(p.u, p.v)) all.push_back(p);
    }
    std::shuffle(all.begin(), all.end(), rng.engine());
    pool.insert(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(num_negatives));
  } else {
    while (pool.size() < num_negatives) {
      auto u = static_cast<NodeId>(rng.uniform_int(0, n - 1));
      auto v = static_cast<NodeId>(rng.uniform_int(0, n - 1));
      if (u == v) continue;
      if (u > v) std::swap(u, v);
      if (!g.has_edge(u, v)) pool.insert({u, v});
    }
  }
  s.negatives.assign(pool.begin(), pool.end());
  return s;
}

LinkModel train_link_model(const Graph& structure, std::span<const NodePair> supervision, const LinkSplit& split,
                           const DownstreamSpec& spec, int hits_k) {
  spec.validate();
  if (supervision.empty()) throw DataError("no training edges for link prediction");
  LinkModel model(spec, static_cast<int>(input_features(structure).cols()));
  nn::Adam adam(model.params(), {spec.lr});
  EarlyStopper stopper(model.params(), spec.patience);
  Rng rng(spec.seed ^ 0xd6e8feb86659fd93ULL);
  const NodeId n = structure.num_nodes();
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    std::vector<NodePair> pairs(supervision.begin(), supervision.end());
    ag::Matrix y(static_cast<Eigen::Index>(2 * supervision.size()), 1);
    y.topRows(static_cast<Eigen::Index>(supervision.size())).setOnes();
    y.bottomRows(static_cast<Eigen::Index>(supervision.size())).setZero();
    for (std::size_t i = 0; i < supervision.size(); ++i) {
      auto u = static_cast<NodeId>(rng.uniform_int(0, n - 1));
      auto v = static_cast<NodeId>(rng.uniform_int(0, n - 2));
      if (v >= u) ++v;
      pairs.push_back({std::min(u, v), std::max(u, v)});
    }
    auto h = model.embed(structure, &rng);
    auto p = ag::sigmoid(model.score(h, pairs));
    auto loss = ag::mean(ag::bernoulli_kl(ag::Var::constant(std::move(y)), p));
    ag::backward(loss);
    adam.step();
    model.params().zero_grad();
    if (!split.val.empty()) {
      const auto pos = model.score_pairs(structure, split.val);
      const auto neg = model.score_pairs(structure, split.negatives);
      if (!stopper.update(ranking_metrics(pos, neg, hits_k).mrr)) break;
    }
  }
  stopper.restore();
  return model;
}

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.empty() || predicted.size() != labels.size()) throw DataError("accuracy needs matching non-empty inputs");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hit += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

double mean_absolute_error(const ag::Matrix& predicted, const ag::Matrix& labels) {
  if (predicted.size() == 0 || predicted.rows() != labels.rows() || predicted.cols() != labels.cols()) {
    throw DataError("MAE needs matching non-empty inputs");
  }
  return (predicted - labels).cwiseAbs().mean();
}

RankingMetrics ranking_metrics(std::span<const double> positive_scores, std::span<const double> negative_scores,
                               int k) {
  if (positive_scores.empty()) throw DataError("ranking metrics need at least one positive");
  if (k < 1) throw ConfigError("Hits@K needs K >= 1");
  RankingMetrics m;
  for (double pos : positive_scores) {
    const auto higher = std::count_if(negative_scores.begin(), negative_scores.end(), [&](double s) { return s > pos; });
    const double rank = 1.0 + static_cast<double>(higher);
    m.mrr += 1.0 / rank;
    m.hits += rank <= k ? 1.0 : 0.0;
  }
  m.mrr /= static_cast<double>(positive_scores.size());
  m.hits /= static_cast<double>(positive_scores.size());
  return m;
}

double homophily_group_sd(const Graph& g, std::span<const int> predictions) {
  std::vector<NodeId> all(static_cast<std::size_t>(g.num_nodes()));
  std::iota(all.begin(), all.end(), 0);
  return homophily_group_sd(g, predictions, all);
}

double homophily_group_sd(const Graph& g, std::span<const int> predictions, std::span<const NodeId> nodes) {
  if (!g.node_labels()) throw DataError("homophily grouping needs node labels");
  const auto& labels = *g.node_labels();
  if (predictions.size() != labels.size()) throw DataError("one prediction per node required");
  std::array<double, 5> hits{};
  std::array<double, 5> counts{};
  for (NodeId v : nodes) {
    if (v < 0 || v >= g.num_nodes()) throw DataError("evaluation node " + std::to_string(v) + " out of range");
    if (g.degree(v) == 0) continue;
    int same = 0;
    for (NodeId u : g.neighbors(v)) same += labels[u] == labels[v] ? 1 : 0;
    const double ratio = static_cast<double>(same) / g.degree(v);
    const int bin = std::min(4, static_cast<int>(ratio * 5.0));
    counts[bin] += 1;
    hits[bin] += predictions[v] == labels[v] ? 1 : 0;
  }
  std::vector<double> acc;
  for (int b = 0; b < 5; ++b) {
    if (counts[b] > 0) acc.push_back(hits[b] / counts[b]);
  }
  if (acc.empty()) throw DataError("homophily undefined: every node is isolated");
  const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
  double var = 0;
  for (double a : acc) var += (a - mean) * (a - mean);
  return std::sqrt(var / static_cast<double>(acc.size()));
}

std::vector<int> argmax_rows(const ag::Matrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index arg = 0;
    m.row(r).maxCoeff(&arg);
    out[static_cast<std::size_t>(r)] = static_cast<int>(arg);
  }
  return out;
}

EvalReport summarize(std::string metric, std::vector<double> values, std::string fingerprint) {
  if (values.empty()) throw DataError("no runs to summarize for " + metric);
  EvalReport r;
  r.metric = std::move(metric);
  r.fingerprint = std::move(fingerprint);
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double var = 0;
    for (double v : values) var += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(var / static_cast<double>(values.size() - 1));
  }
  r.values = std::move(values);
  return r;
}

}  // namespace gsaug
