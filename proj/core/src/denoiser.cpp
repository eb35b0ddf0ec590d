#include "gsaug/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "gsaug/error.hpp"
#include "gsaug/io.hpp"

namespace gsaug {

using json = nlohmann::ordered_json;

void DenoiserConfig::validate() const {
  if (d < 1 || layers < 1 || heads < 1) throw ConfigError("denoiser d, layers and heads must be >= 1");
  if (d % heads != 0) {
    throw ConfigError("denoiser d=" + std::to_string(d) + " is not divisible by heads=" + std::to_string(heads));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("denoiser dropout must be in [0, 1)");
  if (max_degree_clip < 1) throw ConfigError("denoiser max_degree_clip must be >= 1");
  if (num_labels < 1) throw ConfigError("denoiser num_labels must be >= 1");
}

Denoiser::Denoiser(const DenoiserConfig& config, int horizon, std::uint64_t seed)
    : config_(config), horizon_(horizon) {
  config_.validate();
  if (horizon < 1) throw ConfigError("denoiser horizon must be >= 1");
  Rng rng(seed);
  const Eigen::Index d = config_.d;
  f_degree_ = nn::Linear(store_, "f_degree", 1, d, rng);
  f_time_ = nn::Linear(store_, "f_time", 1, d, rng);
  f_label_ = store_.normal("f_label", config_.num_labels, d, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l);
    Layer layer;
    layer.ln1_gain = store_.add(p + ".ln1.gain", ag::Matrix::Ones(1, d));
    layer.ln1_bias = store_.zeros(p + ".ln1.bias", 1, d);
    layer.wq = nn::Linear(store_, p + ".wq", d, d, rng);
    layer.wk = nn::Linear(store_, p + ".wk", d, d, rng);
    layer.wv = nn::Linear(store_, p + ".wv", d, d, rng);
    layer.wo = nn::Linear(store_, p + ".wo", d, d, rng);
    layer.ln2_gain = store_.add(p + ".ln2.gain", ag::Matrix::Ones(1, d));
    layer.ln2_bias = store_.zeros(p + ".ln2.bias", 1, d);
    layer.ffn = nn::Mlp2(store_, p + ".ffn", d, 2 * d, d, rng);
    layers_.push_back(std::move(layer));
  }
  out_gain_ = store_.add("out.gain", ag::Matrix::Ones(1, d));
  out_bias_ = store_.zeros("out.bias", 1, d);
  decoder_ = nn::Mlp2(store_, "decoder", 2 * d + 1, d, 1, rng);
}

ag::Var Denoiser::hidden(const DiffusionState& state, Rng* dropout) const {
  const std::vector<int> t(static_cast<std::size_t>(state.a_t.num_nodes()), state.t);
  const std::vector<int> labels(t.size(), state.label.k);
  return hidden_batch(state.a_t, t, labels, dropout);
}

ag::Var Denoiser::hidden_batch(const Graph& graph, std::span<const int> t, std::span<const int> labels,
                               Rng* dropout) const {
  const NodeId n = graph.num_nodes();
  if (t.size() != static_cast<std::size_t>(n) || labels.size() != t.size()) {
    throw ConfigError("hidden_batch: per-node timestep/label count does not match the graph");
  }
  if (!store_.all_finite()) throw NumericalError("denoiser has non-finite parameters");

  ag::Matrix deg(n, 1);
  ag::Matrix time(n, 1);
  const double clip = config_.max_degree_clip;
  for (NodeId v = 0; v < n; ++v) {
    deg(v, 0) = std::min<double>(graph.degree(v), clip) / clip;
    if (t[v] < 0 || t[v] > horizon_) throw ConfigError("timestep " + std::to_string(t[v]) + " out of range");
    time(v, 0) = static_cast<double>(t[v]) / horizon_;
    if (labels[v] < 0 || labels[v] >= config_.num_labels) {
      throw ConfigError("cluster label " + std::to_string(labels[v]) + " outside the model vocabulary of " +
                        std::to_string(config_.num_labels));
    }
  }

  ag::Csr mask;
  mask.rows = mask.cols = n;
  mask.offsets.reserve(static_cast<std::size_t>(n) + 1);
  mask.offsets.push_back(0);
  for (NodeId v = 0; v < n; ++v) {
    bool self_done = false;
    for (NodeId u : graph.neighbors(v)) {
      if (!self_done && u > v) {
        mask.indices.push_back(v);
        self_done = true;
      }
      mask.indices.push_back(u);
    }
    if (!self_done) mask.indices.push_back(v);
    mask.offsets.push_back(mask.indices.size());
  }

  auto x = f_degree_(ag::Var::constant(std::move(deg))) + f_time_(ag::Var::constant(std::move(time))) +
           ag::gather_rows(f_label_, labels);
  const bool train = dropout != nullptr && config_.dropout > 0;
  for (const auto& layer : layers_) {
    auto z = ag::layer_norm(x, layer.ln1_gain, layer.ln1_bias);
    auto att = layer.wo(ag::masked_attention(layer.wq(z), layer.wk(z), layer.wv(z), mask, config_.heads));
    if (train) att = ag::dropout(att, config_.dropout, *dropout);
    x = x + att;
    auto f = layer.ffn(ag::layer_norm(x, layer.ln2_gain, layer.ln2_bias));
    if (train) f = ag::dropout(f, config_.dropout, *dropout);
    x = x + f;
  }
  return ag::layer_norm(x, out_gain_, out_bias_);
}

ag::Var Denoiser::edge_probs(const ag::Var& h, std::span<const NodePair> pairs, const Graph& a_t) const {
  std::vector<int> us(pairs.size());
  std::vector<int> vs(pairs.size());
  ag::Matrix present(static_cast<Eigen::Index>(pairs.size()), 1);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].u < 0 || pairs[i].v >= h.rows() || pairs[i].u >= pairs[i].v) {
      throw ConfigError("pair (" + std::to_string(pairs[i].u) + ", " + std::to_string(pairs[i].v) +
                        ") invalid for a graph of " + std::to_string(h.rows()) + " nodes");
    }
    us[i] = pairs[i].u;
    vs[i] = pairs[i].v;
    present(static_cast<Eigen::Index>(i)) = a_t.has_edge(pairs[i].u, pairs[i].v) ? 1.0 : 0.0;
  }
  return ag::sigmoid(decoder_(ag::concat_cols(nn::pair_features(h, us, vs), ag::Var::constant(present))));
}

NoiseSchedule Checkpoint::schedule() const {
  return build_schedule(horizon, to_string(schedule_kind), pi);
}

Denoiser Checkpoint::model() const {
  Denoiser m(config, horizon, meta.seed);
  m.params().load(params);
  return m;
}

std::string Checkpoint::params_hash() const {
  return bytes_hash(std::string_view(reinterpret_cast<const char*>(params.data()), params.size() * sizeof(double)));
}

ClusterLabel Checkpoint::label_for(const Graph& g) const {
  if (!meta.self_cond || !clusters || clusters->num_clusters < 1) return {0};
  const ClusterLabel k = assign_label(*clusters, compute_properties(g));
  return k.k < config.num_labels ? k : ClusterLabel{0};
}

namespace {

json cluster_to_json(const ClusterModel& c) { return json::parse(cluster_model_to_json(c)); }

ClusterModel cluster_from_json(const json& j) { return cluster_model_from_json(j.dump()); }

Checkpoint checkpoint_from_container(const Container& c) {
  Checkpoint ck;
  try {
    const json j = json::parse(c.manifest);
    const auto& cfg = j.at("config");
    ck.config.d = cfg.at("d").get<int>();
    ck.config.layers = cfg.at("layers").get<int>();
    ck.config.heads = cfg.at("heads").get<int>();
    ck.config.dropout = cfg.at("dropout").get<double>();
    ck.config.max_degree_clip = cfg.at("max_degree_clip").get<int>();
    ck.config.num_labels = cfg.at("num_labels").get<int>();
    const auto& s = j.at("schedule");
    ck.horizon = s.at("T").get<int>();
    ck.schedule_kind = parse_schedule_kind(s.at("kind").get<std::string>());
    ck.pi = s.at("pi").get<double>();
    if (j.contains("clusters")) ck.clusters = cluster_from_json(j.at("clusters"));
    const auto& m = j.at("training");
    ck.meta.epochs = m.at("epochs").get<int>();
    ck.meta.corpus_hash = m.at("corpus_hash").get<std::string>();
    ck.meta.seed = m.at("seed").get<std::uint64_t>();
    ck.meta.self_cond = m.at("self_cond").get<bool>();
    ck.meta.hybrid_weight = m.at("hybrid_weight").get<double>();
    for (const auto& r : m.at("history")) {
      ck.meta.history.push_back({r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>(),
                                 r.at(3).get<std::size_t>(), r.at(4).get<std::size_t>()});
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  ck.config.validate();
  return ck;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  json j;
  j["config"] = {{"d", ckpt.config.d},
                 {"layers", ckpt.config.layers},
                 {"heads", ckpt.config.heads},
                 {"dropout", ckpt.config.dropout},
                 {"max_degree_clip", ckpt.config.max_degree_clip},
                 {"num_labels", ckpt.config.num_labels}};
  j["schedule"] = {{"T", ckpt.horizon}, {"kind", std::string(to_string(ckpt.schedule_kind))}, {"pi", ckpt.pi}};
  if (ckpt.clusters) j["clusters"] = cluster_to_json(*ckpt.clusters);
  json history = json::array();
  for (const auto& r : ckpt.meta.history) {
    history.push_back({r.epoch, r.mean_vlb, r.mean_recon_nll, r.kl_examples, r.recon_examples});
  }
  j["training"] = {{"epochs", ckpt.meta.epochs},
                   {"corpus_hash", ckpt.meta.corpus_hash},
                   {"seed", ckpt.meta.seed},
                   {"self_cond", ckpt.meta.self_cond},
                   {"hybrid_weight", ckpt.meta.hybrid_weight},
                   {"history", history}};
  j["params_hash"] = ckpt.params_hash();
  write_container(path, {"checkpoint", kCheckpointVersion, j.dump(), ckpt.params});
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Container c = read_container(path, "checkpoint", kCheckpointVersion, true);
  Checkpoint ck = checkpoint_from_container(c);
  ck.params = c.values;
  const Denoiser shape(ck.config, ck.horizon, 0);
  if (shape.params().num_values() != ck.params.size()) {
    throw DataError(path.string() + ": parameter count " + std::to_string(ck.params.size()) +
                    " does not match the stored config (" + std::to_string(shape.params().num_values()) + ")");
  }
  const json manifest = json::parse(c.manifest);
  if (manifest.contains("params_hash") && manifest.at("params_hash").get<std::string>() != ck.params_hash()) {
    throw DataError(path.string() + ": parameters do not match the recorded hash");
  }
  return ck;
}

Checkpoint read_checkpoint_manifest(const std::filesystem::path& path) {
  return checkpoint_from_container(read_container(path, "checkpoint", kCheckpointVersion, false));
}

std::string corpus_hash(const GraphCorpus& corpus) {
  std::vector<std::int32_t> words;
  for (const auto& g : corpus.graphs) {
    words.push_back(g.num_nodes());
    words.push_back(static_cast<std::int32_t>(g.num_edges()));
    for (const auto& e : g.edges()) {
      words.push_back(e.u);
      words.push_back(e.v);
    }
  }
  return bytes_hash(std::string_view(reinterpret_cast<const char*>(words.data()), words.size() * sizeof(std::int32_t)));
}

Checkpoint pretrain(const GraphCorpus& corpus, const DenoiserConfig& config, const NoiseSchedule& sched,
                    const PretrainOptions& options, const std::optional<ClusterModel>& clusters) {
  Denoiser model(config, sched.horizon(), options.seed);
  return pretrain(corpus, model, sched, options, clusters);
}

Checkpoint pretrain(const GraphCorpus& corpus, Denoiser& model, const NoiseSchedule& sched,
                    const PretrainOptions& options, const std::optional<ClusterModel>& clusters) {
  if (corpus.size() == 0) throw DataError("pre-training corpus is empty");
  if (options.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (options.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(options.lr > 0)) throw ConfigError("learning rate must be > 0");
  if (model.horizon() != sched.horizon()) throw ConfigError("denoiser horizon differs from the schedule");
  corpus.validate();
  const bool use_labels = options.self_cond && corpus.cluster_labels.has_value();
  if (use_labels) {
    for (int k : *corpus.cluster_labels) {
      if (k >= model.config().num_labels) {
        throw ConfigError("cluster label " + std::to_string(k) + " exceeds denoiser num_labels");
      }
    }
  }

  Rng rng(options.seed ^ 0x5bd1e995ULL);
  Rng drop = rng.split();
  nn::Adam adam(model.params(), {options.lr});
  model.params().zero_grad();
  TrainingMeta meta;
  meta.seed = options.seed;
  meta.self_cond = options.self_cond;
  meta.hybrid_weight = options.hybrid_weight;
  meta.corpus_hash = corpus_hash(corpus);

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    LossRecord record;
    record.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
      ++step;
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      const auto batch = static_cast<int>(end - start);
      std::vector<Graph> noisy;
      std::vector<int> node_t;
      std::vector<int> node_label;
      std::vector<int> ts;
      std::vector<NodePair> pairs;
      std::vector<int> segment;
      std::vector<PairCoefficients> coeffs;
      std::vector<double> clean;
      NodeId offset = 0;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t gi = order[b];
        const Graph& g0 = corpus.graphs[gi];
        const int t = static_cast<int>(rng.uniform_int(1, sched.horizon()));
        const int label = use_labels ? (*corpus.cluster_labels)[gi] : 0;
        auto state = forward_marginal_sample(g0, t, sched, rng, {label});
        for (const auto& p : training_pairs(g0, options.candidates, rng)) {
          const int a0 = g0.has_edge(p.u, p.v) ? 1 : 0;
          coeffs.push_back(vlb_coefficients(a0, state.a_t.has_edge(p.u, p.v) ? 1 : 0, t, sched));
          clean.push_back(a0);
          pairs.push_back({p.u + offset, p.v + offset});
          segment.push_back(static_cast<int>(b - start));
        }
        node_t.insert(node_t.end(), static_cast<std::size_t>(g0.num_nodes()), t);
        node_label.insert(node_label.end(), static_cast<std::size_t>(g0.num_nodes()), label);
        ts.push_back(t);
        offset += g0.num_nodes();
        noisy.push_back(std::move(state.a_t));
      }
      const Graph joined = disjoint_union(noisy);
      auto p_hat = model.edge_probs(model.hidden_batch(joined, node_t, node_label, &drop), pairs, joined);

      const auto rows = static_cast<Eigen::Index>(coeffs.size());
      ag::Matrix q(rows, 1), c0(rows, 1), slope(rows, 1), a0(rows, 1);
      for (Eigen::Index i = 0; i < rows; ++i) {
        q(i, 0) = coeffs[i].q;
        c0(i, 0) = coeffs[i].c0;
        slope(i, 0) = coeffs[i].c1 - coeffs[i].c0;
        a0(i, 0) = clean[i];
      }
      auto p = ag::Var::constant(std::move(c0)) + ag::hadamard(ag::Var::constant(std::move(slope)), p_hat);
      auto per_graph = ag::segment_sum(ag::bernoulli_kl(ag::Var::constant(std::move(q)), p), segment, batch);
      auto loss = ag::mean(per_graph);
      if (options.hybrid_weight > 0) {
        auto aux = ag::segment_sum(ag::bernoulli_kl(ag::Var::constant(std::move(a0)), p_hat), segment, batch);
        loss = loss + ag::scale(ag::mean(aux), options.hybrid_weight);
      }

      for (int b = 0; b < batch; ++b) {
        const double v = per_graph.value()(b, 0);
        if (!std::isfinite(v)) {
          const std::size_t gi = order[start + static_cast<std::size_t>(b)];
          throw NumericalError("non-finite loss at step " + std::to_string(step) + " on graph " + std::to_string(gi) +
                               (corpus.manifest[gi].source.empty() ? "" : " (" + corpus.manifest[gi].source + ")"));
        }
        if (ts[static_cast<std::size_t>(b)] == 1) {
          record.mean_recon_nll += v;
          ++record.recon_examples;
        } else {
          record.mean_vlb += v;
          ++record.kl_examples;
        }
      }
      ag::backward(loss);
      adam.step();
      model.params().zero_grad();
      if (!model.params().all_finite()) {
        throw NumericalError("non-finite parameters after step " + std::to_string(step));
      }
    }
    if (record.kl_examples) record.mean_vlb /= static_cast<double>(record.kl_examples);
    if (record.recon_examples) record.mean_recon_nll /= static_cast<double>(record.recon_examples);
    meta.history.push_back(record);
    meta.epochs = epoch;
    if (options.on_epoch) options.on_epoch(epoch, model, record);
  }

  Checkpoint ck;
  ck.config = model.config();
  ck.horizon = sched.horizon();
  ck.schedule_kind = sched.kind();
  ck.pi = sched.pi();
  ck.clusters = clusters;
  ck.meta = std::move(meta);
  ck.params = model.params().flatten();
  return ck;
}

void write_loss_csv(const std::vector<LossRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "epoch,mean_vlb,mean_recon_nll\n";
  for (const auto& r : history) out << r.epoch << ',' << r.mean_vlb << ',' << r.mean_recon_nll << '\n';
}

}  // namespace gsaug
