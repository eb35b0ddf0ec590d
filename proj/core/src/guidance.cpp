#include "gsaug/guidance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "gsaug/error.hpp"
#include "gsaug/io.hpp"
#include "gsaug/properties.hpp"

namespace gsaug {

using json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::pair<Objective, std::string_view>, 6> kObjectiveNames{{
    {Objective::NodeLabel, "node_label"},
    {Objective::NodeDegree, "node_degree"},
    {Objective::CommonNeighbors, "common_neighbors"},
    {Objective::LinkReconstruction, "link_reconstruction"},
    {Objective::GraphLabel, "graph_label"},
    {Objective::GraphProperties, "graph_properties"},
}};

std::vector<int> split_pairs(std::span<const NodePair> pairs, std::vector<int>& vs) {
  std::vector<int> us(pairs.size());
  vs.resize(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    us[i] = pairs[i].u;
    vs[i] = pairs[i].v;
  }
  return us;
}

}  // namespace

std::string_view to_string(Objective o) {
  for (const auto& [k, name] : kObjectiveNames) {
    if (k == o) return name;
  }
  return "unknown";
}

Objective parse_objective(std::string_view name) {
  for (const auto& [k, n] : kObjectiveNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown guidance objective '" + std::string(name) + "'");
}

std::string_view to_string(HeadLevel level) {
  switch (level) {
    case HeadLevel::Node: return "node";
    case HeadLevel::Edge: return "edge";
    case HeadLevel::Graph: return "graph";
  }
  return "unknown";
}

HeadLevel level_of(Objective o) {
  switch (o) {
    case Objective::NodeLabel:
    case Objective::NodeDegree: return HeadLevel::Node;
    case Objective::CommonNeighbors:
    case Objective::LinkReconstruction: return HeadLevel::Edge;
    case Objective::GraphLabel:
    case Objective::GraphProperties: return HeadLevel::Graph;
  }
  return HeadLevel::Graph;
}

ObjectiveTarget compute_objective_targets(const Graph& g, Objective objective, std::span<const NodePair> pairs) {
  ObjectiveTarget out;
  const NodeId n = g.num_nodes();
  switch (objective) {
    case Objective::NodeLabel:
      if (!g.node_labels()) throw DataError("node_label objective needs node labels");
      out.classes = *g.node_labels();
      break;
    case Objective::NodeDegree:
      out.values.resize(n, 1);
      for (NodeId v = 0; v < n; ++v) out.values(v, 0) = g.degree(v);
      break;
    case Objective::CommonNeighbors:
    case Objective::LinkReconstruction: {
      out.pairs = pairs.empty() ? all_pairs(n) : std::vector<NodePair>(pairs.begin(), pairs.end());
      out.values.resize(static_cast<Eigen::Index>(out.pairs.size()), 1);
      for (std::size_t i = 0; i < out.pairs.size(); ++i) {
        const auto [u, v] = out.pairs[i];
        if (u < 0 || v >= n || u >= v) throw ConfigError("target pair out of range");
        out.values(static_cast<Eigen::Index>(i), 0) =
            objective == Objective::CommonNeighbors ? common_neighbors(g, u, v) : (g.has_edge(u, v) ? 1.0 : 0.0);
      }
      break;
    }
    case Objective::GraphLabel: {
      if (!g.graph_label()) throw DataError("graph_label objective needs a graph label");
      if (const int* k = std::get_if<int>(&*g.graph_label())) {
        out.classes = {*k};
      } else {
        const auto& y = std::get<std::vector<double>>(*g.graph_label());
        out.values = Eigen::Map<const ag::Matrix>(y.data(), 1, static_cast<Eigen::Index>(y.size()));
      }
      break;
    }
    case Objective::GraphProperties: {
      const auto p = compute_properties(g).as_array();
      out.values = Eigen::Map<const ag::Matrix>(p.data(), 1, static_cast<Eigen::Index>(p.size()));
      break;
    }
  }
  return out;
}

std::vector<double> smooth_labels(std::span<const double> one_hot, double alpha_bar) {
  if (one_hot.size() < 2) throw ConfigError("label smoothing needs at least 2 classes");
  const double uniform = (1.0 - alpha_bar) / static_cast<double>(one_hot.size());
  std::vector<double> out(one_hot.size());
  for (std::size_t c = 0; c < one_hot.size(); ++c) out[c] = alpha_bar * one_hot[c] + uniform;
  return out;
}

std::vector<double> smooth_labels(std::span<const double> one_hot, int t, const NoiseSchedule& sched) {
  return smooth_labels(one_hot, sched.alpha_bar(t));
}

GuidanceHead::GuidanceHead(const HeadSpec& spec, int d, std::uint64_t seed) : spec_(spec), d_(d) {
  if (spec_.r < 1) throw ConfigError("guidance head output width r must be >= 1");
  if (d < 1) throw ConfigError("guidance head input width must be >= 1");
  const bool class_objective = spec_.objective == Objective::NodeLabel || spec_.objective == Objective::GraphLabel;
  if (spec_.objective == Objective::NodeLabel) spec_.loss = LossKind::CrossEntropy;
  if (!class_objective) spec_.loss = LossKind::MeanSquaredError;
  if (spec_.loss == LossKind::CrossEntropy && spec_.r < 2) throw ConfigError("class heads need r >= 2 classes");
  Rng rng(seed);
  const Eigen::Index in = level() == HeadLevel::Edge ? 2 * d : d;
  mlp_ = nn::Mlp2(store_, "head", in, d, spec_.r, rng);
}

ag::Var GuidanceHead::forward(const ag::Var& h, std::span<const NodePair> pairs) const {
  if (h.cols() != d_) throw ConfigError("hidden width does not match the guidance head");
  switch (level()) {
    case HeadLevel::Node: return mlp_(h);
    case HeadLevel::Edge: {
      std::vector<int> vs;
      const auto us = split_pairs(pairs, vs);
      return mlp_(nn::pair_features(h, us, vs));
    }
    case HeadLevel::Graph: {
      const std::vector<int> seg(static_cast<std::size_t>(h.rows()), 0);
      return mlp_(ag::segment_mean(h, seg, 1));
    }
  }
  return {};
}

ag::Var GuidanceHead::loss(const ag::Var& out, const ObjectiveTarget& target, std::optional<double> alpha_bar) const {
  if (spec_.loss == LossKind::CrossEntropy) {
    if (!target.is_class()) throw ConfigError("cross-entropy head needs class targets");
    if (static_cast<std::size_t>(out.rows()) != target.classes.size()) throw ConfigError("target rows mismatch");
    ag::Matrix w = ag::Matrix::Zero(out.rows(), out.cols());
    std::size_t labeled = 0;
    std::vector<double> one_hot(static_cast<std::size_t>(spec_.r));
    for (std::size_t i = 0; i < target.classes.size(); ++i) {
      const int c = target.classes[i];
      if (c < 0) continue;
      if (c >= spec_.r) throw DataError("class " + std::to_string(c) + " outside head with r=" + std::to_string(spec_.r));
      std::fill(one_hot.begin(), one_hot.end(), 0.0);
      one_hot[static_cast<std::size_t>(c)] = 1.0;
      const auto y = alpha_bar ? smooth_labels(one_hot, *alpha_bar) : one_hot;
      for (int k = 0; k < spec_.r; ++k) w(static_cast<Eigen::Index>(i), k) = y[static_cast<std::size_t>(k)];
      ++labeled;
    }
    if (labeled == 0) return ag::Var::scalar(0.0);
    w /= static_cast<double>(labeled);
    return ag::scale(ag::sum(ag::hadamard(ag::Var::constant(std::move(w)), ag::log_softmax_rows(out))), -1.0);
  }
  if (target.values.rows() != out.rows() || target.values.cols() != out.cols()) {
    throw ConfigError("regression target shape does not match the head output");
  }
  return ag::mean(ag::square(out - ag::Var::constant(target.values)));
}

ag::Var GuidanceHead::score(const ag::Var& h, const ObjectiveTarget& target) const {
  const auto out = forward(h, target.pairs);
  if (spec_.loss == LossKind::CrossEntropy) {
    ag::Matrix w = ag::Matrix::Zero(out.rows(), out.cols());
    for (std::size_t i = 0; i < target.classes.size(); ++i) {
      const int c = target.classes[i];
      if (c >= spec_.r) throw ConfigError("target class outside head range");
      if (c >= 0) w(static_cast<Eigen::Index>(i), c) = 1.0;
    }
    return ag::sum(ag::hadamard(ag::Var::constant(std::move(w)), ag::log_softmax_rows(out)));
  }
  if (target.values.rows() != out.rows() || target.values.cols() != out.cols()) {
    throw ConfigError("regression target shape does not match the head output");
  }
  return ag::scale(ag::sum(ag::square(out - ag::Var::constant(target.values))), -1.0);
}

void save_head(const GuidanceHead& head, const std::filesystem::path& path) {
  json j;
  j["objective"] = std::string(to_string(head.spec().objective));
  j["level"] = std::string(to_string(head.level()));
  j["r"] = head.spec().r;
  j["loss"] = head.spec().loss == LossKind::CrossEntropy ? "cross_entropy" : "mean_squared_error";
  j["d"] = head.input_width();
  j["denoiser_hash"] = head.denoiser_hash;
  j["train_metric"] = head.train_metric;
  j["epochs"] = head.epochs_trained;
  write_container(path, {"head", kHeadVersion, j.dump(), head.params().flatten()});
}

GuidanceHead load_head(const std::filesystem::path& path) {
  const Container c = read_container(path, "head", kHeadVersion, true);
  try {
    const json j = json::parse(c.manifest);
    HeadSpec spec;
    spec.objective = parse_objective(j.at("objective").get<std::string>());
    spec.r = j.at("r").get<int>();
    spec.loss = j.at("loss").get<std::string>() == "cross_entropy" ? LossKind::CrossEntropy : LossKind::MeanSquaredError;
    GuidanceHead head(spec, j.at("d").get<int>(), 0);
    head.params().load(c.values);
    head.denoiser_hash = j.at("denoiser_hash").get<std::string>();
    head.train_metric = j.at("train_metric").get<double>();
    head.epochs_trained = j.at("epochs").get<int>();
    return head;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed head manifest: " + e.what());
  }
}

GuidanceHead train_head(const Denoiser& model, const NoiseSchedule& sched, std::span<const HeadExample> data,
                        const HeadSpec& spec, const HeadTrainOptions& options) {
  if (options.epochs < 0) throw ConfigError("head epochs must be >= 0");
  if (options.batch_size < 1) throw ConfigError("head batch_size must be >= 1");
  if (model.horizon() != sched.horizon()) throw ConfigError("denoiser horizon differs from the schedule");
  GuidanceHead head(spec, model.config().d, options.seed);
  const std::string before = model.params().hash();
  head.denoiser_hash = before;
  if (options.epochs == 0 || data.empty()) return head;

  Rng rng(options.seed ^ 0x2545f4914f6cdd1dULL);
  nn::Adam adam(head.params(), {options.lr});
  head.params().zero_grad();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      ag::Var total;
      for (std::size_t b = start; b < end; ++b) {
        const HeadExample& ex = data[order[b]];
        const int t = static_cast<int>(rng.uniform_int(1, sched.horizon()));
        const auto state = forward_marginal_sample(ex.graph, t, sched, rng, ex.label);
        const auto h = ag::Var::constant(model.encode(state).h);
        const ObjectiveTarget target = options.resample_target ? options.resample_target(ex.graph, rng) : ex.target;
        auto l = head.loss(head.forward(h, target.pairs), target,
                           target.is_class() ? std::optional<double>(sched.alpha_bar(t)) : std::nullopt);
        total = total.defined() ? total + l : l;
      }
      total = ag::scale(total, 1.0 / static_cast<double>(end - start));
      if (!std::isfinite(total.item())) throw NumericalError("non-finite head loss in epoch " + std::to_string(epoch));
      if (total.requires_grad()) {
        ag::backward(total);
        adam.step();
      }
      head.params().zero_grad();
    }
    head.epochs_trained = epoch;
  }
  if (model.params().hash() != before) throw Error("denoiser parameters changed during head training");
  head.train_metric = evaluate_head(model, head, data);
  return head;
}

double evaluate_head(const Denoiser& model, const GuidanceHead& head, std::span<const HeadExample> data) {
  ag::NoGradGuard guard;
  double hits = 0;
  double count = 0;
  double sq = 0;
  for (const auto& ex : data) {
    const auto h = ag::Var::constant(model.encode({ex.graph, 1, ex.label}).h);
    const auto out = head.forward(h, ex.target.pairs).value();
    if (head.spec().loss == LossKind::CrossEntropy) {
      for (std::size_t i = 0; i < ex.target.classes.size(); ++i) {
        if (ex.target.classes[i] < 0) continue;
        Eigen::Index arg = 0;
        out.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
        hits += arg == ex.target.classes[i] ? 1 : 0;
        count += 1;
      }
    } else {
      sq += (out - ex.target.values).squaredNorm();
      count += static_cast<double>(out.size());
    }
  }
  if (count == 0) return 0.0;
  return head.spec().loss == LossKind::CrossEntropy ? hits / count : sq / count;
}

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::NoGuidance: return "no_guidance";
    case Ablation::CrossGuide: return "cross_guide";
  }
  return "unknown";
}

Ablation parse_ablation(std::string_view name) {
  if (name == "full") return Ablation::Full;
  if (name == "no_guidance") return Ablation::NoGuidance;
  if (name == "cross_guide") return Ablation::CrossGuide;
  throw ConfigError("unknown ablation '" + std::string(name) + "' (expected full, no_guidance or cross_guide)");
}

void GuidanceConfig::validate() const {
  if (!(gamma >= 0)) throw ConfigError("guidance gamma must be >= 0");
  if (!(lambda >= 0)) throw ConfigError("guidance lambda must be >= 0");
  if (!(tau >= 0)) throw ConfigError("guidance tau must be >= 0");
  if (num_updates < 0) throw ConfigError("guidance num_updates must be >= 0");
  if (threshold_q && !(*threshold_q > 0 && *threshold_q < 1)) throw ConfigError("threshold_q must be in (0, 1)");
  if (ablation == Ablation::CrossGuide && cross_source.empty()) {
    throw ConfigError("cross_guide ablation needs the source dataset of the head");
  }
}

HiddenStates langevin_refine(const HiddenStates& h, const DenoisingModel& model, const GuidanceHead& head,
                             const ObjectiveTarget& target, const GuidanceConfig& cfg,
                             std::span<const NodePair> pairs, const Graph& a_t, Rng& rng) {
  if (cfg.gamma == 0.0 || cfg.num_updates == 0) return h;
  const auto anchor_probs = model.predict_edges(h, pairs, a_t);
  const auto anchor = ag::Var::constant(
      Eigen::Map<const ag::Matrix>(anchor_probs.data(), static_cast<Eigen::Index>(anchor_probs.size()), 1));
  const double noise = std::sqrt(2.0 * cfg.gamma * cfg.tau);
  HiddenStates out = h;
  for (int step = 1; step <= cfg.num_updates; ++step) {
    ag::Var x(out.h, true);
    auto objective = ag::scale(head.score(x, target), -1.0);
    if (cfg.lambda > 0 && !pairs.empty()) {
      objective = objective + ag::scale(ag::sum(ag::bernoulli_kl(model.edge_probs(x, pairs, a_t), anchor)), cfg.lambda);
    }
    ag::backward(objective);
    const ag::Matrix grad = x.grad();
    if (!grad.allFinite()) throw NumericalError("non-finite guidance gradient at update " + std::to_string(step));
    out.h -= cfg.gamma * grad;
    if (noise > 0) {
      for (Eigen::Index i = 0; i < out.h.size(); ++i) out.h.data()[i] += noise * rng.normal();
    }
  }
  return out;
}

Graph guided_sample(const DenoisingModel& model, const NoiseSchedule& sched, const GuidanceHead* head,
                    const TargetFn& target, const GuidanceConfig& cfg, NodeId n, ClusterLabel label, Rng& rng,
                    SampleOptions options) {
  cfg.validate();
  if (cfg.threshold_q) options.threshold_q = cfg.threshold_q;
  if (cfg.ablation == Ablation::NoGuidance || head == nullptr) {
    return sample(n, label, model, sched, nullptr, options, rng);
  }
  if (!target) throw ConfigError("guided sampling needs a target");
  const GuidanceFn fn = [&](const HiddenStates& h, const DiffusionState& state, std::span<const NodePair> pairs,
                            Rng& r) { return langevin_refine(h, model, *head, target(state, pairs), cfg, pairs, state.a_t, r); };
  return sample(n, label, model, sched, &fn, options, rng);
}

}  // namespace gsaug
