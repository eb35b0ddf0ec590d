#include "gsaug/augment.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "gsaug/error.hpp"
#include "gsaug/io.hpp"

namespace gsaug {

std::string_view to_string(TaskKind task) {
  switch (task) {
    case TaskKind::Graph: return "graph";
    case TaskKind::Link: return "link";
    case TaskKind::Node: return "node";
  }
  return "unknown";
}

TaskKind parse_task(std::string_view name) {
  if (name == "graph") return TaskKind::Graph;
  if (name == "link") return TaskKind::Link;
  if (name == "node") return TaskKind::Node;
  throw ConfigError("unknown task '" + std::string(name) + "' (expected graph, link or node)");
}

void AugmentPlan::validate() const {
  guidance.validate();
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  static constexpr int graph_grid[] = {1, 5, 10, 32, 64};
  static constexpr int node_grid[] = {1, 5, 10};
  if (task == TaskKind::Graph && std::find(std::begin(graph_grid), std::end(graph_grid), repeats) == std::end(graph_grid)) {
    throw ConfigError("graph-task repeats must be one of 1, 5, 10, 32, 64");
  }
  if (task == TaskKind::Node && std::find(std::begin(node_grid), std::end(node_grid), repeats) == std::end(node_grid)) {
    throw ConfigError("node-task repeats must be one of 1, 5, 10");
  }
  if (max_block_nodes && *max_block_nodes < 1) throw ConfigError("max_block_nodes must be >= 1");
  if (hop_radius < 1) throw ConfigError("hop_radius must be >= 1");
}

std::uint64_t synthetic_seed(std::uint64_t plan_seed, std::size_t source, int repeat) {
  // splitmix64 over the three inputs
  std::uint64_t z = plan_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(source) * 1000003ULL +
                                                         static_cast<std::uint64_t>(repeat) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Graph Generator::generate(const Graph& reference, const AugmentPlan& plan, std::uint64_t seed,
                          const std::optional<ObjectiveTarget>& target) const {
  if (!model || !schedule) throw ConfigError("generator needs a denoiser and a schedule");
  const ClusterLabel label = label_for ? label_for(reference) : ClusterLabel{0};
  SampleOptions options;
  options.candidates = candidates;
  options.context = "graph with " + std::to_string(reference.num_nodes()) + " nodes, seed " + std::to_string(seed);
  Rng rng(seed);

  TargetFn fn;
  const bool guided = head != nullptr && plan.guidance.ablation != Ablation::NoGuidance;
  if (guided) {
    const Objective obj = head->spec().objective;
    if (target) {
      fn = [t = *target](const DiffusionState&, std::span<const NodePair>) { return t; };
    } else if (level_of(obj) == HeadLevel::Edge) {
      fn = [&reference, obj](const DiffusionState&, std::span<const NodePair> pairs) {
        return compute_objective_targets(reference, obj, pairs);
      };
    } else {
      fn = [t = compute_objective_targets(reference, obj)](const DiffusionState&, std::span<const NodePair>) {
        return t;
      };
    }
  }
  const Graph structure =
      guided_sample(*model, *schedule, guided ? head : nullptr, fn, plan.guidance, reference.num_nodes(), label, rng,
                    options);
  if (structure.num_nodes() != reference.num_nodes()) {
    throw Error("generated structure has " + std::to_string(structure.num_nodes()) + " nodes, source has " +
                std::to_string(reference.num_nodes()));
  }
  return reference.with_edges(structure.edges());
}

AugmentedGraphs augment_graph_classification(std::span<const Graph> train, const Generator& gen,
                                             const AugmentPlan& plan) {
  plan.validate();
  AugmentedGraphs out;
  out.graphs.assign(train.begin(), train.end());
  for (std::size_t i = 0; i < train.size(); ++i) {
    for (int r = 0; r < plan.repeats; ++r) {
      const std::uint64_t seed = synthetic_seed(plan.seed, i, r);
      out.graphs.push_back(gen.generate(train[i], plan, seed));
      out.provenance.push_back({out.graphs.size() - 1, i, seed, -1, std::string(to_string(plan.guidance.ablation))});
    }
  }
  return out;
}

Graph augment_link_prediction(const Graph& train_graph, const Generator& gen, const AugmentPlan& plan) {
  plan.validate();
  Graph generated;
  if (plan.max_block_nodes && train_graph.num_nodes() > *plan.max_block_nodes) {
    const Partition p = partition_graph(train_graph, *plan.max_block_nodes);
    std::vector<Graph> blocks;
    blocks.reserve(p.blocks.size());
    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
      blocks.push_back(gen.generate(p.blocks[b].graph, plan, synthetic_seed(plan.seed, b, 0)));
    }
    generated = assemble_partitions(p, blocks, &train_graph);
  } else {
    generated = gen.generate(train_graph, plan, synthetic_seed(plan.seed, 0, 0));
  }
  std::vector<NodePair> edges(generated.edges().begin(), generated.edges().end());
  edges.insert(edges.end(), train_graph.edges().begin(), train_graph.edges().end());
  Graph out = train_graph.with_edges(edges);
  for (const auto& e : train_graph.edges()) {
    if (!out.has_edge(e.u, e.v)) {
      throw Error("training edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) + ") lost during augmentation");
    }
  }
  return out;
}

AugmentedEgos augment_node_classification(const Graph& g, std::span<const NodeId> train_nodes, const Generator& gen,
                                          const AugmentPlan& plan) {
  plan.validate();
  if (!g.node_labels()) throw DataError("node classification needs node labels");
  AugmentedEgos out;
  std::vector<EgoSubgraph> egos;
  for (NodeId v : train_nodes) {
    if ((*g.node_labels())[v] < 0) throw DataError("training node " + std::to_string(v) + " has no label");
    egos.push_back(extract_ego_subgraph(g, v, plan.hop_radius));
    out.graphs.push_back(egos.back().graph);
    out.centers.push_back(v);
  }
  for (std::size_t i = 0; i < egos.size(); ++i) {
    for (int r = 0; r < plan.repeats; ++r) {
      const std::uint64_t seed = synthetic_seed(plan.seed, static_cast<std::size_t>(train_nodes[i]), r);
      out.graphs.push_back(gen.generate(egos[i].graph, plan, seed));
      out.centers.push_back(train_nodes[i]);
      out.provenance.push_back({out.graphs.size() - 1, static_cast<std::size_t>(train_nodes[i]), seed, -1,
                                std::string(to_string(plan.guidance.ablation))});
    }
  }
  return out;
}

std::vector<std::vector<Graph>> augment_for_inference(std::span<const Graph> graphs, const Generator& gen,
                                                      const AugmentPlan& plan, std::uint64_t salt) {
  plan.validate();
  std::vector<std::vector<Graph>> out(graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    std::optional<ObjectiveTarget> target;
    if (gen.head && plan.guidance.ablation != Ablation::NoGuidance) {
      ag::NoGradGuard guard;
      const ClusterLabel label = gen.label_for ? gen.label_for(graphs[i]) : ClusterLabel{0};
      const auto h = ag::Var::constant(gen.model->encode({graphs[i], 1, label}).h);
      ObjectiveTarget t;
      if (level_of(gen.head->spec().objective) == HeadLevel::Edge) {
        t = compute_objective_targets(graphs[i], gen.head->spec().objective);
      } else {
        const auto pred = gen.head->forward(h).value();
        if (gen.head->spec().loss == LossKind::CrossEntropy) {
          t.classes = argmax_rows(pred);
        } else {
          t.values = pred;
        }
      }
      target = std::move(t);
    }
    for (int r = 0; r < plan.repeats; ++r) {
      out[i].push_back(gen.generate(graphs[i], plan, synthetic_seed(plan.seed ^ salt, i, r), target));
    }
  }
  return out;
}

void export_augmented(const GraphCorpus& corpus, std::span<const SyntheticRecord> provenance,
                      const std::filesystem::path& dir, const std::string& prefix) {
  write_tu_corpus(corpus, dir, prefix);
  std::ofstream out(dir / (prefix + "_provenance.tsv"));
  if (!out) throw DataError("cannot write provenance in " + dir.string());
  out << "synthetic_id\tsource_id\tseed\tfold\tablation\n";
  for (const auto& r : provenance) {
    out << r.synthetic_id << '\t' << r.source_id << '\t' << r.seed << '\t' << r.fold << '\t' << r.ablation << '\n';
  }
}

std::vector<int> kfold_assignment(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("cross-validation needs k >= 2 folds");
  if (n < static_cast<std::size_t>(k)) throw DataError("fewer graphs than folds");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  std::vector<int> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  return fold;
}

}  // namespace gsaug
