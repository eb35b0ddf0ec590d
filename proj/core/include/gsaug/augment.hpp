#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gsaug/denoiser.hpp"
#include "gsaug/diffusion.hpp"
#include "gsaug/gnn.hpp"
#include "gsaug/graph.hpp"
#include "gsaug/guidance.hpp"

namespace gsaug {

enum class TaskKind { Graph, Link, Node };
std::string_view to_string(TaskKind task);
TaskKind parse_task(std::string_view name);

struct AugmentPlan {
  TaskKind task = TaskKind::Graph;
  int repeats = 1;
  bool augment_val_test = false;
  GuidanceConfig guidance;
  /// Link task: graphs above this size are partitioned first.
  std::optional<NodeId> max_block_nodes;
  int hop_radius = 2;
  std::uint64_t seed = 0;

  /// Checks the repeat grids ({1,5,10,32,64} for graph tasks, {1,5,10} for
  /// node tasks) and the guidance settings.
  void validate() const;
};

/// Everything generation needs: the frozen denoiser, its schedule, the label
/// lookup and an optional guidance head.
struct Generator {
  const DenoisingModel* model = nullptr;
  const NoiseSchedule* schedule = nullptr;
  std::function<ClusterLabel(const Graph&)> label_for;
  const GuidanceHead* head = nullptr;
  CandidatePolicy candidates;

  /// Generates a structure with `reference`'s node count, guided toward the
  /// head objective evaluated on `reference` (or toward `target` if given).
  Graph generate(const Graph& reference, const AugmentPlan& plan, std::uint64_t seed,
                 const std::optional<ObjectiveTarget>& target = {}) const;
};

struct SyntheticRecord {
  std::size_t synthetic_id = 0;
  std::size_t source_id = 0;
  std::uint64_t seed = 0;
  int fold = -1;
  std::string ablation;
};

/// Seed for the r-th copy of source graph `source` under the plan seed.
std::uint64_t synthetic_seed(std::uint64_t plan_seed, std::size_t source, int repeat);

struct AugmentedGraphs {
  /// Originals first, then `repeats` synthetic graphs per source in order.
  std::vector<Graph> graphs;
  std::vector<SyntheticRecord> provenance;
};

/// Each training graph keeps its features and label and gains `repeats`
/// generated structures of the same node count.
AugmentedGraphs augment_graph_classification(std::span<const Graph> train, const Generator& gen,
                                             const AugmentPlan& plan);

/// Generated structure united with every training edge. Graphs larger than
/// plan.max_block_nodes are partitioned, augmented per block and reassembled
/// with the cut edges restored. Throws Error if a training edge is missing.
Graph augment_link_prediction(const Graph& train_graph, const Generator& gen, const AugmentPlan& plan);

struct AugmentedEgos {
  std::vector<Graph> graphs;  // originals first, then synthetic copies
  std::vector<NodeId> centers;
  std::vector<SyntheticRecord> provenance;
};

/// Ego subgraph of every training node plus `repeats` generated variants.
/// Labels of nodes outside `train_nodes` must already be masked to -1.
AugmentedEgos augment_node_classification(const Graph& g, std::span<const NodeId> train_nodes,
                                          const Generator& gen, const AugmentPlan& plan);

/// Copies of evaluation graphs guided toward the head's own predicted class
/// (no labels are read). Returns `repeats` graphs per input.
std::vector<std::vector<Graph>> augment_for_inference(std::span<const Graph> graphs, const Generator& gen,
                                                      const AugmentPlan& plan, std::uint64_t salt);

/// Writes the graphs in TU format and a provenance TSV next to them.
void export_augmented(const GraphCorpus& corpus, std::span<const SyntheticRecord> provenance,
                      const std::filesystem::path& dir, const std::string& prefix);

/// Seeded fold assignment: a permutation cut into k nearly equal folds.
std::vector<int> kfold_assignment(std::size_t n, int k, std::uint64_t seed);

}  // namespace gsaug
