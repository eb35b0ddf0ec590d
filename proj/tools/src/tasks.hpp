#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "config.hpp"
#include "gsaug/augment.hpp"
#include "gsaug/denoiser.hpp"
#include "run.hpp"

namespace gsaug::cli {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Graph classification or regression with k-fold cross-validation. Fold f
/// tests on fold f, validates on fold f+1 and trains on the rest.
struct GraphTask {
  GraphCorpus data;
  std::vector<int> fold_of;
  int folds = 0;
  int num_classes = 0;  // 0 for regression
  int value_dim = 1;

  Split split(int fold) const;
  std::vector<Graph> select(std::span<const std::size_t> ids) const;
};
GraphTask load_graph_task(const ExperimentConfig& cfg);

/// Single graph with seeded edge split and shared negative pool.
struct LinkTask {
  Graph full;
  LinkSplit split;
};
LinkTask load_link_task(const ExperimentConfig& cfg);

/// Single graph with node labels and a seeded node split.
struct NodeTask {
  Graph full;
  Split nodes;
  int num_classes = 0;

  std::vector<NodeId> ids(std::span<const std::size_t> s) const;
};
NodeTask load_node_task(const ExperimentConfig& cfg);

/// Frozen denoiser loaded from the run directory.
struct Pretrained {
  Checkpoint ckpt;
  Denoiser model;
  NoiseSchedule schedule;
};
Pretrained load_pretrained(const ExperimentConfig& cfg);

Generator make_generator(const Pretrained& p, const GuidanceHead* head, const ExperimentConfig& cfg);

// Run-directory layout.
std::filesystem::path checkpoint_path(const ExperimentConfig& cfg);
std::filesystem::path head_path(const ExperimentConfig& cfg, int fold);
std::filesystem::path augmented_dir(const ExperimentConfig& cfg, int fold);
inline constexpr const char* kAugPrefix = "AUG";

/// Head for fold `fold` (or the cross-guide head), checked against the
/// checkpoint it will steer.
std::optional<GuidanceHead> load_head_for(const ExperimentConfig& cfg, const Pretrained& p, int fold);

}  // namespace gsaug::cli
