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
#include "gsaug/nn.hpp"

namespace gsaug {

enum class Objective { NodeLabel, NodeDegree, CommonNeighbors, LinkReconstruction, GraphLabel, GraphProperties };
enum class HeadLevel { Node, Edge, Graph };
enum class LossKind { CrossEntropy, MeanSquaredError };

std::string_view to_string(Objective o);
Objective parse_objective(std::string_view name);
std::string_view to_string(HeadLevel level);
HeadLevel level_of(Objective o);

/// Supervision for one graph. Class objectives fill `classes` (one entry per
/// row, -1 = unlabeled and skipped); regression objectives fill `values`
/// (rows x r). Edge-level targets are aligned with `pairs`.
struct ObjectiveTarget {
  std::vector<int> classes;
  ag::Matrix values;
  std::vector<NodePair> pairs;

  bool is_class() const { return !classes.empty(); }
  std::size_t rows() const { return is_class() ? classes.size() : static_cast<std::size_t>(values.rows()); }
};

/// node_label: per-node class; node_degree: per-node degree; common_neighbors
/// and link_reconstruction: per-pair CN count and existence over `pairs` (all
/// pairs when empty); graph_label: class or regression vector;
/// graph_properties: the six structural properties. Throws DataError when a
/// label objective finds no labels.
ObjectiveTarget compute_objective_targets(const Graph& g, Objective objective, std::span<const NodePair> pairs = {});

/// abar * y + (1 - abar) / C for a one-hot y with C = y.size() >= 2.
std::vector<double> smooth_labels(std::span<const double> one_hot, double alpha_bar);
std::vector<double> smooth_labels(std::span<const double> one_hot, int t, const NoiseSchedule& sched);

struct HeadSpec {
  Objective objective = Objective::GraphLabel;
  /// Number of classes for class objectives, output width otherwise.
  int r = 1;
  /// Class objectives use cross-entropy; set for graph_label regression.
  LossKind loss = LossKind::CrossEntropy;
};

/// Two linear layers with a ReLU between them, reading per-node hidden states
/// (node level), the symmetric pair encoding (edge level) or the node mean
/// (graph level).
class GuidanceHead {
 public:
  GuidanceHead(const HeadSpec& spec, int d, std::uint64_t seed);

  const HeadSpec& spec() const { return spec_; }
  HeadLevel level() const { return level_of(spec_.objective); }
  int input_width() const { return d_; }
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }

  /// Raw outputs: one row per node, per pair or a single row.
  ag::Var forward(const ag::Var& h, std::span<const NodePair> pairs = {}) const;
  /// Mean training loss. Class rows use the smoothed targets when
  /// `alpha_bar` is given.
  ag::Var loss(const ag::Var& out, const ObjectiveTarget& target, std::optional<double> alpha_bar = {}) const;
  /// g(h): summed log-probability of the target classes or negative summed
  /// squared error.
  ag::Var score(const ag::Var& h, const ObjectiveTarget& target) const;

  /// Checkpoint parameter hash the head was trained against.
  std::string denoiser_hash;
  double train_metric = 0;  // accuracy for class heads, MSE otherwise
  int epochs_trained = 0;

 private:
  HeadSpec spec_;
  int d_;
  nn::ParameterStore store_;
  nn::Mlp2 mlp_;
};

inline constexpr int kHeadVersion = 1;
void save_head(const GuidanceHead& head, const std::filesystem::path& path);
GuidanceHead load_head(const std::filesystem::path& path);

/// One supervised example: a clean graph and its target.
struct HeadExample {
  Graph graph;
  ObjectiveTarget target;
  ClusterLabel label;
};

struct HeadTrainOptions {
  int epochs = 50;
  double lr = 1e-3;
  int batch_size = 16;
  std::uint64_t seed = 0;
  /// Edge-level objectives resample their pair set per example when set.
  std::function<ObjectiveTarget(const Graph&, Rng&)> resample_target;
};

/// Fits a head on noisy states of the frozen denoiser. Throws Error if the
/// denoiser parameters change while training.
GuidanceHead train_head(const Denoiser& model, const NoiseSchedule& sched, std::span<const HeadExample> data,
                        const HeadSpec& spec, const HeadTrainOptions& options);

/// Accuracy (class heads) or mean squared error at t = 1 with the clean
/// graph as the state.
double evaluate_head(const Denoiser& model, const GuidanceHead& head, std::span<const HeadExample> data);

enum class Ablation { Full, NoGuidance, CrossGuide };
std::string_view to_string(Ablation a);
Ablation parse_ablation(std::string_view name);

struct GuidanceConfig {
  double gamma = 0.1;
  double lambda = 0.01;
  double tau = 0.0;
  int num_updates = 5;
  std::optional<double> threshold_q;
  Ablation ablation = Ablation::Full;
  /// Dataset the head was trained on when ablation is CrossGuide.
  std::string cross_source;

  void validate() const;
};

/// h' <- h' - gamma grad[lambda KL(p(h') || p(h)) - g(h')] + sqrt(2 gamma tau) eps,
/// repeated num_updates times on a copy of h. Identity (no random draws) when
/// gamma = 0 or num_updates = 0.
HiddenStates langevin_refine(const HiddenStates& h, const DenoisingModel& model, const GuidanceHead& head,
                             const ObjectiveTarget& target, const GuidanceConfig& cfg,
                             std::span<const NodePair> pairs, const Graph& a_t, Rng& rng);

/// Target for the current reverse step; edge-level objectives depend on the
/// candidate pairs.
using TargetFn = std::function<ObjectiveTarget(const DiffusionState&, std::span<const NodePair>)>;

/// Reverse chain with Langevin refinement between encode and edge prediction.
/// With ablation NoGuidance (or no head) this is exactly the unguided sampler.
Graph guided_sample(const DenoisingModel& model, const NoiseSchedule& sched, const GuidanceHead* head,
                    const TargetFn& target, const GuidanceConfig& cfg, NodeId n, ClusterLabel label, Rng& rng,
                    SampleOptions options = {});

}  // namespace gsaug
