#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsaug/annotator.hpp"
#include "gsaug/diffusion.hpp"
#include "gsaug/nn.hpp"

namespace gsaug {

struct DenoiserConfig {
  int d = 128;
  int layers = 4;
  int heads = 4;
  double dropout = 0.1;
  int max_degree_clip = 512;
  /// Size of the cluster-label vocabulary fed to f_k.
  int num_labels = 1;

  /// Throws ConfigError when d is not divisible by heads or a size is invalid.
  void validate() const;
  friend bool operator==(const DenoiserConfig&, const DenoiserConfig&) = default;
};

/// Graph transformer over the noisy graph plus a pairwise edge decoder:
///   x_i = f_d(min(deg_i, clip) / clip) + f_t(t / T) + f_k(k)
///   h = GT(x, A^t), attention restricted to the 1-hop neighborhood and self
///   p(A^0_ij = 1) = sigmoid(MLP([h_i + h_j, |h_i - h_j|, A^t_ij]))
class Denoiser final : public DenoisingModel {
 public:
  Denoiser(const DenoiserConfig& config, int horizon, std::uint64_t seed);

  const DenoiserConfig& config() const { return config_; }
  int horizon() const { return horizon_; }
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }

  ag::Var hidden(const DiffusionState& state, Rng* dropout) const override;
  ag::Var edge_probs(const ag::Var& h, std::span<const NodePair> pairs, const Graph& a_t) const override;

  /// Hidden states for a disjoint union where every node carries its own
  /// timestep and label (one entry per node).
  ag::Var hidden_batch(const Graph& graph, std::span<const int> t, std::span<const int> labels,
                       Rng* dropout) const;

 private:
  struct Layer {
    ag::Var ln1_gain, ln1_bias;
    nn::Linear wq, wk, wv, wo;
    ag::Var ln2_gain, ln2_bias;
    nn::Mlp2 ffn;
  };

  DenoiserConfig config_;
  int horizon_;
  nn::ParameterStore store_;
  nn::Linear f_degree_;
  nn::Linear f_time_;
  ag::Var f_label_;  // num_labels x d
  std::vector<Layer> layers_;
  ag::Var out_gain_, out_bias_;
  nn::Mlp2 decoder_;
};

struct LossRecord {
  int epoch = 0;
  double mean_vlb = 0;        // mean per-graph KL over examples with t >= 2
  double mean_recon_nll = 0;  // mean per-graph NLL over examples with t = 1
  std::size_t kl_examples = 0;
  std::size_t recon_examples = 0;
};

struct TrainingMeta {
  int epochs = 0;
  std::string corpus_hash;
  std::uint64_t seed = 0;
  bool self_cond = true;
  double hybrid_weight = 0;
  std::vector<LossRecord> history;
};

struct Checkpoint {
  DenoiserConfig config;
  int horizon = kDefaultTimesteps;
  ScheduleKind schedule_kind = ScheduleKind::Cosine;
  double pi = 0;
  std::optional<ClusterModel> clusters;
  TrainingMeta meta;
  std::vector<double> params;

  NoiseSchedule schedule() const;
  /// Rebuilds the network with the stored parameters.
  Denoiser model() const;
  /// Hash of the parameter blob; guidance heads record it.
  std::string params_hash() const;
  /// Conditioning label for a downstream graph: nearest centroid when the
  /// checkpoint was trained with cluster labels, otherwise 0.
  ClusterLabel label_for(const Graph& g) const;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws DataError on a version mismatch or a truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Reads everything except the parameter blob.
Checkpoint read_checkpoint_manifest(const std::filesystem::path& path);

struct PretrainOptions {
  int epochs = 1;
  double lr = 1e-3;
  int batch_size = 32;
  /// Off replaces every cluster label with a single shared label.
  bool self_cond = true;
  std::uint64_t seed = 0;
  /// Weight of the auxiliary cross-entropy on A^0; 0 is the pure bound.
  double hybrid_weight = 0;
  CandidatePolicy candidates;
  /// Called after every epoch with the epoch index (1-based) and the model.
  std::function<void(int, const Denoiser&, const LossRecord&)> on_epoch;
};

/// Hash of the corpus structure, stored in checkpoints.
std::string corpus_hash(const GraphCorpus& corpus);

/// Trains a fresh denoiser on `corpus` by minimizing the variational bound
/// with Adam. Throws NumericalError on a non-finite loss, naming the step and
/// graph.
Checkpoint pretrain(const GraphCorpus& corpus, const DenoiserConfig& config, const NoiseSchedule& sched,
                    const PretrainOptions& options, const std::optional<ClusterModel>& clusters = {});

/// Same, continuing from existing weights.
Checkpoint pretrain(const GraphCorpus& corpus, Denoiser& model, const NoiseSchedule& sched,
                    const PretrainOptions& options, const std::optional<ClusterModel>& clusters = {});

/// "epoch,mean_vlb,mean_recon_nll" rows.
void write_loss_csv(const std::vector<LossRecord>& history, const std::filesystem::path& path);

}  // namespace gsaug
