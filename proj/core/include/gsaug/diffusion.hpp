#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gsaug/annotator.hpp"
#include "gsaug/autograd.hpp"
#include "gsaug/graph.hpp"
#include "gsaug/rng.hpp"

namespace gsaug {

inline constexpr int kDefaultTimesteps = 128;

enum class ScheduleKind { Cosine, Linear };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

/// Per-step retention probabilities of the binary edge chain
///   q(A^t = 1 | A^{t-1}) = alpha_t A^{t-1} + (1 - alpha_t) pi.
/// Vectors are indexed by t in [0, T] with alpha(0) = alpha_bar(0) = 1.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  /// Builds from explicit per-step alphas (alpha_1..alpha_T), each in (0, 1].
  NoiseSchedule(std::vector<double> alphas, double pi, ScheduleKind kind = ScheduleKind::Cosine);

  int horizon() const { return static_cast<int>(alpha_.size()) - 1; }
  double pi() const { return pi_; }
  ScheduleKind kind() const { return kind_; }
  double alpha(int t) const { return alpha_.at(static_cast<std::size_t>(t)); }
  double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }
  double beta(int t) const { return 1.0 - alpha(t); }

 private:
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
  double pi_ = 0.0;
  ScheduleKind kind_ = ScheduleKind::Cosine;
};

/// "cosine": alpha_bar follows cos^2 with offset s = 0.008, per-step alphas
/// clipped to >= 1e-5. "linear": alpha_bar falls linearly from 1 to 1e-4.
NoiseSchedule build_schedule(int T, std::string_view kind, double pi);

/// Noisy latent graph at timestep t with its conditioning label.
struct DiffusionState {
  Graph a_t;
  int t = 0;
  ClusterLabel label;
};

/// P(A^t_ij = 1 | A^0_ij = a0) = alpha_bar_t a0 + (1 - alpha_bar_t) pi.
double forward_marginal_prob(int a0, int t, const NoiseSchedule& sched);

/// Samples A^t ~ q(A^t | A^0) independently per upper-triangle pair.
DiffusionState forward_marginal_sample(const Graph& g0, int t, const NoiseSchedule& sched, Rng& rng,
                                       ClusterLabel label = {});

/// One transition A^{t-1} -> A^t.
Graph forward_step_sample(const Graph& prev, int t, const NoiseSchedule& sched, Rng& rng);

/// Exact P(A^{t-1} = 1 | A^t = at, A^0 = a0) for 2 <= t <= T. Throws
/// NumericalError when (a0, at) has zero probability under the chain.
double posterior_prob(int a0, int at, int t, const NoiseSchedule& sched);
std::optional<double> try_posterior_prob(int a0, int at, int t, const NoiseSchedule& sched);

/// KL(q || c0 + (c1 - c0) p_hat) for one pair, where q is the true posterior
/// and (c0, c1) the posteriors under a0 = 0 and a0 = 1. At t = 1 the term is the
/// reconstruction NLL: q = a0, c0 = 0, c1 = 1.
struct PairCoefficients {
  double q = 0;
  double c0 = 0;
  double c1 = 1;
};

/// Reverse-step mixing weights for a pair in state `at`. Latent configurations
/// that are impossible under the chain borrow the other branch's posterior.
PairCoefficients reverse_coefficients(int at, int t, const NoiseSchedule& sched);
PairCoefficients vlb_coefficients(int a0, int at, int t, const NoiseSchedule& sched);

struct ReverseDiagnostics {
  std::size_t clamped = 0;
};

/// P(A^{t-1}_ij = 1) = p_hat post(1, at) + (1 - p_hat) post(0, at) per pair.
/// At t = 1 the prediction itself is returned.
std::vector<double> reverse_step_distribution(const DiffusionState& state, std::span<const double> p_hat,
                                              std::span<const NodePair> pairs, const NoiseSchedule& sched,
                                              ReverseDiagnostics* diag = nullptr);

/// Which pairs enter the loss and the sampler.
struct CandidatePolicy {
  double negative_ratio = 4.0;
  NodeId full_pair_limit = 64;
};

/// All pairs for small graphs; otherwise every edge of g0 plus
/// negative_ratio * m uniformly drawn non-edges.
std::vector<NodePair> training_pairs(const Graph& g0, const CandidatePolicy& policy, Rng& rng);
/// All pairs for small graphs; otherwise every edge of a_t plus
/// negative_ratio * max(m_t, n) uniformly drawn non-edges.
std::vector<NodePair> sampling_pairs(const Graph& a_t, const CandidatePolicy& policy, Rng& rng);

/// Denoiser hidden states h^t (one row per node).
struct HiddenStates {
  ag::Matrix h;
  int t = 0;
  ClusterLabel label;
};

/// The predict-A^0 network as seen by the diffusion process.
class DenoisingModel {
 public:
  virtual ~DenoisingModel() = default;

  /// Differentiable hidden states; dropout is active only when `dropout` is set.
  virtual ag::Var hidden(const DiffusionState& state, Rng* dropout) const = 0;
  /// Differentiable P(A^0_ij = 1) as a (pairs x 1) column. The decoder also
  /// sees whether each pair is an edge of the noisy graph a_t.
  virtual ag::Var edge_probs(const ag::Var& h, std::span<const NodePair> pairs, const Graph& a_t) const = 0;

  HiddenStates encode(const DiffusionState& state) const;
  std::vector<double> predict_edges(const HiddenStates& h, std::span<const NodePair> pairs, const Graph& a_t) const;
};

struct VlbTerms {
  ag::Var loss;           // scalar; KL sum (t >= 2) or reconstruction NLL (t = 1)
  double prior_kl = 0;    // KL(q(A^T | A^0) || Bernoulli(pi)), reported only
  int t = 0;
  std::size_t num_pairs = 0;
};

/// Sum over pairs of KL(Bernoulli(q) || Bernoulli(c0 + (c1 - c0) p_hat)).
ag::Var vlb_from_coefficients(const ag::Var& p_hat, std::span<const PairCoefficients> coeffs);

/// Prior matching term over `pairs`. With pi = 0 the prior is clamped to 1e-12.
double prior_kl(const Graph& g0, std::span<const NodePair> pairs, const NoiseSchedule& sched);

/// Corrupts g0 to timestep t and scores the model on the candidate pairs.
VlbTerms vlb_loss(const Graph& g0, const DenoisingModel& model, const NoiseSchedule& sched, int t, Rng& rng,
                  ClusterLabel label = {}, const CandidatePolicy& policy = {}, Rng* dropout = nullptr);

/// Same, for an already-corrupted state and fixed pair set.
VlbTerms vlb_loss_for_state(const Graph& g0, const DiffusionState& state, std::span<const NodePair> pairs,
                            const DenoisingModel& model, const NoiseSchedule& sched, Rng* dropout = nullptr);

/// Refines hidden states between encode and edge prediction.
using GuidanceFn = std::function<HiddenStates(const HiddenStates& h, const DiffusionState& state,
                                              std::span<const NodePair> pairs, Rng& rng)>;

struct SampleTrace {
  int t = 0;
  std::size_t edges = 0;
  double mean_p_hat = 0;
};

struct SampleOptions {
  /// Keep pairs whose probability exceeds q instead of sampling them.
  std::optional<double> threshold_q;
  CandidatePolicy candidates;
  /// Identifies the graph in error messages.
  std::string context;
  std::function<void(const SampleTrace&)> trace;
};

/// Runs the reverse chain from t = T down to 1 and returns the A^0 estimate.
Graph sample(NodeId n, ClusterLabel label, const DenoisingModel& model, const NoiseSchedule& sched,
             const GuidanceFn* guidance, const SampleOptions& options, Rng& rng);

}  // namespace gsaug
