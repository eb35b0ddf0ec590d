#include "gsaug/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "gsaug/error.hpp"

namespace gsaug {

std::string_view to_string(ScheduleKind kind) {
  return kind == ScheduleKind::Cosine ? "cosine" : "linear";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "cosine") return ScheduleKind::Cosine;
  if (name == "linear") return ScheduleKind::Linear;
  throw ConfigError("unknown schedule kind '" + std::string(name) + "' (expected cosine or linear)");
}

NoiseSchedule::NoiseSchedule(std::vector<double> alphas, double pi, ScheduleKind kind) : pi_(pi), kind_(kind) {
  if (alphas.empty()) throw ConfigError("schedule needs T >= 1");
  if (!(pi >= 0.0 && pi < 1.0)) throw ConfigError("converging probability pi must be in [0, 1)");
  alpha_.reserve(alphas.size() + 1);
  alpha_bar_.reserve(alphas.size() + 1);
  alpha_.push_back(1.0);
  alpha_bar_.push_back(1.0);
  for (double a : alphas) {
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("per-step alpha must be in (0, 1]");
    alpha_.push_back(a);
    alpha_bar_.push_back(alpha_bar_.back() * a);
  }
}

NoiseSchedule build_schedule(int T, std::string_view kind_name, double pi) {
  if (T < 1) throw ConfigError("schedule needs T >= 1");
  const ScheduleKind kind = parse_schedule_kind(kind_name);
  std::vector<double> alphas;
  alphas.reserve(static_cast<std::size_t>(T));
  if (kind == ScheduleKind::Cosine) {
    constexpr double s = 0.008;
    auto f = [&](int t) {
      const double c = std::cos((static_cast<double>(t) / T + s) / (1.0 + s) * std::numbers::pi / 2.0);
      return c * c;
    };
    const double f0 = f(0);
    double prev = 1.0;
    for (int t = 1; t <= T; ++t) {
      const double bar = f(t) / f0;
      alphas.push_back(std::clamp(bar / prev, 1e-5, 1.0));
      prev = bar;
    }
  } else {
    constexpr double end = 1e-4;
    double prev = 1.0;
    for (int t = 1; t <= T; ++t) {
      const double bar = 1.0 - (1.0 - end) * static_cast<double>(t) / T;
      alphas.push_back(bar / prev);
      prev = bar;
    }
  }
  return NoiseSchedule(std::move(alphas), pi, kind);
}

double forward_marginal_prob(int a0, int t, const NoiseSchedule& sched) {
  const double ab = sched.alpha_bar(t);
  return ab * a0 + (1.0 - ab) * sched.pi();
}

namespace {

/// Samples every upper-triangle pair with P(1) = keep * A + (1 - keep) * pi.
Graph corrupt(const Graph& g, double keep, double pi, Rng& rng) {
  std::vector<NodePair> out;
  if (pi == 0.0) {
    for (const auto& e : g.edges()) {
      if (rng.bernoulli(keep)) out.push_back(e);
    }
    return Graph(g.num_nodes(), out);
  }
  const double p_edge = keep + (1.0 - keep) * pi;
  const double p_non = (1.0 - keep) * pi;
  auto next_edge = g.edges().begin();
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    for (NodeId v = u + 1; v < g.num_nodes(); ++v) {
      const bool is_edge = next_edge != g.edges().end() && next_edge->u == u && next_edge->v == v;
      if (is_edge) ++next_edge;
      if (rng.bernoulli(is_edge ? p_edge : p_non)) out.push_back({u, v});
    }
  }
  return Graph(g.num_nodes(), out);
}

}  // namespace

DiffusionState forward_marginal_sample(const Graph& g0, int t, const NoiseSchedule& sched, Rng& rng,
                                       ClusterLabel label) {
  if (t < 1 || t > sched.horizon()) {
    throw ConfigError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(sched.horizon()) + "]");
  }
  return {corrupt(g0, sched.alpha_bar(t), sched.pi(), rng), t, label};
}

Graph forward_step_sample(const Graph& prev, int t, const NoiseSchedule& sched, Rng& rng) {
  if (t < 1 || t > sched.horizon()) throw ConfigError("timestep out of range");
  return corrupt(prev, sched.alpha(t), sched.pi(), rng);
}

std::optional<double> try_posterior_prob(int a0, int at, int t, const NoiseSchedule& sched) {
  const double prev1 = forward_marginal_prob(a0, t - 1, sched);
  const double stay = sched.alpha(t) + (1.0 - sched.alpha(t)) * sched.pi();  // q(1 | prev = 1)
  const double rise = (1.0 - sched.alpha(t)) * sched.pi();                  // q(1 | prev = 0)
  const double lik1 = at ? stay : 1.0 - stay;
  const double lik0 = at ? rise : 1.0 - rise;
  const double num = lik1 * prev1;
  const double denom = num + lik0 * (1.0 - prev1);
  if (denom <= 0.0) return std::nullopt;
  return num / denom;
}

double posterior_prob(int a0, int at, int t, const NoiseSchedule& sched) {
  if (t < 2 || t > sched.horizon()) {
    throw ConfigError("posterior needs 2 <= t <= T, got t=" + std::to_string(t));
  }
  auto p = try_posterior_prob(a0, at, t, sched);
  if (!p) {
    throw NumericalError("impossible latent configuration: A^0=" + std::to_string(a0) +
                         ", A^t=" + std::to_string(at) + " at t=" + std::to_string(t));
  }
  return *p;
}

PairCoefficients reverse_coefficients(int at, int t, const NoiseSchedule& sched) {
  if (t == 1) return {0.0, 0.0, 1.0};
  auto c0 = try_posterior_prob(0, at, t, sched);
  auto c1 = try_posterior_prob(1, at, t, sched);
  if (!c0 && !c1) throw NumericalError("state A^t=" + std::to_string(at) + " unreachable at t=" + std::to_string(t));
  PairCoefficients out;
  out.c0 = c0 ? *c0 : *c1;
  out.c1 = c1 ? *c1 : *c0;
  return out;
}

PairCoefficients vlb_coefficients(int a0, int at, int t, const NoiseSchedule& sched) {
  if (t == 1) return {static_cast<double>(a0), 0.0, 1.0};
  PairCoefficients out = reverse_coefficients(at, t, sched);
  out.q = posterior_prob(a0, at, t, sched);
  return out;
}

std::vector<double> reverse_step_distribution(const DiffusionState& state, std::span<const double> p_hat,
                                              std::span<const NodePair> pairs, const NoiseSchedule& sched,
                                              ReverseDiagnostics* diag) {
  if (p_hat.size() != pairs.size()) throw ConfigError("p_hat and pair list differ in length");
  std::vector<double> out(pairs.size());
  const PairCoefficients on = reverse_coefficients(1, state.t, sched);
  const PairCoefficients off = reverse_coefficients(0, state.t, sched);
  if (state.t == 1) {
    std::copy(p_hat.begin(), p_hat.end(), out.begin());
    return out;
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& c = state.a_t.has_edge(pairs[i].u, pairs[i].v) ? on : off;
    double p = c.c0 + (c.c1 - c.c0) * p_hat[i];
    if (p < 0.0 || p > 1.0) {
      p = std::clamp(p, 0.0, 1.0);
      if (diag) ++diag->clamped;
    }
    out[i] = p;
  }
  return out;
}

namespace {

std::vector<NodePair> with_negatives(const Graph& g, std::size_t want, Rng& rng) {
  const NodeId n = g.num_nodes();
  const std::size_t total = static_cast<std::size_t>(n) * (n - 1) / 2;
  const std::size_t available = total - g.num_edges();
  want = std::min(want, available);
  std::vector<NodePair> out(g.edges().begin(), g.edges().end());
  if (want * 2 > available) {
    std::vector<NodePair> negatives;
    negatives.reserve(available);
    for (const auto& p : all_pairs(n)) {
      if (!g.has_edge(p.u, p.v)) negatives.push_back(p);
    }
    std::shuffle(negatives.begin(), negatives.end(), rng.engine());
    out.insert(out.end(), negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(want));
  } else {
    std::set<NodePair> chosen;
    while (chosen.size() < want) {
      auto u = static_cast<NodeId>(rng.uniform_int(0, n - 1));
      auto v = static_cast<NodeId>(rng.uniform_int(0, n - 1));
      if (u == v) continue;
      if (u > v) std::swap(u, v);
      if (!g.has_edge(u, v)) chosen.insert({u, v});
    }
    out.insert(out.end(), chosen.begin(), chosen.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<NodePair> training_pairs(const Graph& g0, const CandidatePolicy& policy, Rng& rng) {
  if (g0.num_nodes() <= policy.full_pair_limit) return all_pairs(g0.num_nodes());
  const auto want = static_cast<std::size_t>(std::ceil(policy.negative_ratio * static_cast<double>(g0.num_edges())));
  return with_negatives(g0, want, rng);
}

std::vector<NodePair> sampling_pairs(const Graph& a_t, const CandidatePolicy& policy, Rng& rng) {
  if (a_t.num_nodes() <= policy.full_pair_limit) return all_pairs(a_t.num_nodes());
  const double base = static_cast<double>(std::max<std::size_t>(a_t.num_edges(), static_cast<std::size_t>(a_t.num_nodes())));
  return with_negatives(a_t, static_cast<std::size_t>(std::ceil(policy.negative_ratio * base)), rng);
}

HiddenStates DenoisingModel::encode(const DiffusionState& state) const {
  ag::NoGradGuard guard;
  return {hidden(state, nullptr).value(), state.t, state.label};
}

std::vector<double> DenoisingModel::predict_edges(const HiddenStates& h, std::span<const NodePair> pairs,
                                                  const Graph& a_t) const {
  ag::NoGradGuard guard;
  const auto probs = edge_probs(ag::Var::constant(h.h), pairs, a_t);
  return {probs.value().data(), probs.value().data() + probs.value().size()};
}

ag::Var vlb_from_coefficients(const ag::Var& p_hat, std::span<const PairCoefficients> coeffs) {
  const auto rows = static_cast<Eigen::Index>(coeffs.size());
  if (p_hat.rows() != rows || p_hat.cols() != 1) throw Error("vlb: p_hat must be a (pairs x 1) column");
  ag::Matrix q(rows, 1);
  ag::Matrix c0(rows, 1);
  ag::Matrix slope(rows, 1);
  for (Eigen::Index i = 0; i < rows; ++i) {
    q(i, 0) = coeffs[i].q;
    c0(i, 0) = coeffs[i].c0;
    slope(i, 0) = coeffs[i].c1 - coeffs[i].c0;
  }
  auto p = ag::Var::constant(std::move(c0)) + ag::hadamard(ag::Var::constant(std::move(slope)), p_hat);
  return ag::sum(ag::bernoulli_kl(ag::Var::constant(std::move(q)), p));
}

double prior_kl(const Graph& g0, std::span<const NodePair> pairs, const NoiseSchedule& sched) {
  const int T = sched.horizon();
  ag::Matrix q(static_cast<Eigen::Index>(pairs.size()), 1);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    q(static_cast<Eigen::Index>(i), 0) = forward_marginal_prob(g0.has_edge(pairs[i].u, pairs[i].v) ? 1 : 0, T, sched);
  }
  ag::NoGradGuard guard;
  auto prior = ag::Var::constant(ag::Matrix::Constant(q.rows(), 1, sched.pi()));
  return ag::sum(ag::bernoulli_kl(ag::Var::constant(std::move(q)), prior)).item();
}

VlbTerms vlb_loss_for_state(const Graph& g0, const DiffusionState& state, std::span<const NodePair> pairs,
                            const DenoisingModel& model, const NoiseSchedule& sched, Rng* dropout) {
  std::vector<PairCoefficients> coeffs(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const int a0 = g0.has_edge(pairs[i].u, pairs[i].v) ? 1 : 0;
    const int at = state.a_t.has_edge(pairs[i].u, pairs[i].v) ? 1 : 0;
    coeffs[i] = vlb_coefficients(a0, at, state.t, sched);
  }
  auto p_hat = model.edge_probs(model.hidden(state, dropout), pairs, state.a_t);
  VlbTerms out;
  out.loss = vlb_from_coefficients(p_hat, coeffs);
  out.prior_kl = prior_kl(g0, pairs, sched);
  out.t = state.t;
  out.num_pairs = pairs.size();
  return out;
}

VlbTerms vlb_loss(const Graph& g0, const DenoisingModel& model, const NoiseSchedule& sched, int t, Rng& rng,
                  ClusterLabel label, const CandidatePolicy& policy, Rng* dropout) {
  auto state = forward_marginal_sample(g0, t, sched, rng, label);
  const auto pairs = training_pairs(g0, policy, rng);
  return vlb_loss_for_state(g0, state, pairs, model, sched, dropout);
}

Graph sample(NodeId n, ClusterLabel label, const DenoisingModel& model, const NoiseSchedule& sched,
             const GuidanceFn* guidance, const SampleOptions& options, Rng& rng) {
  if (n < 1) throw ConfigError("sample needs n >= 1");
  if (options.threshold_q && !(*options.threshold_q > 0.0 && *options.threshold_q < 1.0)) {
    throw ConfigError("threshold q must be in (0, 1)");
  }
  Graph a = Graph(n, {});
  if (sched.pi() > 0.0) {
    std::vector<NodePair> init;
    for (const auto& p : all_pairs(n)) {
      if (rng.bernoulli(sched.pi())) init.push_back(p);
    }
    a = Graph(n, init);
  }

  for (int t = sched.horizon(); t >= 1; --t) {
    DiffusionState state{a, t, label};
    HiddenStates h = model.encode(state);
    const auto pairs = sampling_pairs(a, options.candidates, rng);
    if (guidance && *guidance) {
      try {
        h = (*guidance)(h, state, pairs, rng);
      } catch (const std::exception& e) {
        throw NumericalError("guidance failed at t=" + std::to_string(t) +
                             (options.context.empty() ? "" : " for " + options.context) + ": " + e.what());
      }
    }
    const auto p_hat = model.predict_edges(h, pairs, state.a_t);
    const auto probs = reverse_step_distribution(state, p_hat, pairs, sched);
    std::vector<NodePair> next;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const bool keep = options.threshold_q ? probs[i] > *options.threshold_q : rng.bernoulli(probs[i]);
      if (keep) next.push_back(pairs[i]);
    }
    a = Graph(n, next);
    if (options.trace) {
      double mean = 0;
      for (double p : p_hat) mean += p;
      options.trace({t, a.num_edges(), p_hat.empty() ? 0.0 : mean / static_cast<double>(p_hat.size())});
    }
  }
  return a;
}

}  // namespace gsaug
