#include <gtest/gtest.h>

#include <cmath>

#include "gsaug/diffusion.hpp"
#include "gsaug/error.hpp"
#include "helpers.hpp"

namespace gsaug {
namespace {

double kl_bernoulli(double q, double p) {
  double out = 0;
  if (q > 0) out += q * std::log(q / p);
  if (q < 1) out += (1 - q) * std::log((1 - q) / (1 - p));
  return out;
}

// P(A^{t-1} = 1 | A^t = at, A^0 = a0) by pushing the two-state chain forward
// one transition matrix at a time and applying Bayes to the last step.
double enumerated_posterior(int a0, int at, int t, const NoiseSchedule& s) {
  double p1 = a0;
  for (int k = 1; k <= t - 1; ++k) p1 = p1 * (s.alpha(k) + (1 - s.alpha(k)) * s.pi()) + (1 - p1) * (1 - s.alpha(k)) * s.pi();
  const double up = s.alpha(t) + (1 - s.alpha(t)) * s.pi();
  const double rise = (1 - s.alpha(t)) * s.pi();
  const double w1 = p1 * (at ? up : 1 - up);
  const double w0 = (1 - p1) * (at ? rise : 1 - rise);
  return w1 / (w1 + w0);
}

TEST(Schedule, Endpoints) {
  const auto lin = build_schedule(1, "linear", 0.0);
  EXPECT_NEAR(lin.alpha_bar(1), 1e-4, 1e-15);
  for (const char* kind : {"cosine", "linear"}) {
    for (int T : {1, 7, 128, 500}) {
      const auto s = build_schedule(T, kind, 0.0);
      for (int t = 1; t <= T; ++t) EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
      EXPECT_LE(s.alpha_bar(T), 1e-4);
    }
  }
  EXPECT_THROW(build_schedule(0, "cosine", 0.0), ConfigError);
  EXPECT_THROW(build_schedule(8, "sqrt", 0.0), ConfigError);
  EXPECT_THROW(build_schedule(8, "cosine", 1.0), ConfigError);
}

TEST(Schedule, AlphaFromAlphaBar) {
  const auto s = build_schedule(128, "cosine", 0.0);
  for (int t = 1; t <= 128; ++t) EXPECT_NEAR(s.alpha(t), s.alpha_bar(t) / s.alpha_bar(t - 1), 1e-12);
}

TEST(ForwardMarginal, Endpoints) {
  Rng rng(1);
  const Graph g = test::random_graph(20, 0.3, rng);
  const NoiseSchedule keep(std::vector<double>{1.0, 1.0}, 0.0);
  EXPECT_TRUE(forward_marginal_sample(g, 2, keep, rng).a_t == g);
  const NoiseSchedule wipe(std::vector<double>{1e-300}, 0.0);
  EXPECT_EQ(forward_marginal_sample(g, 1, wipe, rng).a_t.num_edges(), 0u);
  EXPECT_THROW(forward_marginal_sample(g, 3, keep, rng), ConfigError);
}

TEST(ForwardMarginal, BinomialCount) {
  // 1000 edges: a perfect matching on 2000 nodes.
  std::vector<NodePair> e;
  for (NodeId i = 0; i < 1000; ++i) e.push_back({2 * i, 2 * i + 1});
  const Graph g(2000, e);
  const NoiseSchedule half(std::vector<double>{0.5}, 0.0);
  Rng rng(2);
  const double m = static_cast<double>(forward_marginal_sample(g, 1, half, rng).a_t.num_edges());
  EXPECT_LE(std::abs(m - 500.0), 3 * std::sqrt(1000 * 0.25));
}

TEST(Posterior, Examples) {
  const NoiseSchedule s(std::vector<double>{0.8, 0.75}, 0.0);  // alpha_bar = 0.8, 0.6
  EXPECT_DOUBLE_EQ(posterior_prob(1, 1, 2, s), 1.0);
  EXPECT_NEAR(posterior_prob(1, 0, 2, s), 0.5, 1e-12);
  EXPECT_EQ(posterior_prob(0, 0, 2, s), 0.0);
  EXPECT_NEAR(enumerated_posterior(1, 0, 2, s), 0.5, 1e-12);
  EXPECT_THROW(posterior_prob(0, 1, 2, s), NumericalError);
  EXPECT_THROW(posterior_prob(1, 1, 1, s), ConfigError);
}

TEST(Posterior, MatchesEnumerationProperty) {
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    const int T = static_cast<int>(rng.uniform_int(2, 40));
    std::vector<double> alphas(static_cast<std::size_t>(T));
    for (auto& a : alphas) a = 0.3 + 0.7 * rng.uniform();
    const NoiseSchedule s(alphas, rng.uniform() * 0.9);
    const int t = static_cast<int>(rng.uniform_int(2, T));
    const int a0 = static_cast<int>(rng.uniform_int(0, 1));
    const int at = static_cast<int>(rng.uniform_int(0, 1));
    EXPECT_NEAR(posterior_prob(a0, at, t, s), enumerated_posterior(a0, at, t, s), 1e-12);
  }
}

TEST(ReverseStep, Examples) {
  const NoiseSchedule s(std::vector<double>{0.8, 0.75}, 0.0);
  const Graph at(3, {{0, 1}});
  const DiffusionState state{at, 2, {}};
  const std::vector<NodePair> pairs{{0, 1}, {0, 2}};

  const std::vector<double> ones{1.0, 1.0};
  const auto full = reverse_step_distribution(state, ones, pairs, s);
  EXPECT_DOUBLE_EQ(full[0], posterior_prob(1, 1, 2, s));
  EXPECT_DOUBLE_EQ(full[1], posterior_prob(1, 0, 2, s));

  const std::vector<double> mixed{0.1, 0.4};
  const auto p = reverse_step_distribution(state, mixed, pairs, s);
  EXPECT_DOUBLE_EQ(p[0], 1.0);  // absorbing: present edges stay
  EXPECT_NEAR(p[1], 0.2, 1e-12);

  const DiffusionState last{at, 1, {}};
  EXPECT_EQ(reverse_step_distribution(last, mixed, pairs, s), mixed);
}

TEST(Vlb, PerfectDenoiserIsZero) {
  Rng rng(4);
  const auto s = build_schedule(64, "cosine", 0.0);
  for (int i = 0; i < 50; ++i) {
    const Graph g0 = test::random_graph(8, 0.4, rng);
    const test::OracleModel perfect(g0);
    const int t = static_cast<int>(rng.uniform_int(2, 64));
    EXPECT_LE(vlb_loss(g0, perfect, s, t, rng).loss.item(), 1e-9);
  }
}

TEST(Vlb, ReconstructionNll) {
  Rng rng(5);
  const auto s = build_schedule(16, "cosine", 0.0);
  const Graph g0 = test::complete_graph(5);
  const test::OracleModel coin(g0, 0.5, 0.5);
  EXPECT_NEAR(vlb_loss(g0, coin, s, 1, rng).loss.item(), 10 * std::log(2.0), 1e-12);
}

TEST(Vlb, MatchesEnumeratedKlOn4Nodes) {
  Rng rng(6);
  for (double pi : {0.1, 0.4}) {
    const auto s = build_schedule(20, "cosine", pi);
    for (int trial = 0; trial < 40; ++trial) {
      const Graph g0 = test::random_graph(4, 0.5, rng);
      const Graph guess = test::random_graph(4, 0.5, rng);
      const test::OracleModel model(guess, 0.2 + 0.6 * rng.uniform(), 0.1 + 0.3 * rng.uniform());
      const int t = static_cast<int>(rng.uniform_int(2, 20));
      const auto state = forward_marginal_sample(g0, t, s, rng);
      const auto pairs = all_pairs(4);
      const double got = vlb_loss_for_state(g0, state, pairs, model, s).loss.item();

      const auto probs = model.predict_edges(model.encode(state), pairs, state.a_t);
      double want = 0;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const int a0 = g0.has_edge(pairs[i].u, pairs[i].v);
        const int at = state.a_t.has_edge(pairs[i].u, pairs[i].v);
        const double q = enumerated_posterior(a0, at, t, s);
        const double p = probs[i] * enumerated_posterior(1, at, t, s) + (1 - probs[i]) * enumerated_posterior(0, at, t, s);
        want += kl_bernoulli(q, p);
      }
      EXPECT_NEAR(got, want, 1e-9);
    }
  }
}

TEST(Vlb, PriorKlClampedWhenAbsorbing) {
  const auto s = build_schedule(8, "cosine", 0.0);
  const Graph g0 = test::path_graph(3);
  const auto pairs = all_pairs(3);
  const double q = s.alpha_bar(8);
  const double want = 2 * (q * std::log(q / 1e-12) + (1 - q) * std::log((1 - q) / (1 - 1e-12)));
  EXPECT_NEAR(prior_kl(g0, pairs, s), want, 1e-9);
}

TEST(Sample, DegenerateModels) {
  const auto s = build_schedule(16, "cosine", 0.0);
  Rng rng(7);
  const test::OracleModel none(Graph(6, {}), 0.0, 0.0);
  EXPECT_EQ(sample(6, {}, none, s, nullptr, {}, rng).num_edges(), 0u);
  EXPECT_EQ(sample(1, {}, none, s, nullptr, {}, rng).num_nodes(), 1);
  EXPECT_THROW(sample(0, {}, none, s, nullptr, {}, rng), ConfigError);
}

TEST(Sample, FixedTargetDenoiser) {
  // With p_hat fixed, the t = 1 step draws Bernoulli(p_hat) per pair, so the
  // output is a subset of E with expected size on * |E|.
  const auto s = build_schedule(16, "cosine", 0.0);
  Rng rng(8);
  const Graph target = test::random_graph(10, 0.4, rng);
  const test::OracleModel model(target, 0.7, 0.0);
  double total = 0;
  const int runs = 200;
  for (int r = 0; r < runs; ++r) {
    const Graph g = sample(10, {}, model, s, nullptr, {}, rng);
    for (const auto& e : g.edges()) ASSERT_TRUE(target.has_edge(e.u, e.v));
    total += static_cast<double>(g.num_edges());
  }
  const double m = static_cast<double>(target.num_edges());
  EXPECT_NEAR(total / runs, 0.7 * m, 3 * std::sqrt(m * 0.21 / runs));

  SampleOptions opt;
  opt.threshold_q = 0.5;
  EXPECT_TRUE(sample(10, {}, model, s, nullptr, opt, rng) == target);
  opt.threshold_q = 1.0;
  EXPECT_THROW(sample(10, {}, model, s, nullptr, opt, rng), ConfigError);
}

TEST(Sample, StationaryStart) {
  // pi > 0 starts from Bernoulli(pi) noise; a zero predictor still ends empty
  // because the last step returns p_hat.
  const auto s = build_schedule(8, "cosine", 0.3);
  Rng rng(9);
  const test::OracleModel none(Graph(12, {}), 0.0, 0.0);
  EXPECT_EQ(sample(12, {}, none, s, nullptr, {}, rng).num_edges(), 0u);
}

TEST(Candidates, TrainingAndSamplingPairs) {
  Rng rng(10);
  const Graph big = test::random_graph(100, 0.02, rng);
  CandidatePolicy policy;
  policy.full_pair_limit = 64;
  policy.negative_ratio = 2;
  const auto tp = training_pairs(big, policy, rng);
  EXPECT_EQ(tp.size(), big.num_edges() + static_cast<std::size_t>(std::ceil(2.0 * big.num_edges())));
  for (const auto& e : big.edges()) EXPECT_TRUE(std::binary_search(tp.begin(), tp.end(), e));
  EXPECT_TRUE(std::is_sorted(tp.begin(), tp.end()));
  EXPECT_EQ(std::adjacent_find(tp.begin(), tp.end()), tp.end());
  EXPECT_EQ(training_pairs(test::path_graph(10), policy, rng).size(), 45u);
  const auto sp = sampling_pairs(big, policy, rng);
  EXPECT_GE(sp.size(), big.num_edges() + 200);
}

}  // namespace
}  // namespace gsaug
