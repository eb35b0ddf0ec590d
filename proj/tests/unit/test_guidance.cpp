#include <gtest/gtest.h>

#include <numeric>

#include "gsaug/error.hpp"
#include "gsaug/guidance.hpp"
#include "helpers.hpp"

namespace gsaug {
namespace {

using test::complete_graph;
using test::path_graph;

DenoiserConfig small_config() {
  DenoiserConfig c;
  c.d = 16;
  c.layers = 1;
  c.heads = 2;
  c.dropout = 0.0;
  c.max_degree_clip = 8;
  return c;
}

// Graph on n nodes where node i links to i +- 1..k/2 (mod n); every degree is k.
Graph circulant(NodeId n, int k) {
  std::vector<NodePair> e;
  for (NodeId i = 0; i < n; ++i) {
    for (int s = 1; s <= k / 2; ++s) e.push_back({i, static_cast<NodeId>((i + s) % n)});
  }
  return Graph(n, e);
}

TEST(ObjectiveTargets, Oracles) {
  const auto cn = compute_objective_targets(complete_graph(3), Objective::CommonNeighbors);
  ASSERT_EQ(cn.pairs.size(), 3u);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_EQ(cn.values(i, 0), 1.0);

  const auto deg = compute_objective_targets(path_graph(3), Objective::NodeDegree);
  EXPECT_EQ(deg.values, (ag::Matrix(3, 1) << 1, 2, 1).finished());
  EXPECT_FALSE(deg.is_class());

  const auto link = compute_objective_targets(path_graph(3), Objective::LinkReconstruction);
  EXPECT_EQ(link.values, (ag::Matrix(3, 1) << 1, 0, 1).finished());

  const auto props = compute_objective_targets(test::star_graph(4), Objective::GraphProperties);
  ASSERT_EQ(props.values.cols(), kNumProperties);
  EXPECT_DOUBLE_EQ(props.values(0, 1), 0.5);

  const auto cls = compute_objective_targets(path_graph(3).with_graph_label(2), Objective::GraphLabel);
  EXPECT_EQ(cls.classes, std::vector<int>{2});
  EXPECT_THROW(compute_objective_targets(path_graph(3), Objective::GraphLabel), DataError);
  EXPECT_THROW(compute_objective_targets(path_graph(3), Objective::NodeLabel), DataError);
}

TEST(ObjectiveTargets, ExplicitPairs) {
  const std::vector<NodePair> pairs{{0, 2}};
  const auto cn = compute_objective_targets(path_graph(3), Objective::CommonNeighbors, pairs);
  EXPECT_EQ(cn.values(0, 0), 1.0);
  const std::vector<NodePair> bad{{0, 5}};
  EXPECT_THROW(compute_objective_targets(path_graph(3), Objective::CommonNeighbors, bad), ConfigError);
}

TEST(SmoothLabels, ExamplesAndSum) {
  const std::vector<double> y{0, 1, 0, 0};
  EXPECT_EQ(smooth_labels(y, 1.0), y);
  for (double v : smooth_labels(y, 0.0)) EXPECT_DOUBLE_EQ(v, 0.25);
  const auto half = smooth_labels(y, 0.5);
  EXPECT_DOUBLE_EQ(half[1], 0.625);
  EXPECT_DOUBLE_EQ(half[0], 0.125);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> oh(static_cast<std::size_t>(rng.uniform_int(2, 9)), 0.0);
    oh[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(oh.size()) - 1))] = 1.0;
    const auto s = smooth_labels(oh, rng.uniform());
    EXPECT_NEAR(std::accumulate(s.begin(), s.end(), 0.0), 1.0, 1e-12);
  }
  EXPECT_THROW(smooth_labels(std::vector<double>{1.0}, 0.5), ConfigError);
}

TEST(GuidanceHead, ZeroEpochsKeepsInitialization) {
  const Denoiser model(small_config(), 8, 1);
  const auto sched = build_schedule(8, "cosine", 0.0);
  const HeadSpec spec{Objective::NodeDegree, 1, LossKind::MeanSquaredError};
  std::vector<HeadExample> data{{path_graph(4), compute_objective_targets(path_graph(4), Objective::NodeDegree), {}}};
  HeadTrainOptions opt;
  opt.epochs = 0;
  opt.seed = 9;
  const auto head = train_head(model, sched, data, spec, opt);
  EXPECT_EQ(head.params().hash(), GuidanceHead(spec, 16, 9).params().hash());
  EXPECT_EQ(head.epochs_trained, 0);
}

TEST(GuidanceHead, SeparatesEmptyFromComplete) {
  const Denoiser model(small_config(), 8, 2);
  const auto sched = build_schedule(8, "cosine", 0.0);
  std::vector<HeadExample> data;
  for (int i = 0; i < 8; ++i) {
    const Graph g = (i % 2 ? complete_graph(8) : Graph(8, {})).with_graph_label(i % 2);
    data.push_back({g, compute_objective_targets(g, Objective::GraphLabel), {}});
  }
  HeadTrainOptions opt;
  opt.epochs = 50;
  opt.lr = 1e-2;
  opt.batch_size = 4;
  opt.seed = 3;
  const HeadSpec spec{Objective::GraphLabel, 2, LossKind::CrossEntropy};
  const auto head = train_head(model, sched, data, spec, opt);
  EXPECT_DOUBLE_EQ(evaluate_head(model, head, data), 1.0);
  EXPECT_EQ(head.epochs_trained, 50);
}

TEST(GuidanceHead, LearnsDegreeOnRegularGraphs) {
  const Denoiser model(small_config(), 8, 4);
  const auto sched = build_schedule(8, "cosine", 0.0);
  std::vector<HeadExample> data;
  for (int k : {2, 4, 6}) {
    for (int rep = 0; rep < 3; ++rep) {
      const Graph g = circulant(10, k);
      data.push_back({g, compute_objective_targets(g, Objective::NodeDegree), {}});
    }
  }
  HeadTrainOptions opt;
  opt.epochs = 150;
  opt.lr = 1e-2;
  opt.batch_size = 3;
  opt.seed = 4;
  const HeadSpec spec{Objective::NodeDegree, 1, LossKind::MeanSquaredError};
  const auto untrained = GuidanceHead(spec, 16, 4);
  const auto head = train_head(model, sched, data, spec, opt);
  // Target variance is 8/3; a useful head must beat predicting the mean.
  EXPECT_LT(evaluate_head(model, head, data), 0.5);
  EXPECT_LT(evaluate_head(model, head, data), evaluate_head(model, untrained, data));
}

TEST(GuidanceHead, SaveLoadRoundTrip) {
  test::TempDir dir("head");
  GuidanceHead head({Objective::CommonNeighbors, 1, LossKind::MeanSquaredError}, 16, 5);
  head.denoiser_hash = "abc";
  head.train_metric = 0.25;
  head.epochs_trained = 7;
  save_head(head, dir.path() / "h.head");
  const auto back = load_head(dir.path() / "h.head");
  EXPECT_EQ(back.params().hash(), head.params().hash());
  EXPECT_EQ(back.denoiser_hash, "abc");
  EXPECT_EQ(back.spec().objective, Objective::CommonNeighbors);
  EXPECT_EQ(back.epochs_trained, 7);
  EXPECT_DOUBLE_EQ(back.train_metric, 0.25);
}

struct LangevinFixture : ::testing::Test {
  Denoiser model{small_config(), 8, 6};
  GuidanceHead head{{Objective::NodeDegree, 1, LossKind::MeanSquaredError}, 16, 7};
  Graph a_t = circulant(8, 2);
  DiffusionState state{a_t, 4, {}};
  HiddenStates h = model.encode(state);
  std::vector<NodePair> pairs = all_pairs(8);
  ObjectiveTarget target{{}, ag::Matrix::Constant(8, 1, 5.0), {}};

  double score(const HiddenStates& s) const { return head.score(ag::Var::constant(s.h), target).item(); }
  double drift(const HiddenStates& s) const {
    const auto p0 = model.predict_edges(h, pairs, a_t);
    const auto p1 = model.predict_edges(s, pairs, a_t);
    double kl = 0;
    for (std::size_t i = 0; i < p0.size(); ++i) {
      kl += p1[i] * std::log(p1[i] / p0[i]) + (1 - p1[i]) * std::log((1 - p1[i]) / (1 - p0[i]));
    }
    return kl;
  }
};

TEST_F(LangevinFixture, IdentityWithoutSteps) {
  GuidanceConfig cfg;
  Rng rng(1);
  const auto before = rng.uniform();
  Rng r1(1), r2(1);
  cfg.gamma = 0;
  EXPECT_EQ(langevin_refine(h, model, head, target, cfg, pairs, a_t, r1).h, h.h);
  cfg.gamma = 0.1;
  cfg.num_updates = 0;
  EXPECT_EQ(langevin_refine(h, model, head, target, cfg, pairs, a_t, r2).h, h.h);
  EXPECT_EQ(r1.uniform(), before);
  EXPECT_EQ(r2.uniform(), before);
}

TEST_F(LangevinFixture, ScoreImprovesMonotonicallyWithoutNoise) {
  GuidanceConfig cfg;
  cfg.gamma = 1e-3;
  cfg.lambda = 0;
  cfg.tau = 0;
  double prev = score(h);
  for (int k = 1; k <= 6; ++k) {
    cfg.num_updates = k;
    Rng rng(2);
    const double s = score(langevin_refine(h, model, head, target, cfg, pairs, a_t, rng));
    EXPECT_GT(s, prev) << k;
    prev = s;
  }
}

TEST_F(LangevinFixture, LargeLambdaLimitsDrift) {
  GuidanceConfig cfg;
  cfg.gamma = 2e-3;
  cfg.tau = 0;
  cfg.num_updates = 10;
  cfg.lambda = 0;
  Rng r1(3), r2(3);
  const double free_drift = drift(langevin_refine(h, model, head, target, cfg, pairs, a_t, r1));
  cfg.lambda = 50;
  const double held = drift(langevin_refine(h, model, head, target, cfg, pairs, a_t, r2));
  EXPECT_GT(free_drift, 0);
  EXPECT_LT(held, free_drift);
}

TEST(GuidedSample, DisabledGuidanceIsTheUnguidedSampler) {
  const Denoiser model(small_config(), 8, 8);
  const auto sched = build_schedule(8, "cosine", 0.0);
  const GuidanceHead head({Objective::NodeDegree, 1, LossKind::MeanSquaredError}, 16, 9);
  const TargetFn target = [](const DiffusionState& s, std::span<const NodePair>) {
    return ObjectiveTarget{{}, ag::Matrix::Constant(s.a_t.num_nodes(), 1, 4.0), {}};
  };
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng base(seed);
    const Graph plain = sample(10, {}, model, sched, nullptr, {}, base);
    GuidanceConfig cfg;
    cfg.ablation = Ablation::NoGuidance;
    Rng r1(seed), r2(seed), r3(seed);
    EXPECT_EQ(guided_sample(model, sched, &head, target, cfg, 10, {}, r1), plain);
    cfg.ablation = Ablation::Full;
    cfg.gamma = 0;
    EXPECT_EQ(guided_sample(model, sched, &head, target, cfg, 10, {}, r2), plain);
    cfg.gamma = 0.1;
    cfg.num_updates = 0;
    EXPECT_EQ(guided_sample(model, sched, &head, target, cfg, 10, {}, r3), plain);
  }
}

TEST(GuidedSample, HighThresholdKeepsOnlyCertainEdges) {
  const Graph target = circulant(8, 2);
  const test::OracleModel model(target, 1.0, 0.0);
  const auto sched = build_schedule(8, "cosine", 0.0);
  GuidanceConfig cfg;
  cfg.ablation = Ablation::NoGuidance;
  cfg.threshold_q = 0.999;
  Rng rng(4);
  EXPECT_EQ(guided_sample(model, sched, nullptr, {}, cfg, 8, {}, rng), target);
}

TEST(GuidanceConfig, Validation) {
  GuidanceConfig cfg;
  cfg.gamma = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.num_updates = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_EQ(parse_ablation(to_string(Ablation::CrossGuide)), Ablation::CrossGuide);
  EXPECT_EQ(parse_objective(to_string(Objective::CommonNeighbors)), Objective::CommonNeighbors);
  EXPECT_THROW(parse_objective("nope"), ConfigError);
}

}  // namespace
}  // namespace gsaug
