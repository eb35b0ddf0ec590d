#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "gsaug/augment.hpp"
#include "gsaug/error.hpp"
#include "gsaug/io.hpp"
#include "helpers.hpp"

namespace gsaug {
namespace {

using test::OracleModel;
using test::path_graph;
using test::random_graph;

struct AugmentFixture : ::testing::Test {
  NoiseSchedule sched = build_schedule(8, "cosine", 0.0);
  Denoiser model{[] {
                   DenoiserConfig c;
                   c.d = 8;
                   c.layers = 1;
                   c.heads = 2;
                   c.dropout = 0;
                   c.max_degree_clip = 8;
                   return c;
                 }(),
                 8, 1};
  Generator gen{&model, &sched, {}, nullptr, {}};
  AugmentPlan plan = [] {
    AugmentPlan p;
    p.guidance.ablation = Ablation::NoGuidance;
    p.seed = 42;
    return p;
  }();
};

Graph labeled(NodeId n, int label, Rng& rng) {
  FeatureMatrix x(n, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return random_graph(n, 0.4, rng).with_features(x).with_graph_label(label);
}

TEST_F(AugmentFixture, GraphTaskCountsAndProvenance) {
  Rng rng(1);
  std::vector<Graph> train{labeled(6, 0, rng), labeled(9, 1, rng), labeled(4, 1, rng)};
  plan.repeats = 5;
  const auto out = augment_graph_classification(train, gen, plan);
  ASSERT_EQ(out.graphs.size(), 3u + 15u);
  ASSERT_EQ(out.provenance.size(), 15u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(out.graphs[i], train[i]);
  std::set<std::uint64_t> seeds;
  for (std::size_t k = 0; k < out.provenance.size(); ++k) {
    const auto& r = out.provenance[k];
    EXPECT_EQ(r.synthetic_id, 3 + k);
    EXPECT_EQ(r.source_id, k / 5);
    EXPECT_EQ(r.ablation, "no_guidance");
    seeds.insert(r.seed);
    const Graph& syn = out.graphs[r.synthetic_id];
    const Graph& src = train[r.source_id];
    EXPECT_EQ(syn.num_nodes(), src.num_nodes());
    // Features and label are carried over bit for bit.
    ASSERT_TRUE(syn.node_features());
    EXPECT_EQ(*syn.node_features(), *src.node_features());
    EXPECT_EQ(syn.graph_label(), src.graph_label());
  }
  EXPECT_EQ(seeds.size(), 15u);
  // Reproducible given the plan seed.
  const auto again = augment_graph_classification(train, gen, plan);
  EXPECT_EQ(again.graphs, out.graphs);
}

TEST_F(AugmentFixture, RepeatGrids) {
  for (int r : {1, 5, 10, 32, 64}) {
    plan.repeats = r;
    EXPECT_NO_THROW(plan.validate()) << r;
  }
  plan.repeats = 3;
  EXPECT_THROW(plan.validate(), ConfigError);
  plan.task = TaskKind::Node;
  plan.repeats = 32;
  EXPECT_THROW(plan.validate(), ConfigError);
  plan.repeats = 10;
  EXPECT_NO_THROW(plan.validate());
}

TEST_F(AugmentFixture, LinkTaskKeepsEveryTrainingEdge) {
  Rng rng(2);
  const Graph train = random_graph(12, 0.25, rng);
  const Graph proposal = random_graph(12, 0.3, rng);
  const OracleModel oracle(proposal);
  Generator g{&oracle, &sched, {}, nullptr, {}};
  plan.task = TaskKind::Link;
  const Graph out = augment_link_prediction(train, g, plan);
  for (const auto& e : train.edges()) EXPECT_TRUE(out.has_edge(e.u, e.v));
  // With an exact oracle the result is the union of both structures.
  std::vector<NodePair> both(train.edges().begin(), train.edges().end());
  both.insert(both.end(), proposal.edges().begin(), proposal.edges().end());
  EXPECT_EQ(out, Graph(12, both));
}

TEST_F(AugmentFixture, PartitionedLinkTaskWithEmptyProposalIsIdentity) {
  const Graph train = path_graph(40);
  const OracleModel oracle(Graph(40, {}));
  Generator g{&oracle, &sched, {}, nullptr, {}};
  plan.task = TaskKind::Link;
  plan.max_block_nodes = 10;
  EXPECT_EQ(augment_link_prediction(train, g, plan), train);
}

TEST_F(AugmentFixture, NodeTaskEgos) {
  Rng rng(3);
  std::vector<int> labels(30);
  for (auto& y : labels) y = static_cast<int>(rng.uniform_int(0, 2));
  const std::vector<NodeId> train_nodes{0, 4, 9, 17, 25};
  for (NodeId v = 0; v < 30; ++v) {
    if (std::find(train_nodes.begin(), train_nodes.end(), v) == train_nodes.end()) labels[v] = -1;
  }
  const Graph g = random_graph(30, 0.12, rng).with_node_labels(labels);
  plan.task = TaskKind::Node;
  plan.repeats = 5;
  const auto out = augment_node_classification(g, train_nodes, gen, plan);
  ASSERT_EQ(out.graphs.size(), 5u * 6u);
  ASSERT_EQ(out.centers.size(), out.graphs.size());
  ASSERT_EQ(out.provenance.size(), 25u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(out.centers[i], train_nodes[i]);
    EXPECT_EQ(out.graphs[i], extract_ego_subgraph(g, train_nodes[i], plan.hop_radius).graph);
  }
  for (const auto& r : out.provenance) {
    const Graph& syn = out.graphs[r.synthetic_id];
    const Graph& ego = out.graphs[static_cast<std::size_t>(
        std::find(train_nodes.begin(), train_nodes.end(), static_cast<NodeId>(r.source_id)) - train_nodes.begin())];
    EXPECT_EQ(out.centers[r.synthetic_id], static_cast<NodeId>(r.source_id));
    EXPECT_EQ(syn.num_nodes(), ego.num_nodes());
    EXPECT_EQ(syn.node_labels(), ego.node_labels());
  }
  labels[0] = -1;
  EXPECT_THROW(augment_node_classification(g.with_node_labels(labels), train_nodes, gen, plan), DataError);
}

TEST_F(AugmentFixture, InferenceCopies) {
  Rng rng(4);
  std::vector<Graph> eval{labeled(5, 0, rng), labeled(7, 1, rng)};
  plan.repeats = 5;
  const auto copies = augment_for_inference(eval, gen, plan, 1000);
  ASSERT_EQ(copies.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    ASSERT_EQ(copies[i].size(), 5u);
    for (const auto& c : copies[i]) EXPECT_EQ(c.num_nodes(), eval[i].num_nodes());
  }
}

TEST_F(AugmentFixture, ExportWritesProvenance) {
  test::TempDir dir("export");
  Rng rng(5);
  std::vector<Graph> train{labeled(5, 0, rng), labeled(6, 1, rng)};
  const auto out = augment_graph_classification(train, gen, plan);
  GraphCorpus corpus;
  corpus.graphs = out.graphs;
  corpus.manifest.assign(out.graphs.size(), {"t", "synthetic"});
  export_augmented(corpus, out.provenance, dir.path(), "AUG");
  const auto back = load_tu_corpus(dir.path(), "AUG");
  EXPECT_EQ(back.size(), 4u);
  std::ifstream in(dir.path() / "AUG_provenance.tsv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "synthetic_id\tsource_id\tseed\tfold\tablation");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);
}

TEST(KFold, ReproducibleAndBalanced) {
  const auto a = kfold_assignment(23, 5, 7);
  EXPECT_EQ(a, kfold_assignment(23, 5, 7));
  EXPECT_NE(a, kfold_assignment(23, 5, 8));
  std::vector<int> sizes(5, 0);
  for (int f : a) ++sizes[static_cast<std::size_t>(f)];
  for (int s : sizes) EXPECT_TRUE(s == 4 || s == 5);
  EXPECT_THROW(kfold_assignment(3, 5, 0), DataError);
  EXPECT_THROW(kfold_assignment(10, 1, 0), ConfigError);
}

TEST(SyntheticSeed, Distinct) {
  std::set<std::uint64_t> seen;
  for (std::size_t s = 0; s < 50; ++s) {
    for (int r = 0; r < 10; ++r) seen.insert(synthetic_seed(1, s, r));
  }
  EXPECT_EQ(seen.size(), 500u);
  EXPECT_NE(synthetic_seed(1, 0, 0), synthetic_seed(2, 0, 0));
}

}  // namespace
}  // namespace gsaug
