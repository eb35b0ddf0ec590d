#include <gtest/gtest.h>

#include <fstream>

#include "gsaug/denoiser.hpp"
#include "gsaug/error.hpp"
#include "helpers.hpp"

namespace gsaug {
namespace {

using test::cycle_graph;
using test::random_graph;

DenoiserConfig small_config(int num_labels = 1) {
  DenoiserConfig c;
  c.d = 16;
  c.layers = 2;
  c.heads = 4;
  c.dropout = 0.0;
  c.max_degree_clip = 8;
  c.num_labels = num_labels;
  return c;
}

GraphCorpus copies(const Graph& g, int count) {
  GraphCorpus c;
  for (int i = 0; i < count; ++i) {
    c.graphs.push_back(g);
    c.manifest.push_back({"test", "synthetic"});
  }
  return c;
}

ag::Matrix param(const Denoiser& m, const std::string& name) {
  for (const auto& [n, v] : m.params().entries()) {
    if (n == name) return v.value();
  }
  ADD_FAILURE() << "no parameter " << name;
  return {};
}

TEST(Denoiser, ConfigValidation) {
  auto c = small_config();
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(Denoiser(small_config(), 0, 1), ConfigError);
}

TEST(Denoiser, HiddenStatesArePermutationEquivariant) {
  Rng rng(1);
  const Denoiser model(small_config(), 16, 3);
  for (int trial = 0; trial < 5; ++trial) {
    const Graph g = random_graph(9, 0.35, rng);
    const auto perm = test::random_permutation(9, rng);
    const auto h = model.encode({g, 7, {}}).h;
    const auto hp = model.encode({permute_graph(g, perm), 7, {}}).h;
    for (NodeId v = 0; v < 9; ++v) {
      EXPECT_LT((h.row(v) - hp.row(perm[static_cast<std::size_t>(v)])).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(Denoiser, LabelAndTimestepChangeHiddenStates) {
  const Denoiser model(small_config(3), 16, 3);
  const Graph g = cycle_graph(6);
  const auto h0 = model.encode({g, 5, {0}}).h;
  EXPECT_GT((h0 - model.encode({g, 5, {2}}).h).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_GT((h0 - model.encode({g, 9, {0}}).h).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_THROW(model.encode({g, 5, {3}}), ConfigError);
  EXPECT_THROW(model.encode({g, 17, {0}}), ConfigError);
}

TEST(Denoiser, EmptyGraphGivesIdenticalRows) {
  const Denoiser model(small_config(), 16, 5);
  const auto h = model.encode({Graph(7, {}), 16, {}}).h;
  for (Eigen::Index r = 1; r < h.rows(); ++r) EXPECT_LT((h.row(r) - h.row(0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Denoiser, EdgeProbabilitiesMatchExplicitDecoder) {
  Rng rng(2);
  const Denoiser model(small_config(), 16, 9);
  const Graph a_t = random_graph(8, 0.4, rng);
  const auto hs = model.encode({a_t, 4, {}});
  const auto pairs = all_pairs(8);
  const auto probs = model.predict_edges(hs, pairs, a_t);
  const auto w0 = param(model, "decoder.0.weight"), b0 = param(model, "decoder.0.bias");
  const auto w1 = param(model, "decoder.1.weight"), b1 = param(model, "decoder.1.bias");
  const Eigen::Index d = hs.h.cols();
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [u, v] = pairs[k];
    ag::Matrix x(1, 2 * d + 1);
    x.leftCols(d) = hs.h.row(u) + hs.h.row(v);
    x.block(0, d, 1, d) = (hs.h.row(u) - hs.h.row(v)).cwiseAbs();
    x(0, 2 * d) = a_t.has_edge(u, v) ? 1.0 : 0.0;
    const ag::Matrix hidden = (x * w0 + b0).cwiseMax(0.0);
    const double logit = (hidden * w1 + b1)(0, 0);
    EXPECT_NEAR(probs[k], 1.0 / (1.0 + std::exp(-logit)), 1e-12);
  }
}

TEST(Denoiser, PredictionsAreSymmetricAndValidated) {
  Rng rng(3);
  const Denoiser model(small_config(), 16, 9);
  const Graph a_t = random_graph(6, 0.5, rng);
  const auto hs = model.encode({a_t, 4, {}});
  const std::vector<NodePair> forward{{1, 4}};
  const auto p = model.predict_edges(hs, forward, a_t);
  // Canonical pairs only; the encoding itself is symmetric in (u, v).
  const auto feats = nn::pair_features(ag::Var::constant(hs.h), std::vector<int>{4}, std::vector<int>{1});
  const auto feats2 = nn::pair_features(ag::Var::constant(hs.h), std::vector<int>{1}, std::vector<int>{4});
  EXPECT_EQ(feats.value(), feats2.value());
  EXPECT_GT(p[0], 0.0);
  EXPECT_LT(p[0], 1.0);
  const std::vector<NodePair> bad{{4, 1}};
  EXPECT_THROW(model.predict_edges(hs, bad, a_t), ConfigError);
}

TEST(Checkpoint, RoundTripAndDamage) {
  test::TempDir dir("ckpt");
  const auto sched = build_schedule(16, "cosine", 0.0);
  PretrainOptions opt;
  opt.epochs = 1;
  opt.batch_size = 4;
  opt.seed = 4;
  const Checkpoint ck = pretrain(copies(cycle_graph(5), 6), small_config(), sched, opt);
  const auto path = dir.path() / "m.ckpt";
  save_checkpoint(ck, path);

  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.params, ck.params);
  EXPECT_EQ(back.params_hash(), ck.params_hash());
  EXPECT_EQ(back.meta.corpus_hash, ck.meta.corpus_hash);
  ASSERT_EQ(back.meta.history.size(), 1u);
  EXPECT_DOUBLE_EQ(back.meta.history[0].mean_vlb, ck.meta.history[0].mean_vlb);
  EXPECT_EQ(back.model().params().hash(), ck.model().params().hash());

  const Checkpoint head_only = read_checkpoint_manifest(path);
  EXPECT_TRUE(head_only.params.empty());
  EXPECT_EQ(head_only.horizon, 16);

  // Flip one parameter byte: the recorded hash no longer matches.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(-3, std::ios::end);
    char c = 0;
    f.get(c);
    f.seekp(-3, std::ios::end);
    f.put(static_cast<char>(c ^ 0x40));
  }
  EXPECT_THROW(load_checkpoint(path), DataError);

  save_checkpoint(ck, path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 16);
  EXPECT_THROW(load_checkpoint(path), DataError);
}

TEST(Pretrain, DeterministicGivenSeed) {
  const auto sched = build_schedule(16, "cosine", 0.0);
  Rng rng(5);
  GraphCorpus corpus;
  for (int i = 0; i < 10; ++i) {
    corpus.graphs.push_back(random_graph(7, 0.4, rng));
    corpus.manifest.push_back({"r", "synthetic"});
  }
  PretrainOptions opt;
  opt.epochs = 2;
  opt.batch_size = 3;
  opt.seed = 11;
  const auto a = pretrain(corpus, small_config(), sched, opt);
  const auto b = pretrain(corpus, small_config(), sched, opt);
  EXPECT_EQ(a.params_hash(), b.params_hash());
  opt.seed = 12;
  EXPECT_NE(a.params_hash(), pretrain(corpus, small_config(), sched, opt).params_hash());
}

TEST(Pretrain, OneEpochOnTriangleIsFinite) {
  const auto sched = build_schedule(8, "cosine", 0.0);
  PretrainOptions opt;
  opt.epochs = 1;
  opt.batch_size = 1;
  int calls = 0;
  opt.on_epoch = [&](int e, const Denoiser&, const LossRecord& r) {
    ++calls;
    EXPECT_EQ(e, 1);
    EXPECT_EQ(r.kl_examples + r.recon_examples, 1u);
    EXPECT_TRUE(std::isfinite(r.mean_vlb + r.mean_recon_nll));
  };
  const auto ck = pretrain(copies(test::complete_graph(3), 1), small_config(), sched, opt);
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(ck.meta.epochs, 1);
}

TEST(Pretrain, RejectsBadInputs) {
  const auto sched = build_schedule(8, "cosine", 0.0);
  PretrainOptions opt;
  EXPECT_THROW(pretrain(GraphCorpus{}, small_config(), sched, opt), DataError);
  auto corpus = copies(cycle_graph(4), 2);
  corpus.cluster_labels = std::vector<int>{0, 2};
  EXPECT_THROW(pretrain(corpus, small_config(2), sched, opt), ConfigError);
  opt.lr = 0;
  EXPECT_THROW(pretrain(copies(cycle_graph(4), 2), small_config(), sched, opt), ConfigError);
}

// Mean bound over all timesteps for a fixed set of corruptions.
double mean_bound(const Graph& g, const Denoiser& model, const NoiseSchedule& sched) {
  double total = 0;
  int count = 0;
  for (int rep = 0; rep < 4; ++rep) {
    for (int t = 2; t <= sched.horizon(); ++t) {
      Rng rng(static_cast<std::uint64_t>(100 * rep + t));
      total += vlb_loss(g, model, sched, t, rng).loss.item();
      ++count;
    }
  }
  return total / count;
}

TEST(Pretrain, TrainingLowersTheBound) {
  const auto sched = build_schedule(16, "cosine", 0.0);
  const Graph ring = cycle_graph(8);
  DenoiserConfig cfg = small_config();
  Denoiser model(cfg, 16, 21);
  const double before = mean_bound(ring, model, sched);
  PretrainOptions opt;
  opt.epochs = 40;
  opt.batch_size = 8;
  opt.lr = 5e-3;
  opt.seed = 21;
  pretrain(copies(ring, 16), model, sched, opt);
  const double after = mean_bound(ring, model, sched);
  EXPECT_LT(after, 0.7 * before) << before << " -> " << after;
}

TEST(LossCsv, Header) {
  test::TempDir dir("loss");
  write_loss_csv({{1, 2.5, 0.5, 3, 1}}, dir.path() / "l.csv");
  std::ifstream in(dir.path() / "l.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "epoch,mean_vlb,mean_recon_nll");
}

}  // namespace
}  // namespace gsaug
