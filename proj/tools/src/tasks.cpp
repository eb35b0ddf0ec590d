#include "tasks.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "gsaug/io.hpp"

namespace gsaug::cli {
namespace fs = std::filesystem;

namespace {

GraphCorpus load_dataset(const ExperimentConfig& cfg) {
  if (!cfg.is_set("downstream.dataset")) throw ConfigError("downstream.dataset is required");
  return load_tu_corpus(cfg.path("downstream.dataset"));
}

Graph single_graph(const ExperimentConfig& cfg) {
  GraphCorpus c = load_dataset(cfg);
  if (c.size() != 1) {
    throw DataError(std::string(to_string(cfg.task())) + " task needs a dataset with exactly one graph, found " +
                    std::to_string(c.size()));
  }
  return c.graphs.front();
}

std::string two_digits(int x) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", x);
  return buf;
}

}  // namespace

Split GraphTask::split(int fold) const {
  if (fold < 0 || fold >= folds) throw ConfigError("fold " + std::to_string(fold) + " out of range");
  const int val_fold = (fold + 1) % folds;
  Split s;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) {
      s.test.push_back(i);
    } else if (fold_of[i] == val_fold) {
      s.val.push_back(i);
    } else {
      s.train.push_back(i);
    }
  }
  return s;
}

std::vector<Graph> GraphTask::select(std::span<const std::size_t> ids) const {
  std::vector<Graph> out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(data.graphs[i]);
  return out;
}

GraphTask load_graph_task(const ExperimentConfig& cfg) {
  GraphTask t;
  t.data = load_dataset(cfg);
  t.folds = static_cast<int>(cfg.integer("downstream.folds"));
  bool any_class = false;
  bool any_value = false;
  for (const auto& g : t.data.graphs) {
    if (!g.graph_label()) throw DataError("graph task needs a label on every graph");
    if (const int* c = std::get_if<int>(&*g.graph_label())) {
      if (*c < 0) throw DataError("graph class ids must be >= 0");
      t.num_classes = std::max(t.num_classes, *c + 1);
      any_class = true;
    } else {
      t.value_dim = static_cast<int>(std::get<std::vector<double>>(*g.graph_label()).size());
      any_value = true;
    }
  }
  if (any_class && any_value) throw DataError("graph labels mix class ids and regression values");
  if (any_value) t.num_classes = 0;
  if (any_class && t.num_classes < 2) throw DataError("graph classification needs at least two classes");
  t.fold_of = kfold_assignment(t.data.size(), t.folds, static_cast<std::uint64_t>(cfg.integer("seed")));
  return t;
}

LinkTask load_link_task(const ExperimentConfig& cfg) {
  LinkTask t;
  t.full = single_graph(cfg);
  t.split = split_edges(t.full, cfg.real("downstream.val_fraction"), cfg.real("downstream.test_fraction"),
                        static_cast<std::size_t>(cfg.integer("downstream.negatives")),
                        static_cast<std::uint64_t>(cfg.integer("seed")));
  return t;
}

std::vector<NodeId> NodeTask::ids(std::span<const std::size_t> s) const {
  return std::vector<NodeId>(s.begin(), s.end());
}

NodeTask load_node_task(const ExperimentConfig& cfg) {
  NodeTask t;
  t.full = single_graph(cfg);
  if (!t.full.node_labels()) throw DataError("node task needs node labels");
  for (int y : *t.full.node_labels()) {
    if (y < 0) throw DataError("node task needs a label on every node");
    t.num_classes = std::max(t.num_classes, y + 1);
  }
  if (t.num_classes < 2) throw DataError("node classification needs at least two classes");
  const auto n = static_cast<std::size_t>(t.full.num_nodes());
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(static_cast<std::uint64_t>(cfg.integer("seed")) ^ 0x6e6f6465ULL);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  const auto n_train = static_cast<std::size_t>(std::llround(cfg.real("downstream.node_train_fraction") * n));
  const auto n_val = static_cast<std::size_t>(std::llround(cfg.real("downstream.node_val_fraction") * n));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) throw DataError("node split leaves an empty part");
  t.nodes.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  t.nodes.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                     perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  t.nodes.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  for (auto* part : {&t.nodes.train, &t.nodes.val, &t.nodes.test}) std::sort(part->begin(), part->end());
  return t;
}

Pretrained load_pretrained(const ExperimentConfig& cfg) {
  const fs::path path = checkpoint_path(cfg);
  if (!fs::exists(path)) throw DataError("no checkpoint at " + path.string() + " (run pretrain first)");
  Checkpoint ck = load_checkpoint(path);
  Denoiser model = ck.model();
  NoiseSchedule sched = ck.schedule();
  return {std::move(ck), std::move(model), std::move(sched)};
}

Generator make_generator(const Pretrained& p, const GuidanceHead* head, const ExperimentConfig& cfg) {
  Generator gen;
  gen.model = &p.model;
  gen.schedule = &p.schedule;
  gen.label_for = [&p](const Graph& g) { return p.ckpt.label_for(g); };
  gen.head = head;
  gen.candidates = cfg.candidates();
  return gen;
}

fs::path checkpoint_path(const ExperimentConfig& cfg) { return cfg.run_dir() / "checkpoints" / "denoiser.ckpt"; }

fs::path head_path(const ExperimentConfig& cfg, int fold) {
  return cfg.run_dir() / "heads" / ("fold_" + two_digits(fold) + ".head");
}

fs::path augmented_dir(const ExperimentConfig& cfg, int fold) {
  return cfg.run_dir() / "augmented" / ("fold_" + two_digits(fold));
}

std::optional<GuidanceHead> load_head_for(const ExperimentConfig& cfg, const Pretrained& p, int fold) {
  const GuidanceConfig g = cfg.guidance();
  if (g.ablation == Ablation::NoGuidance) return std::nullopt;
  const fs::path path = g.ablation == Ablation::CrossGuide ? cfg.path("guidance.cross_head") : head_path(cfg, fold);
  if (!fs::exists(path)) throw DataError("no guidance head at " + path.string() + " (run guide-train first)");
  GuidanceHead head = load_head(path);
  if (head.denoiser_hash != p.ckpt.params_hash()) {
    throw ConfigError("head " + path.string() + " was trained against checkpoint " + head.denoiser_hash +
                      ", this run's checkpoint is " + p.ckpt.params_hash());
  }
  if (head.input_width() != p.ckpt.config.d) throw ConfigError("head width does not match the denoiser");
  return head;
}

}  // namespace gsaug::cli
