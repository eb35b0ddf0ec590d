#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "gsaug/annotator.hpp"
#include "gsaug/io.hpp"
#include "gsaug/properties.hpp"
#include "run.hpp"
#include "tasks.hpp"

namespace gsaug::cli {
namespace fs = std::filesystem;

namespace {

constexpr const char* kCorpusPrefix = "CORPUS";

std::string fixed(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Graph structure_only(const Graph& g) {
  return g.with_features(std::nullopt).with_node_labels(std::nullopt).with_graph_label(std::nullopt);
}

/// Per-cluster seeded sample of round(fraction * size) graphs, at least one.
std::vector<std::size_t> stratified_subset(std::span<const int> labels, double fraction, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_cluster;
  for (std::size_t i = 0; i < labels.size(); ++i) by_cluster[labels[i]].push_back(i);
  Rng rng(seed ^ 0x73756273ULL);
  std::vector<std::size_t> out;
  for (auto& [k, ids] : by_cluster) {
    std::shuffle(ids.begin(), ids.end(), rng.engine());
    const auto take = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * ids.size())));
    out.insert(out.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(take, ids.size())));
  }
  std::sort(out.begin(), out.end());
  return out;
}

HeadTrainOptions head_options(const ExperimentConfig& cfg, int fold, Objective objective) {
  HeadTrainOptions o;
  o.epochs = static_cast<int>(cfg.integer("guidance.head_epochs"));
  o.lr = cfg.real("guidance.head_lr");
  o.batch_size = static_cast<int>(cfg.integer("guidance.head_batch_size"));
  o.seed = static_cast<std::uint64_t>(cfg.integer("seed")) + static_cast<std::uint64_t>(fold);
  if (level_of(objective) == HeadLevel::Edge) {
    const CandidatePolicy policy = cfg.candidates();
    o.resample_target = [objective, policy](const Graph& g, Rng& rng) {
      const auto pairs = training_pairs(g, policy, rng);
      return compute_objective_targets(g, objective, pairs);
    };
  }
  return o;
}

HeadExample example_for(const Graph& g, Objective objective, const Pretrained& p) {
  HeadExample ex{g, {}, p.ckpt.label_for(g)};
  if (level_of(objective) != HeadLevel::Edge) ex.target = compute_objective_targets(g, objective);
  return ex;
}

void train_and_save_head(const ExperimentConfig& cfg, const Pretrained& p, std::span<const HeadExample> data,
                         const HeadSpec& spec, int fold, std::ostream& tsv, std::ostream& log) {
  const GuidanceHead head = train_head(p.model, p.schedule, data, spec, head_options(cfg, fold, spec.objective));
  save_head(head, head_path(cfg, fold));
  tsv << fold << '\t' << to_string(spec.objective) << '\t' << head.epochs_trained << '\t' << fixed(head.train_metric)
      << '\t' << head.denoiser_hash << '\n';
  log << "fold " << fold << ": " << to_string(spec.objective) << " head, "
      << (spec.loss == LossKind::CrossEntropy ? "accuracy " : "mse ") << fixed(head.train_metric) << '\n';
}

std::vector<HeadExample> node_examples(const Graph& masked, std::span<const NodeId> centers, Objective objective,
                                       int hop_radius, const Pretrained& p) {
  std::vector<HeadExample> out;
  for (NodeId v : centers) out.push_back(example_for(extract_ego_subgraph(masked, v, hop_radius).graph, objective, p));
  return out;
}

std::vector<Graph> link_generation_units(const Graph& train, const AugmentPlan& plan) {
  if (plan.max_block_nodes && train.num_nodes() > *plan.max_block_nodes) {
    std::vector<Graph> blocks;
    for (auto& b : partition_graph(train, *plan.max_block_nodes).blocks) blocks.push_back(std::move(b.graph));
    return blocks;
  }
  return {train};
}

std::string default_metric(const ExperimentConfig& cfg, bool regression) {
  std::string metric = cfg.str("downstream.metric");
  const TaskKind task = cfg.task();
  if (metric.empty()) {
    metric = task == TaskKind::Link ? "mrr" : (regression ? "mae" : "accuracy");
  }
  const bool ok = (task == TaskKind::Graph && metric == (regression ? "mae" : "accuracy")) ||
                  (task == TaskKind::Link && (metric == "mrr" || metric == "hits")) ||
                  (task == TaskKind::Node && (metric == "accuracy" || metric == "homophily_group_sd"));
  if (!ok) throw ConfigError("metric '" + metric + "' does not apply to the " + std::string(to_string(task)) + " task");
  return metric;
}

/// Row-wise mean of the model's predictions over each graph and its copies.
template <typename Predict>
ag::Matrix averaged(const Predict& predict, std::span<const Graph> graphs, const std::vector<std::vector<Graph>>& copies) {
  ag::Matrix out = predict(graphs);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (copies[i].empty()) continue;
    const ag::Matrix c = predict(copies[i]);
    out.row(static_cast<Eigen::Index>(i)) =
        (out.row(static_cast<Eigen::Index>(i)) + c.colwise().sum()) / static_cast<double>(copies[i].size() + 1);
  }
  return out;
}

std::string write_report(const ExperimentConfig& cfg, const EvalReport& report, const std::string& unit,
                         std::ostream& log) {
  const fs::path dir = cfg.run_dir() / "reports";
  std::string csv = unit + ",metric,value\n";
  for (std::size_t i = 0; i < report.values.size(); ++i) {
    csv += std::to_string(i) + "," + report.metric + "," + fixed(report.values[i]) + "\n";
  }
  csv += "mean," + report.metric + "," + fixed(report.mean) + "\n";
  csv += "std," + report.metric + "," + (report.single_run() ? std::string("single-run") : fixed(report.std)) + "\n";
  csv += "fingerprint," + report.metric + "," + report.fingerprint + "\n";
  write_text(dir / "eval.csv", csv);
  const std::string hash = bytes_hash(csv);
  std::string summary = report.metric + ": " + fixed(report.mean) +
                        (report.single_run() ? " (single run)" : " +/- " + fixed(report.std)) + " over " +
                        std::to_string(report.values.size()) + " " + unit + (report.values.size() == 1 ? "" : "s") +
                        "\nconfig fingerprint: " + report.fingerprint + "\nreport hash: " + hash + "\n";
  write_text(dir / "summary.txt", summary);
  write_text(dir / "report_hash.txt", hash + "\n");
  log << summary;
  return hash;
}

}  // namespace

std::string cmd_collect(const ExperimentConfig& cfg, std::ostream& log) {
  const auto sources = cfg.paths("corpus.sources");
  if (sources.empty()) throw ConfigError("corpus.sources is required for collect");
  GraphCorpus all;
  for (const auto& src : sources) {
    GraphCorpus c = load_tu_corpus(src);
    for (std::size_t i = 0; i < c.size(); ++i) {
      all.graphs.push_back(structure_only(c.graphs[i]));
      all.manifest.push_back(c.manifest[i]);
    }
    log << "read " << c.size() << " graphs from " << src.string() << '\n';
  }
  FilterResult filtered = filter_outliers(all, cfg.real("corpus.z_max"), cfg.real("corpus.density_max"));
  if (filtered.corpus.size() == 0) throw DataError("no graphs left after outlier filtering");

  GraphCorpus corpus;
  const auto max_graphs = static_cast<std::size_t>(cfg.integer("corpus.max_graphs"));
  std::vector<std::size_t> keep(filtered.corpus.size());
  std::iota(keep.begin(), keep.end(), 0);
  if (keep.size() > max_graphs) {
    Rng rng(static_cast<std::uint64_t>(cfg.integer("seed")) ^ 0x636f6c6cULL);
    std::shuffle(keep.begin(), keep.end(), rng.engine());
    keep.resize(max_graphs);
    std::sort(keep.begin(), keep.end());
  }
  for (auto i : keep) {
    corpus.graphs.push_back(filtered.corpus.graphs[i]);
    corpus.manifest.push_back(filtered.corpus.manifest[i]);
  }

  std::vector<PropertyVector> props;
  for (const auto& g : corpus.graphs) props.push_back(compute_properties(g));
  const NormalizedProperties normalized = normalize_properties(props);
  std::vector<int> ks;
  for (int k : cfg.ints("corpus.cluster_ks")) {
    if (k < static_cast<int>(corpus.size())) ks.push_back(k);
  }
  const fs::path dir = cfg.run_dir() / "corpus";
  fs::create_directories(dir);
  if (!ks.empty()) {
    const ClusterModel model =
        fit_clusters(normalized.values, ks, static_cast<std::uint64_t>(cfg.integer("seed")), normalized.stats);
    corpus.cluster_labels = model.train_labels;
    write_text(dir / "clusters.json", cluster_model_to_json(model) + "\n");
    log << "clusters: K=" << model.num_clusters << " silhouette " << fixed(model.silhouette) << '\n';
  } else {
    fs::remove(dir / "clusters.json");
    log << "clusters: too few graphs for any candidate K, all graphs share label 0\n";
  }

  write_tu_corpus(corpus, dir, kCorpusPrefix);
  write_manifest(corpus, dir / "manifest.jsonl");
  std::ofstream table(dir / "properties.tsv");
  write_property_table(table, props);
  std::string rejected = "index\tsource\treason\n";
  for (const auto& r : filtered.rejected) {
    rejected += std::to_string(r.index) + "\t" + all.manifest[r.index].source + "\t" + r.reason + "\n";
  }
  write_text(dir / "rejected.tsv", rejected);
  const std::string hash = file_hash(dir / "manifest.jsonl");
  write_text(dir / "manifest_hash.txt", hash + "\n");
  log << "kept " << corpus.size() << " of " << all.size() << " graphs (" << filtered.rejected.size()
      << " rejected), manifest hash " << hash << '\n';
  return hash;
}

std::string cmd_pretrain(const ExperimentConfig& cfg, std::ostream& log) {
  const fs::path dir = cfg.run_dir() / "corpus";
  if (!fs::exists(dir / "manifest.jsonl")) throw DataError("no collected corpus in " + dir.string() + " (run collect)");
  GraphCorpus corpus = load_tu_corpus(dir, kCorpusPrefix);
  const auto records = read_manifest(dir / "manifest.jsonl");
  if (records.size() != corpus.size()) throw DataError("manifest and corpus in " + dir.string() + " disagree");
  std::optional<ClusterModel> clusters;
  if (fs::exists(dir / "clusters.json")) {
    clusters = cluster_model_from_json(read_text(dir / "clusters.json"));
    std::vector<int> labels;
    for (const auto& r : records) {
      if (!r.cluster) throw DataError("manifest record " + std::to_string(r.id) + " has no cluster");
      labels.push_back(*r.cluster);
    }
    corpus.cluster_labels = std::move(labels);
  }

  const double fraction = cfg.real("corpus.subset_fraction");
  if (fraction < 1.0) {
    const std::vector<int> strata = corpus.cluster_labels.value_or(std::vector<int>(corpus.size(), 0));
    const auto subset = stratified_subset(strata, fraction, static_cast<std::uint64_t>(cfg.integer("seed")));
    GraphCorpus sub;
    if (corpus.cluster_labels) sub.cluster_labels.emplace();
    for (auto i : subset) {
      sub.graphs.push_back(corpus.graphs[i]);
      sub.manifest.push_back(corpus.manifest[i]);
      if (sub.cluster_labels) sub.cluster_labels->push_back((*corpus.cluster_labels)[i]);
    }
    log << "subset " << fraction << ": " << sub.size() << " of " << corpus.size() << " graphs, stratified by cluster\n";
    corpus = std::move(sub);
  }

  const bool self_cond = cfg.flag("denoiser.self_cond") && clusters.has_value();
  DenoiserConfig dcfg = cfg.denoiser();
  dcfg.num_labels = self_cond ? clusters->num_clusters : 1;
  const NoiseSchedule sched = cfg.schedule();
  PretrainOptions opt;
  opt.epochs = static_cast<int>(cfg.integer("denoiser.epochs"));
  opt.lr = cfg.real("denoiser.lr");
  opt.batch_size = static_cast<int>(cfg.integer("denoiser.batch_size"));
  opt.self_cond = self_cond;
  opt.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  opt.hybrid_weight = cfg.real("denoiser.hybrid_weight");
  opt.candidates = cfg.candidates();

  const fs::path ckpt_dir = cfg.run_dir() / "checkpoints";
  fs::create_directories(ckpt_dir);
  const int every = static_cast<int>(cfg.integer("denoiser.checkpoint_every"));
  std::vector<LossRecord> history;
  const std::string chash = corpus_hash(corpus);
  opt.on_epoch = [&](int epoch, const Denoiser& model, const LossRecord& record) {
    history.push_back(record);
    log << "epoch " << epoch << " vlb " << fixed(record.mean_vlb) << " recon " << fixed(record.mean_recon_nll) << '\n';
    if (every > 0 && (epoch % every == 0 || epoch == opt.epochs)) {
      Checkpoint ck;
      ck.config = model.config();
      ck.horizon = sched.horizon();
      ck.schedule_kind = sched.kind();
      ck.pi = sched.pi();
      ck.clusters = clusters;
      ck.meta = {epoch, chash, opt.seed, self_cond, opt.hybrid_weight, history};
      ck.params = model.params().flatten();
      char name[64];
      std::snprintf(name, sizeof name, "denoiser_epoch_%05d.ckpt", epoch);
      save_checkpoint(ck, ckpt_dir / name);
    }
  };
  Checkpoint ck = pretrain(corpus, dcfg, sched, opt, clusters);
  save_checkpoint(ck, checkpoint_path(cfg));
  fs::create_directories(cfg.run_dir() / "logs");
  write_loss_csv(ck.meta.history, cfg.run_dir() / "logs" / "pretrain_loss.csv");
  log << "checkpoint " << checkpoint_path(cfg).string() << " params " << ck.params_hash() << '\n';
  return ck.params_hash();
}

void cmd_guide_train(const ExperimentConfig& cfg, std::ostream& log) {
  const Pretrained p = load_pretrained(cfg);
  const AugmentPlan plan = cfg.augment_plan();
  std::ostringstream tsv;
  tsv << "fold\tobjective\tepochs\ttrain_metric\tdenoiser_hash\n";
  fs::create_directories(cfg.run_dir() / "heads");
  switch (plan.task) {
    case TaskKind::Graph: {
      const GraphTask task = load_graph_task(cfg);
      const HeadSpec spec = cfg.head_spec(task.num_classes, task.value_dim);
      for (int f = 0; f < task.folds; ++f) {
        const Split split = task.split(f);
        const LabelGuard guard("guide-train", split.train);
        std::vector<HeadExample> data;
        for (auto id : split.train) data.push_back(example_for(guard.graph(task.data.graphs, id), spec.objective, p));
        train_and_save_head(cfg, p, data, spec, f, tsv, log);
      }
      break;
    }
    case TaskKind::Link: {
      const LinkTask task = load_link_task(cfg);
      const HeadSpec spec = cfg.head_spec(0);
      if (spec.objective == Objective::NodeLabel || spec.objective == Objective::GraphLabel) {
        throw ConfigError("link tasks use node_degree, common_neighbors or link_reconstruction guidance");
      }
      std::vector<HeadExample> data;
      for (const auto& unit : link_generation_units(task.split.train, plan)) {
        data.push_back(example_for(unit, spec.objective, p));
      }
      train_and_save_head(cfg, p, data, spec, 0, tsv, log);
      break;
    }
    case TaskKind::Node: {
      const NodeTask task = load_node_task(cfg);
      const HeadSpec spec = cfg.head_spec(task.num_classes);
      const LabelGuard guard("guide-train", task.nodes.train);
      const Graph masked = guard.mask_node_labels(task.full);
      const auto data = node_examples(masked, task.ids(task.nodes.train), spec.objective, plan.hop_radius, p);
      train_and_save_head(cfg, p, data, spec, 0, tsv, log);
      break;
    }
  }
  write_text(cfg.run_dir() / "logs" / "guide_train.tsv", tsv.str());
}

void cmd_augment(const ExperimentConfig& cfg, std::ostream& log) {
  const Pretrained p = load_pretrained(cfg);
  const AugmentPlan plan = cfg.augment_plan();
  const std::string ablation(to_string(plan.guidance.ablation));
  switch (plan.task) {
    case TaskKind::Graph: {
      const GraphTask task = load_graph_task(cfg);
      for (int f = 0; f < task.folds; ++f) {
        const auto head = load_head_for(cfg, p, f);
        const Generator gen = make_generator(p, head ? &*head : nullptr, cfg);
        const Split split = task.split(f);
        const LabelGuard guard("augment", split.train);
        std::vector<Graph> train;
        for (auto id : split.train) train.push_back(guard.graph(task.data.graphs, id));
        AugmentedGraphs aug = augment_graph_classification(train, gen, plan);
        for (auto& r : aug.provenance) {
          r.fold = f;
          r.source_id = split.train[r.source_id];
        }
        GraphCorpus out;
        out.graphs = std::move(aug.graphs);
        out.manifest.assign(out.graphs.size(), {"augment", ablation});
        export_augmented(out, aug.provenance, augmented_dir(cfg, f), kAugPrefix);
        log << "fold " << f << ": " << train.size() << " training graphs -> " << out.size() << '\n';
      }
      break;
    }
    case TaskKind::Link: {
      const LinkTask task = load_link_task(cfg);
      const auto head = load_head_for(cfg, p, 0);
      const Generator gen = make_generator(p, head ? &*head : nullptr, cfg);
      const Graph augmented = augment_link_prediction(task.split.train, gen, plan);
      GraphCorpus out;
      out.graphs.push_back(augmented);
      out.manifest.push_back({"augment", ablation});
      const SyntheticRecord rec{0, 0, synthetic_seed(plan.seed, 0, 0), -1, ablation};
      export_augmented(out, std::span(&rec, 1), augmented_dir(cfg, 0), kAugPrefix);
      log << "link: " << task.split.train.num_edges() << " training edges -> " << augmented.num_edges() << " edges\n";
      break;
    }
    case TaskKind::Node: {
      const NodeTask task = load_node_task(cfg);
      const auto head = load_head_for(cfg, p, 0);
      const Generator gen = make_generator(p, head ? &*head : nullptr, cfg);
      const LabelGuard guard("augment", task.nodes.train);
      const Graph masked = guard.mask_node_labels(task.full);
      AugmentedEgos aug = augment_node_classification(masked, task.ids(task.nodes.train), gen, plan);
      GraphCorpus out;
      out.graphs = std::move(aug.graphs);
      out.manifest.assign(out.graphs.size(), {"augment", ablation});
      export_augmented(out, aug.provenance, augmented_dir(cfg, 0), kAugPrefix);
      std::string centers;
      for (NodeId c : aug.centers) centers += std::to_string(c) + "\n";
      write_text(augmented_dir(cfg, 0) / (std::string(kAugPrefix) + "_centers.txt"), centers);
      log << "node: " << task.nodes.train.size() << " training egos -> " << out.size() << '\n';
      break;
    }
  }
}

std::string cmd_eval(const ExperimentConfig& cfg, std::ostream& log) {
  const AugmentPlan plan = cfg.augment_plan();
  DownstreamSpec spec = cfg.downstream();
  const bool use_aug = cfg.flag("downstream.use_augmented");
  const auto base_seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  std::optional<Pretrained> pre;
  if (plan.augment_val_test) {
    if (plan.guidance.ablation == Ablation::NoGuidance) {
      throw ConfigError("augment.augment_val_test needs a guidance head (ablation is no_guidance)");
    }
    pre.emplace(load_pretrained(cfg));
  }
  auto load_aug = [&](int fold) {
    const fs::path dir = augmented_dir(cfg, fold);
    if (!fs::exists(dir)) throw DataError("no augmented data in " + dir.string() + " (run augment)");
    return load_tu_corpus(dir, kAugPrefix);
  };
  std::vector<double> values;
  std::string metric;
  std::string unit = "run";

  switch (plan.task) {
    case TaskKind::Graph: {
      const GraphTask task = load_graph_task(cfg);
      const bool regression = task.num_classes == 0;
      metric = default_metric(cfg, regression);
      unit = "fold";
      for (int f = 0; f < task.folds; ++f) {
        const Split split = task.split(f);
        GraphTaskData train{use_aug ? load_aug(f).graphs : task.select(split.train), task.num_classes, task.value_dim};
        const auto val = task.select(split.val);
        const auto test = task.select(split.test);
        DownstreamSpec s = spec;
        s.seed = base_seed + static_cast<std::uint64_t>(f);
        const GraphModel model = train_graph_model(train, val, s);
        auto predict = [&](std::span<const Graph> gs) { return model.predict(gs); };
        ag::Matrix pred;
        if (pre) {
          const auto head = load_head_for(cfg, *pre, f);
          const Generator gen = make_generator(*pre, head ? &*head : nullptr, cfg);
          pred = averaged(predict, test, augment_for_inference(test, gen, plan, 1000 + static_cast<std::uint64_t>(f)));
        } else {
          pred = model.predict(test);
        }
        if (regression) {
          ag::Matrix truth(static_cast<Eigen::Index>(test.size()), task.value_dim);
          for (std::size_t i = 0; i < test.size(); ++i) {
            const auto& y = std::get<std::vector<double>>(*test[i].graph_label());
            for (int c = 0; c < task.value_dim; ++c) truth(static_cast<Eigen::Index>(i), c) = y[static_cast<std::size_t>(c)];
          }
          values.push_back(mean_absolute_error(pred, truth));
        } else {
          std::vector<int> truth;
          for (const auto& g : test) truth.push_back(std::get<int>(*g.graph_label()));
          values.push_back(accuracy(argmax_rows(pred), truth));
        }
        log << "fold " << f << ": " << metric << " " << fixed(values.back()) << '\n';
      }
      break;
    }
    case TaskKind::Link: {
      const LinkTask task = load_link_task(cfg);
      metric = default_metric(cfg, false);
      const int k = static_cast<int>(cfg.integer("downstream.hits_k"));
      const Graph structure = use_aug ? load_aug(0).graphs.front() : task.split.train;
      if (structure.num_nodes() != task.full.num_nodes()) throw DataError("augmented graph has a different node count");
      for (int r = 0; r < static_cast<int>(cfg.integer("downstream.runs")); ++r) {
        DownstreamSpec s = spec;
        s.seed = base_seed + static_cast<std::uint64_t>(r);
        const LinkModel model = train_link_model(structure, task.split.train.edges(), task.split, s, k);
        const auto pos = model.score_pairs(structure, task.split.test);
        const auto neg = model.score_pairs(structure, task.split.negatives);
        const RankingMetrics m = ranking_metrics(pos, neg, k);
        values.push_back(metric == "hits" ? m.hits : m.mrr);
        log << "run " << r << ": " << metric << " " << fixed(values.back()) << '\n';
      }
      if (metric == "hits") metric = "hits@" + std::to_string(k);
      break;
    }
    case TaskKind::Node: {
      const NodeTask task = load_node_task(cfg);
      metric = default_metric(cfg, false);
      const LabelGuard guard("eval", task.nodes.train);
      const Graph masked = guard.mask_node_labels(task.full);
      std::vector<Graph> train;
      if (use_aug) {
        train = load_aug(0).graphs;
      } else {
        for (auto v : task.nodes.train) train.push_back(extract_ego_subgraph(masked, static_cast<NodeId>(v), plan.hop_radius).graph);
      }
      auto egos_of = [&](std::span<const std::size_t> ids) {
        std::vector<Graph> out;
        for (auto v : ids) out.push_back(extract_ego_subgraph(task.full, static_cast<NodeId>(v), plan.hop_radius).graph);
        return out;
      };
      const auto val = egos_of(task.nodes.val);
      const auto test = egos_of(task.nodes.test);
      std::optional<GuidanceHead> head;
      if (pre) head = load_head_for(cfg, *pre, 0);
      for (int r = 0; r < static_cast<int>(cfg.integer("downstream.runs")); ++r) {
        DownstreamSpec s = spec;
        s.seed = base_seed + static_cast<std::uint64_t>(r);
        EgoModel model = train_ego_model(train, val, task.num_classes, s);
        auto predict = [&](std::span<const Graph> gs) { return model.predict(gs); };
        ag::Matrix pred;
        if (pre) {
          // Copies are generated from label-free egos; only the head's own prediction steers them.
          std::vector<Graph> unlabeled;
          for (const auto& g : test) unlabeled.push_back(g.with_node_labels(std::nullopt));
          const Generator gen = make_generator(*pre, head ? &*head : nullptr, cfg);
          auto copies = augment_for_inference(unlabeled, gen, plan, 1000 + static_cast<std::uint64_t>(r));
          pred = averaged(predict, test, copies);
        } else {
          pred = model.predict(test);
        }
        const auto classes = argmax_rows(pred);
        if (metric == "accuracy") {
          std::vector<int> truth;
          for (auto v : task.nodes.test) truth.push_back((*task.full.node_labels())[v]);
          values.push_back(accuracy(classes, truth));
        } else {
          std::vector<int> all(static_cast<std::size_t>(task.full.num_nodes()), -1);
          for (std::size_t i = 0; i < task.nodes.test.size(); ++i) all[task.nodes.test[i]] = classes[i];
          values.push_back(homophily_group_sd(task.full, all, task.ids(task.nodes.test)));
        }
        log << "run " << r << ": " << metric << " " << fixed(values.back()) << '\n';
      }
      break;
    }
  }
  return write_report(cfg, summarize(metric, std::move(values), cfg.fingerprint()), unit, log);
}

}  // namespace gsaug::cli
