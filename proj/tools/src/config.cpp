#include "config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gsaug/error.hpp"
#include "gsaug/io.hpp"

namespace gsaug::cli {
namespace fs = std::filesystem;

namespace {

constexpr KeySpec kKeys[] = {
    {"run.name", ValueKind::String, "", "run directory name under run.root (required)"},
    {"run.root", ValueKind::Path, "runs", "parent of all run directories"},
    {"seed", ValueKind::Integer, "0", "master seed"},

    {"corpus.sources", ValueKind::PathList, "", "comma-separated TU dataset directories for pre-training"},
    {"corpus.z_max", ValueKind::Real, "3", "robust z-score bound of the outlier filter (inf disables)"},
    {"corpus.density_max", ValueKind::Real, "0.9", "graphs denser than this are dropped"},
    {"corpus.max_graphs", ValueKind::Integer, "1000", "seeded sample size without replacement after filtering"},
    {"corpus.cluster_ks", ValueKind::IntList, "2,3,4,5,6,7,8,9,10", "candidate cluster counts"},
    {"corpus.subset_fraction", ValueKind::Real, "1", "stratified share of each cluster used by pretrain"},

    {"schedule.kind", ValueKind::String, "cosine", "cosine | linear"},
    {"schedule.timesteps", ValueKind::Integer, "128", "diffusion horizon T"},
    {"schedule.pi", ValueKind::Real, "0", "stationary edge probability (0 = absorbing)"},

    {"denoiser.d", ValueKind::Integer, "128", "hidden width"},
    {"denoiser.layers", ValueKind::Integer, "4", "transformer layers"},
    {"denoiser.heads", ValueKind::Integer, "4", "attention heads"},
    {"denoiser.dropout", ValueKind::Real, "0.1", "dropout during pre-training"},
    {"denoiser.max_degree_clip", ValueKind::Integer, "512", "degree input clip and scale"},
    {"denoiser.epochs", ValueKind::Integer, "100", "pre-training epochs"},
    {"denoiser.lr", ValueKind::Real, "0.001", "Adam learning rate"},
    {"denoiser.batch_size", ValueKind::Integer, "32", "graphs per step"},
    {"denoiser.self_cond", ValueKind::Flag, "true", "condition on cluster labels"},
    {"denoiser.hybrid_weight", ValueKind::Real, "0", "weight of the auxiliary A^0 cross-entropy"},
    {"denoiser.checkpoint_every", ValueKind::Integer, "0", "also save every N epochs (0 = final only)"},
    {"denoiser.negative_ratio", ValueKind::Real, "4", "sampled non-edges per edge for large graphs"},
    {"denoiser.full_pair_limit", ValueKind::Integer, "64", "graphs up to this size use every pair"},

    {"guidance.objective", ValueKind::String, "", "head objective (empty = task default)"},
    {"guidance.gamma", ValueKind::Real, "0.1", "Langevin step size"},
    {"guidance.lambda", ValueKind::Real, "0.01", "KL regularization strength"},
    {"guidance.tau", ValueKind::Real, "0", "Langevin temperature"},
    {"guidance.num_updates", ValueKind::Integer, "5", "Langevin updates per sampling step"},
    {"guidance.threshold_q", ValueKind::Real, "none", "keep pairs above q instead of sampling (none = sample)"},
    {"guidance.ablation", ValueKind::String, "full", "full | no_guidance | cross_guide"},
    {"guidance.cross_source", ValueKind::String, "", "dataset name of the borrowed head (cross_guide)"},
    {"guidance.cross_head", ValueKind::Path, "", "head file used by cross_guide"},
    {"guidance.head_epochs", ValueKind::Integer, "50", "head training epochs"},
    {"guidance.head_lr", ValueKind::Real, "0.001", "head learning rate"},
    {"guidance.head_batch_size", ValueKind::Integer, "16", "head batch size"},

    {"augment.task", ValueKind::String, "graph", "graph | link | node"},
    {"augment.repeats", ValueKind::Integer, "1", "synthetic copies per source"},
    {"augment.augment_val_test", ValueKind::Flag, "false", "average predictions over guided copies at eval"},
    {"augment.max_block_nodes", ValueKind::Integer, "0", "link task: partition above this size (0 = never)"},
    {"augment.hop_radius", ValueKind::Integer, "2", "node task: ego radius"},

    {"downstream.dataset", ValueKind::Path, "", "TU dataset directory of the downstream task"},
    {"downstream.use_augmented", ValueKind::Flag, "true", "train on the augment output (false = baseline)"},
    {"downstream.model", ValueKind::String, "", "gin | gcn | gcn_link (empty = task default)"},
    {"downstream.hidden", ValueKind::Integer, "64", "hidden width"},
    {"downstream.layers", ValueKind::Integer, "5", "GIN layers"},
    {"downstream.virtual_node", ValueKind::Flag, "false", "GIN virtual node"},
    {"downstream.epochs", ValueKind::Integer, "100", "training epochs"},
    {"downstream.lr", ValueKind::Real, "0.01", "Adam learning rate"},
    {"downstream.dropout", ValueKind::Real, "0", "dropout"},
    {"downstream.patience", ValueKind::Integer, "50", "early-stopping patience in epochs"},
    {"downstream.batch_size", ValueKind::Integer, "32", "graphs per step"},
    {"downstream.folds", ValueKind::Integer, "10", "graph task: cross-validation folds"},
    {"downstream.runs", ValueKind::Integer, "10", "link and node tasks: seeded runs"},
    {"downstream.metric", ValueKind::String, "", "accuracy | mae | mrr | hits | homophily_group_sd"},
    {"downstream.hits_k", ValueKind::Integer, "10", "K of Hits@K"},
    {"downstream.negatives", ValueKind::Integer, "1000", "shared negative pool size for ranking"},
    {"downstream.val_fraction", ValueKind::Real, "0.05", "link task: validation edge share"},
    {"downstream.test_fraction", ValueKind::Real, "0.1", "link task: test edge share"},
    {"downstream.node_train_fraction", ValueKind::Real, "0.6", "node task: training node share"},
    {"downstream.node_val_fraction", ValueKind::Real, "0.2", "node task: validation node share"},
};

const KeySpec* find_key(std::string_view key) {
  for (const auto& k : kKeys) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in{std::string(s)};
  while (std::getline(in, cur, ',')) {
    auto t = trim(cur);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view what) {
  throw ConfigError("config key '" + std::string(key) + "': '" + std::string(value) + "' is not " + std::string(what));
}

long long parse_int(std::string_view key, std::string_view v) {
  long long x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return x;
}

double parse_real(std::string_view key, std::string_view v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  const std::string s(v);
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || std::isnan(x)) bad_value(key, v, "a number");
  return x;
}

bool parse_flag(std::string_view key, std::string_view v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  bad_value(key, v, "a flag (true/false)");
}

std::string resolve(std::string_view v, const fs::path& base) {
  if (v.empty()) return {};
  fs::path p(v);
  if (p.is_relative()) p = base / p;
  return fs::weakly_canonical(p).lexically_normal().string();
}

}  // namespace

std::span<const KeySpec> known_keys() { return kKeys; }

ExperimentConfig ExperimentConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), fs::absolute(path).parent_path());
}

ExperimentConfig ExperimentConfig::from_text(std::string_view text, const fs::path& base_dir) {
  ExperimentConfig cfg;
  for (const auto& k : kKeys) cfg.assign(std::string(k.key), std::string(k.default_value), base_dir, true);
  cfg.explicit_.clear();
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
    }
    auto key = trim(std::string_view(t).substr(0, eq));
    if (cfg.explicit_.count(key)) {
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    cfg.assign(std::move(key), trim(std::string_view(t).substr(eq + 1)), base_dir, true);
  }
  return cfg;
}

void ExperimentConfig::set(std::string_view assignment, const fs::path& base_dir) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' needs key=value");
  assign(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), base_dir, true);
}

void ExperimentConfig::assign(std::string key, std::string value, const fs::path& base_dir, bool allow_replace) {
  const KeySpec* spec = find_key(key);
  if (!spec) throw ConfigError("unknown config key '" + key + "'");
  if (!allow_replace && values_.count(key)) throw ConfigError("duplicate key '" + key + "'");
  if (spec->kind == ValueKind::Path) {
    value = resolve(value, base_dir);
  } else if (spec->kind == ValueKind::PathList) {
    std::string joined;
    for (const auto& item : split_list(value)) joined += (joined.empty() ? "" : ",") + resolve(item, base_dir);
    value = joined;
  }
  explicit_[key] = true;
  values_[std::move(key)] = std::move(value);
}

const std::string& ExperimentConfig::raw(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

bool ExperimentConfig::is_set(std::string_view key) const { return !raw(key).empty(); }
std::string ExperimentConfig::str(std::string_view key) const { return raw(key); }
long long ExperimentConfig::integer(std::string_view key) const { return parse_int(key, raw(key)); }
double ExperimentConfig::real(std::string_view key) const { return parse_real(key, raw(key)); }
bool ExperimentConfig::flag(std::string_view key) const { return parse_flag(key, raw(key)); }
fs::path ExperimentConfig::path(std::string_view key) const { return raw(key); }

std::vector<fs::path> ExperimentConfig::paths(std::string_view key) const {
  std::vector<fs::path> out;
  for (const auto& s : split_list(raw(key))) out.emplace_back(s);
  return out;
}

std::vector<int> ExperimentConfig::ints(std::string_view key) const {
  std::vector<int> out;
  for (const auto& s : split_list(raw(key))) out.push_back(static_cast<int>(parse_int(key, s)));
  return out;
}

void ExperimentConfig::validate() const {
  for (const auto& k : kKeys) {
    const auto& v = raw(k.key);
    switch (k.kind) {
      case ValueKind::Integer: parse_int(k.key, v); break;
      case ValueKind::Real:
        if (!(k.key == "guidance.threshold_q" && v == "none")) parse_real(k.key, v);
        break;
      case ValueKind::Flag: parse_flag(k.key, v); break;
      case ValueKind::IntList: ints(k.key); break;
      default: break;
    }
  }
  if (raw("run.name").empty()) throw ConfigError("run.name is required");
  if (raw("run.name").find('/') != std::string::npos || raw("run.name") == "..") {
    throw ConfigError("run.name must be a plain directory name");
  }
  static constexpr double fractions[] = {0.25, 0.5, 0.75, 1.0};
  if (std::find(std::begin(fractions), std::end(fractions), real("corpus.subset_fraction")) == std::end(fractions)) {
    throw ConfigError("corpus.subset_fraction must be one of 0.25, 0.5, 0.75, 1");
  }
  if (!(real("corpus.z_max") > 0)) throw ConfigError("corpus.z_max must be > 0");
  const double dmax = real("corpus.density_max");
  if (!(dmax > 0 && dmax <= 1)) throw ConfigError("corpus.density_max must be in (0, 1]");
  if (integer("corpus.max_graphs") < 1) throw ConfigError("corpus.max_graphs must be >= 1");
  for (int k : ints("corpus.cluster_ks")) {
    if (k < 2) throw ConfigError("corpus.cluster_ks entries must be >= 2");
  }
  if (integer("denoiser.epochs") < 0) throw ConfigError("denoiser.epochs must be >= 0");
  if (integer("denoiser.batch_size") < 1) throw ConfigError("denoiser.batch_size must be >= 1");
  if (!(real("denoiser.lr") > 0)) throw ConfigError("denoiser.lr must be > 0");
  if (integer("denoiser.checkpoint_every") < 0) throw ConfigError("denoiser.checkpoint_every must be >= 0");
  if (!(real("denoiser.hybrid_weight") >= 0)) throw ConfigError("denoiser.hybrid_weight must be >= 0");
  if (integer("guidance.head_epochs") < 0 || integer("guidance.head_batch_size") < 1 || !(real("guidance.head_lr") > 0)) {
    throw ConfigError("guidance head epochs, batch size and lr must be positive");
  }
  if (integer("downstream.folds") < 2) throw ConfigError("downstream.folds must be >= 2");
  if (integer("downstream.runs") < 1) throw ConfigError("downstream.runs must be >= 1");
  if (integer("downstream.hits_k") < 1) throw ConfigError("downstream.hits_k must be >= 1");
  if (integer("downstream.negatives") < 1) throw ConfigError("downstream.negatives must be >= 1");
  const double vf = real("downstream.val_fraction");
  const double tf = real("downstream.test_fraction");
  if (!(vf > 0 && tf > 0 && vf + tf < 1)) throw ConfigError("link val/test fractions must be positive and sum below 1");
  const double ntf = real("downstream.node_train_fraction");
  const double nvf = real("downstream.node_val_fraction");
  if (!(ntf > 0 && nvf > 0 && ntf + nvf < 1)) {
    throw ConfigError("node train/val fractions must be positive and sum below 1");
  }
  const std::string metric = raw("downstream.metric");
  if (!metric.empty() && metric != "accuracy" && metric != "mae" && metric != "mrr" && metric != "hits" &&
      metric != "homophily_group_sd") {
    throw ConfigError("unknown downstream.metric '" + metric + "'");
  }
  if (!metric.empty()) {
    const TaskKind t = task();
    const bool fits = (t == TaskKind::Graph && (metric == "accuracy" || metric == "mae")) ||
                      (t == TaskKind::Link && (metric == "mrr" || metric == "hits")) ||
                      (t == TaskKind::Node && (metric == "accuracy" || metric == "homophily_group_sd"));
    if (!fits) throw ConfigError("metric '" + metric + "' does not apply to the " + std::string(to_string(t)) + " task");
  }
  if (!raw("guidance.objective").empty()) parse_objective(raw("guidance.objective"));
  schedule();
  denoiser();
  guidance();
  augment_plan();
  downstream();
  if (guidance().ablation == Ablation::CrossGuide && raw("guidance.cross_head").empty()) {
    throw ConfigError("cross_guide ablation needs guidance.cross_head");
  }
}

std::string ExperimentConfig::echo() const {
  std::string out;
  for (const auto& k : kKeys) out += std::string(k.key) + " = " + raw(k.key) + "\n";
  return out;
}

std::string ExperimentConfig::fingerprint() const {
  std::string text;
  for (const auto& k : kKeys) {
    if (k.key.substr(0, 4) == "run.") continue;
    text += std::string(k.key) + " = " + raw(k.key) + "\n";
  }
  return bytes_hash(text);
}

fs::path ExperimentConfig::run_dir() const { return path("run.root") / raw("run.name"); }

NoiseSchedule ExperimentConfig::schedule() const {
  const long long T = integer("schedule.timesteps");
  if (T < 1 || T > 100000) throw ConfigError("schedule.timesteps must be in [1, 100000]");
  return build_schedule(static_cast<int>(T), raw("schedule.kind"), real("schedule.pi"));
}

DenoiserConfig ExperimentConfig::denoiser() const {
  DenoiserConfig c;
  c.d = static_cast<int>(integer("denoiser.d"));
  c.layers = static_cast<int>(integer("denoiser.layers"));
  c.heads = static_cast<int>(integer("denoiser.heads"));
  c.dropout = real("denoiser.dropout");
  c.max_degree_clip = static_cast<int>(integer("denoiser.max_degree_clip"));
  c.validate();
  return c;
}

CandidatePolicy ExperimentConfig::candidates() const {
  CandidatePolicy p;
  p.negative_ratio = real("denoiser.negative_ratio");
  p.full_pair_limit = static_cast<NodeId>(integer("denoiser.full_pair_limit"));
  if (!(p.negative_ratio > 0)) throw ConfigError("denoiser.negative_ratio must be > 0");
  return p;
}

GuidanceConfig ExperimentConfig::guidance() const {
  GuidanceConfig g;
  g.gamma = real("guidance.gamma");
  g.lambda = real("guidance.lambda");
  g.tau = real("guidance.tau");
  g.num_updates = static_cast<int>(integer("guidance.num_updates"));
  if (raw("guidance.threshold_q") != "none") g.threshold_q = real("guidance.threshold_q");
  g.ablation = parse_ablation(raw("guidance.ablation"));
  g.cross_source = raw("guidance.cross_source");
  g.validate();
  return g;
}

TaskKind ExperimentConfig::task() const { return parse_task(raw("augment.task")); }

HeadSpec ExperimentConfig::head_spec(int num_classes, int value_dim) const {
  HeadSpec s;
  const TaskKind t = task();
  if (!raw("guidance.objective").empty()) {
    s.objective = parse_objective(raw("guidance.objective"));
  } else {
    s.objective = t == TaskKind::Graph ? Objective::GraphLabel
                                       : (t == TaskKind::Node ? Objective::NodeLabel : Objective::NodeDegree);
  }
  const bool class_objective = s.objective == Objective::GraphLabel || s.objective == Objective::NodeLabel;
  if (class_objective && num_classes >= 2) {
    s.loss = LossKind::CrossEntropy;
    s.r = num_classes;
  } else {
    s.loss = LossKind::MeanSquaredError;
    s.r = s.objective == Objective::GraphProperties ? static_cast<int>(kNumProperties)
                                                    : (class_objective ? value_dim : 1);
  }
  return s;
}

AugmentPlan ExperimentConfig::augment_plan() const {
  AugmentPlan p;
  p.task = task();
  p.repeats = static_cast<int>(integer("augment.repeats"));
  p.augment_val_test = flag("augment.augment_val_test");
  p.guidance = guidance();
  const long long mb = integer("augment.max_block_nodes");
  if (mb < 0) throw ConfigError("augment.max_block_nodes must be >= 0");
  if (mb > 0) p.max_block_nodes = static_cast<NodeId>(mb);
  p.hop_radius = static_cast<int>(integer("augment.hop_radius"));
  p.seed = static_cast<std::uint64_t>(integer("seed"));
  p.validate();
  return p;
}

DownstreamSpec ExperimentConfig::downstream() const {
  DownstreamSpec s;
  const TaskKind t = task();
  s.model = raw("downstream.model");
  if (s.model.empty()) s.model = t == TaskKind::Graph ? "gin" : (t == TaskKind::Link ? "gcn_link" : "gcn");
  const bool ok = (t == TaskKind::Graph && s.model == "gin") || (t == TaskKind::Link && s.model == "gcn_link") ||
                  (t == TaskKind::Node && s.model == "gcn");
  if (!ok) {
    throw ConfigError("downstream.model '" + s.model + "' does not fit the " + std::string(to_string(t)) + " task");
  }
  s.hidden = static_cast<int>(integer("downstream.hidden"));
  s.layers = static_cast<int>(integer("downstream.layers"));
  s.virtual_node = flag("downstream.virtual_node");
  s.epochs = static_cast<int>(integer("downstream.epochs"));
  s.lr = real("downstream.lr");
  s.dropout = real("downstream.dropout");
  s.patience = static_cast<int>(integer("downstream.patience"));
  s.batch_size = static_cast<int>(integer("downstream.batch_size"));
  s.seed = static_cast<std::uint64_t>(integer("seed"));
  s.validate();
  return s;
}

}  // namespace gsaug::cli
