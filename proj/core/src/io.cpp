#include "gsaug/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gsaug/error.hpp"

namespace gsaug {
namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.filename().string() + ":" + std::to_string(line);
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Splits on commas and whitespace.
std::vector<std::string> tokens(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool parse_int(const std::string& s, std::int64_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

/// Non-empty lines of a file, with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string>> data_lines(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::vector<std::pair<std::size_t, std::string>> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    out.emplace_back(no, std::move(t));
  }
  return out;
}

}  // namespace

EdgeListLoad load_edge_list(const std::filesystem::path& path, std::optional<NodeId> n_hint) {
  std::vector<NodePair> pairs;
  std::int64_t max_index = -1;
  for (const auto& [no, line] : data_lines(path)) {
    auto tok = tokens(line);
    std::int64_t u = 0;
    std::int64_t v = 0;
    if (tok.size() != 2 || !parse_int(tok[0], u) || !parse_int(tok[1], v) || u < 0 || v < 0) {
      throw DataError("malformed edge at " + where(path, no) + ": '" + line + "'");
    }
    max_index = std::max({max_index, u, v});
    pairs.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v)});
  }
  if (pairs.empty() && !n_hint) throw DataError("edge list " + path.string() + " is empty");
  NodeId n = static_cast<NodeId>(max_index + 1);
  if (n_hint && *n_hint > n) n = *n_hint;
  EdgeListLoad out{Graph(1, {}), 0};
  out.graph = Graph(n, pairs, &out.dropped_self_loops);
  return out;
}

void save_edge_list(const Graph& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# n=" << g.num_nodes() << " m=" << g.num_edges() << "\n";
  for (const auto& e : g.edges()) out << e.u << ' ' << e.v << '\n';
}

GraphCorpus load_tu_corpus(const std::filesystem::path& dir, std::string prefix) {
  namespace fs = std::filesystem;
  if (prefix.empty()) {
    if (!fs::is_directory(dir)) throw DataError("dataset directory " + dir.string() + " not found");
    for (const auto& entry : fs::directory_iterator(dir)) {
      auto name = entry.path().filename().string();
      if (name.size() > 6 && name.ends_with("_A.txt")) prefix = name.substr(0, name.size() - 6);
    }
    if (prefix.empty()) throw DataError("no <DS>_A.txt file in " + dir.string());
  }
  auto file = [&](const std::string& suffix) { return dir / (prefix + "_" + suffix + ".txt"); };
  if (!fs::exists(file("A"))) throw DataError("missing " + file("A").string());

  std::vector<std::int64_t> indicator;
  for (const auto& [no, line] : data_lines(file("graph_indicator"))) {
    std::int64_t gid = 0;
    if (!parse_int(line, gid) || gid < 1) {
      throw DataError("bad graph id at " + where(file("graph_indicator"), no));
    }
    if (!indicator.empty() && gid < indicator.back()) {
      throw DataError("graph ids must be non-decreasing at " + where(file("graph_indicator"), no));
    }
    indicator.push_back(gid);
  }
  if (indicator.empty()) throw DataError("empty graph indicator file");
  const auto num_graphs = static_cast<std::size_t>(indicator.back());
  const std::size_t num_nodes = indicator.size();

  std::vector<NodeId> local(num_nodes);
  std::vector<std::size_t> counts(num_graphs, 0);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    auto g = static_cast<std::size_t>(indicator[i] - 1);
    local[i] = static_cast<NodeId>(counts[g]++);
  }

  std::vector<std::vector<NodePair>> pairs(num_graphs);
  for (const auto& [no, line] : data_lines(file("A"))) {
    auto tok = tokens(line);
    std::int64_t u = 0;
    std::int64_t v = 0;
    if (tok.size() != 2 || !parse_int(tok[0], u) || !parse_int(tok[1], v)) {
      throw DataError("malformed edge at " + where(file("A"), no));
    }
    if (u < 1 || v < 1 || u > static_cast<std::int64_t>(num_nodes) ||
        v > static_cast<std::int64_t>(num_nodes)) {
      throw DataError("node index out of range at " + where(file("A"), no));
    }
    --u;
    --v;
    if (indicator[u] != indicator[v]) {
      throw DataError("edge crosses graphs " + std::to_string(indicator[u]) + " and " +
                      std::to_string(indicator[v]) + " at " + where(file("A"), no));
    }
    pairs[indicator[u] - 1].push_back({local[u], local[v]});
  }

  GraphCorpus corpus;
  for (std::size_t g = 0; g < num_graphs; ++g) {
    if (counts[g] == 0) throw DataError("graph id " + std::to_string(g + 1) + " has no nodes");
    corpus.graphs.emplace_back(static_cast<NodeId>(counts[g]), pairs[g]);
    corpus.manifest.push_back({(dir / prefix).string() + "#" + std::to_string(g), prefix});
  }

  if (fs::exists(file("node_labels"))) {
    auto lines = data_lines(file("node_labels"));
    if (lines.size() != num_nodes) throw DataError("node label count mismatch in " + file("node_labels").string());
    std::vector<std::vector<int>> labels(num_graphs);
    for (std::size_t i = 0; i < num_nodes; ++i) {
      std::int64_t y = 0;
      if (!parse_int(tokens(lines[i].second).at(0), y)) {
        throw DataError("bad node label at " + where(file("node_labels"), lines[i].first));
      }
      labels[indicator[i] - 1].push_back(static_cast<int>(y));
    }
    for (std::size_t g = 0; g < num_graphs; ++g) {
      corpus.graphs[g] = corpus.graphs[g].with_node_labels(std::move(labels[g]));
    }
  }

  if (fs::exists(file("node_attributes"))) {
    auto lines = data_lines(file("node_attributes"));
    if (lines.size() != num_nodes) throw DataError("node attribute count mismatch");
    const std::size_t f = tokens(lines[0].second).size();
    std::vector<FeatureMatrix> feats(num_graphs);
    for (std::size_t g = 0; g < num_graphs; ++g) feats[g].resize(static_cast<Eigen::Index>(counts[g]), f);
    for (std::size_t i = 0; i < num_nodes; ++i) {
      auto tok = tokens(lines[i].second);
      if (tok.size() != f) throw DataError("ragged attribute row at " + where(file("node_attributes"), lines[i].first));
      for (std::size_t c = 0; c < f; ++c) {
        double x = 0;
        if (!parse_double(tok[c], x)) {
          throw DataError("bad attribute at " + where(file("node_attributes"), lines[i].first));
        }
        feats[indicator[i] - 1](local[i], static_cast<Eigen::Index>(c)) = x;
      }
    }
    for (std::size_t g = 0; g < num_graphs; ++g) {
      corpus.graphs[g] = corpus.graphs[g].with_features(std::move(feats[g]));
    }
  }

  if (fs::exists(file("graph_labels"))) {
    auto lines = data_lines(file("graph_labels"));
    if (lines.size() != num_graphs) {
      throw DataError("graph label file has " + std::to_string(lines.size()) + " lines for " +
                      std::to_string(num_graphs) + " graphs");
    }
    for (std::size_t g = 0; g < num_graphs; ++g) {
      auto tok = tokens(lines[g].second);
      std::int64_t cls = 0;
      GraphLabel label;
      if (tok.size() == 1 && parse_int(tok[0], cls)) {
        label = static_cast<int>(cls);
      } else {
        std::vector<double> values;
        for (const auto& t : tok) {
          double x = 0;
          if (!parse_double(t, x)) throw DataError("bad graph label at " + where(file("graph_labels"), lines[g].first));
          values.push_back(x);
        }
        label = std::move(values);
      }
      corpus.graphs[g] = corpus.graphs[g].with_graph_label(std::move(label));
    }
  }
  return corpus;
}

void write_tu_corpus(const GraphCorpus& corpus, const std::filesystem::path& dir,
                     const std::string& prefix) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const std::string& suffix) {
    std::ofstream out(dir / (prefix + "_" + suffix + ".txt"));
    if (!out) throw DataError("cannot write into " + dir.string());
    out << std::setprecision(17);
    return out;
  };
  auto a = open("A");
  auto ind = open("graph_indicator");
  bool any_node_labels = false;
  bool any_features = false;
  bool any_graph_labels = false;
  for (const auto& g : corpus.graphs) {
    any_node_labels |= g.node_labels().has_value();
    any_features |= g.node_features().has_value();
    any_graph_labels |= g.graph_label().has_value();
  }
  std::ofstream nl;
  std::ofstream na;
  std::ofstream gl;
  if (any_node_labels) nl = open("node_labels");
  if (any_features) na = open("node_attributes");
  if (any_graph_labels) gl = open("graph_labels");

  std::size_t offset = 0;
  for (std::size_t gi = 0; gi < corpus.graphs.size(); ++gi) {
    const auto& g = corpus.graphs[gi];
    for (const auto& e : g.edges()) {
      a << offset + e.u + 1 << ", " << offset + e.v + 1 << '\n';
      a << offset + e.v + 1 << ", " << offset + e.u + 1 << '\n';
    }
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      ind << gi + 1 << '\n';
      if (any_node_labels) {
        if (!g.node_labels()) throw DataError("graph " + std::to_string(gi) + " lacks node labels");
        nl << (*g.node_labels())[v] << '\n';
      }
      if (any_features) {
        if (!g.node_features()) throw DataError("graph " + std::to_string(gi) + " lacks node features");
        const auto& f = *g.node_features();
        for (Eigen::Index c = 0; c < f.cols(); ++c) na << (c ? ", " : "") << f(v, c);
        na << '\n';
      }
    }
    if (any_graph_labels) {
      if (!g.graph_label()) throw DataError("graph " + std::to_string(gi) + " lacks a graph label");
      if (const int* cls = std::get_if<int>(&*g.graph_label())) {
        gl << *cls << '\n';
      } else {
        const auto& vals = std::get<std::vector<double>>(*g.graph_label());
        for (std::size_t c = 0; c < vals.size(); ++c) gl << (c ? ", " : "") << vals[c];
        gl << '\n';
      }
    }
    offset += static_cast<std::size_t>(g.num_nodes());
  }
}

void write_manifest(const GraphCorpus& corpus, const std::filesystem::path& path) {
  corpus.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    nlohmann::ordered_json rec;
    rec["id"] = i;
    rec["source"] = corpus.manifest[i].source;
    rec["domain"] = corpus.manifest[i].domain;
    rec["n"] = corpus.graphs[i].num_nodes();
    rec["m"] = corpus.graphs[i].num_edges();
    if (corpus.cluster_labels) rec["cluster"] = (*corpus.cluster_labels)[i];
    out << rec.dump() << '\n';
  }
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::vector<ManifestRecord> out;
  for (const auto& [no, line] : data_lines(path)) {
    try {
      auto j = nlohmann::json::parse(line);
      ManifestRecord r;
      r.id = j.at("id").get<std::size_t>();
      r.source = j.at("source").get<std::string>();
      r.domain = j.at("domain").get<std::string>();
      r.n = j.at("n").get<NodeId>();
      r.m = j.at("m").get<std::size_t>();
      if (j.contains("cluster")) r.cluster = j["cluster"].get<int>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("bad manifest record at " + where(path, no) + ": " + e.what());
    }
  }
  return out;
}

std::string bytes_hash(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void write_container(const std::filesystem::path& path, const Container& c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "gsaug-" << c.kind << ' ' << c.version << '\n' << c.manifest.size() << ' ' << c.values.size() << '\n';
  out << c.manifest << '\n';
  out.write(reinterpret_cast<const char*>(c.values.data()),
            static_cast<std::streamsize>(c.values.size() * sizeof(double)));
  if (!out) throw DataError("write failed for " + path.string());
}

Container read_container(const std::filesystem::path& path, const std::string& kind, int version,
                         bool with_values) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  Container c;
  std::string magic;
  if (!(in >> magic >> c.version) || magic != "gsaug-" + kind) {
    throw DataError(path.string() + " is not a " + kind + " file");
  }
  if (c.version != version) {
    throw DataError(path.string() + ": expected " + kind + " format version " + std::to_string(version) +
                    ", found " + std::to_string(c.version));
  }
  c.kind = kind;
  std::size_t manifest_bytes = 0;
  std::size_t count = 0;
  if (!(in >> manifest_bytes >> count) || in.get() != '\n') throw DataError(path.string() + ": bad header");
  c.manifest.resize(manifest_bytes);
  in.read(c.manifest.data(), static_cast<std::streamsize>(manifest_bytes));
  if (static_cast<std::size_t>(in.gcount()) != manifest_bytes || in.get() != '\n') {
    throw DataError(path.string() + ": truncated manifest");
  }
  if (!with_values) return c;
  std::vector<double> values(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double)) {
    throw DataError(path.string() + ": truncated parameter blob (expected " + std::to_string(count) + " values)");
  }
  if (in.peek() != std::ifstream::traits_type::eof()) throw DataError(path.string() + ": trailing bytes");
  c.values = std::move(values);
  return c;
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return bytes_hash(ss.str());
}

}  // namespace gsaug
