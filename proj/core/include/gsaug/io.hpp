#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gsaug/graph.hpp"

namespace gsaug {

struct EdgeListLoad {
  Graph graph;
  std::size_t dropped_self_loops = 0;
};

/// Reads "<u> <v>" lines (0-indexed, '#' comments). n is max index + 1, or
/// `n_hint` when larger (an empty file needs the hint). Throws DataError with
/// the line number on bad input.
EdgeListLoad load_edge_list(const std::filesystem::path& path, std::optional<NodeId> n_hint = {});
void save_edge_list(const Graph& g, const std::filesystem::path& path);

/// Reads a TUDataset-style directory: <DS>_A.txt, <DS>_graph_indicator.txt and
/// the optional <DS>_graph_labels.txt, <DS>_node_labels.txt,
/// <DS>_node_attributes.txt. The dataset prefix is inferred from the A file
/// unless given.
GraphCorpus load_tu_corpus(const std::filesystem::path& dir, std::string prefix = {});

/// Writes `corpus` in the same flat format (1-indexed on disk).
void write_tu_corpus(const GraphCorpus& corpus, const std::filesystem::path& dir,
                     const std::string& prefix);

struct ManifestRecord {
  std::size_t id = 0;
  std::string source;
  std::string domain;
  NodeId n = 0;
  std::size_t m = 0;
  std::optional<int> cluster;
};

/// One JSON object per line: {"id","source","domain","n","m"[,"cluster"]}.
void write_manifest(const GraphCorpus& corpus, const std::filesystem::path& path);
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

/// Versioned file holding a structured-text manifest and a flat blob of doubles:
///   "gsaug-<kind> <version>\n<manifest bytes> <value count>\n<manifest>\n<blob>"
struct Container {
  std::string kind;
  int version = 0;
  std::string manifest;
  std::vector<double> values;
};

void write_container(const std::filesystem::path& path, const Container& c);
/// Throws DataError on a kind or version mismatch and on truncated or padded
/// files. With `with_values` false only the header and manifest are read.
Container read_container(const std::filesystem::path& path, const std::string& kind, int version,
                         bool with_values = true);

/// FNV-1a over a file's bytes, hex encoded.
std::string file_hash(const std::filesystem::path& path);
std::string bytes_hash(std::string_view bytes);

}  // namespace gsaug
