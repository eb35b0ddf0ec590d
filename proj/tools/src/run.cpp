#include "run.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fstream>

namespace gsaug::cli {
namespace fs = std::filesystem;

RunLock::RunLock(const fs::path& dir) : file_(dir / ".lock") {
  fs::create_directories(dir);
  const int fd = ::open(file_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw ConfigError("run directory " + dir.string() + " is owned by another command (remove " + file_.string() +
                      " if that command is gone)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(file_, ec);
}

LabelGuard::LabelGuard(std::string phase, std::span<const std::size_t> allowed)
    : phase_(std::move(phase)), allowed_(allowed.begin(), allowed.end()) {}

void LabelGuard::check(std::size_t id) const {
  if (!allowed_.count(id)) {
    throw LeakageError(phase_ + " tried to read the label of item " + std::to_string(id) +
                       ", which is not in the training split");
  }
}

const Graph& LabelGuard::graph(std::span<const Graph> graphs, std::size_t id) const {
  check(id);
  return graphs[id];
}

Graph LabelGuard::mask_node_labels(const Graph& g) const {
  if (!g.node_labels()) return g;
  std::vector<int> labels = *g.node_labels();
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (!allowed_.count(v)) labels[v] = -1;
  }
  return g.with_node_labels(std::move(labels));
}

void echo_config(const ExperimentConfig& cfg, const fs::path& dir) {
  write_text(dir / "config.conf", "# resolved configuration; rerun with --config " + (dir / "config.conf").string() +
                                      "\n" + cfg.echo());
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace gsaug::cli
