#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "config.hpp"
#include "gsaug/error.hpp"
#include "gsaug/graph.hpp"

namespace gsaug::cli {

/// Exclusive ownership of a run directory for the lifetime of one command.
/// A second holder fails with ConfigError; the lock file is removed on exit.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path file_;
};

/// Raised when a code path asks for a label outside its split.
class LeakageError : public DataError {
 public:
  using DataError::DataError;
};

/// Gatekeeper for supervision: commands that must not see validation or test
/// labels read them only through a guard built from the training ids.
class LabelGuard {
 public:
  LabelGuard(std::string phase, std::span<const std::size_t> allowed);

  /// Throws LeakageError when `id` is not a training id.
  void check(std::size_t id) const;
  /// Graph label of graph `id`.
  const Graph& graph(std::span<const Graph> graphs, std::size_t id) const;
  /// Copy of `g` with node labels outside the allowed ids set to -1.
  Graph mask_node_labels(const Graph& g) const;

 private:
  std::string phase_;
  std::set<std::size_t> allowed_;
};

/// Writes the resolved config into <run>/config.conf.
void echo_config(const ExperimentConfig& cfg, const std::filesystem::path& dir);

void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace gsaug::cli
