#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gsaug/augment.hpp"
#include "gsaug/denoiser.hpp"
#include "gsaug/diffusion.hpp"
#include "gsaug/gnn.hpp"
#include "gsaug/guidance.hpp"

namespace gsaug::cli {

enum class ValueKind { String, Integer, Real, Flag, Path, PathList, IntList };

struct KeySpec {
  std::string_view key;
  ValueKind kind;
  std::string_view default_value;
  std::string_view help;
};

/// Every key the experiment config accepts, in echo order.
std::span<const KeySpec> known_keys();

/// Flat "section.key = value" document. Lines starting with '#' are comments.
/// Unknown keys, duplicate keys and unparsable values are ConfigErrors.
/// Relative paths resolve against the directory of the file they came from
/// (or the working directory for overrides), so the echo is location free.
class ExperimentConfig {
 public:
  static ExperimentConfig from_file(const std::filesystem::path& path);
  static ExperimentConfig from_text(std::string_view text, const std::filesystem::path& base_dir);

  /// "key=value" override applied after the file.
  void set(std::string_view assignment, const std::filesystem::path& base_dir);

  /// Parses every value and cross-checks the typed sections.
  void validate() const;

  std::string str(std::string_view key) const;
  long long integer(std::string_view key) const;
  double real(std::string_view key) const;
  bool flag(std::string_view key) const;
  std::filesystem::path path(std::string_view key) const;
  std::vector<std::filesystem::path> paths(std::string_view key) const;
  std::vector<int> ints(std::string_view key) const;
  bool is_set(std::string_view key) const;

  /// All keys with their resolved values, one per line in key order.
  std::string echo() const;
  /// Hash of the echo without the run.* keys, so renaming a run keeps it.
  std::string fingerprint() const;

  std::filesystem::path run_dir() const;

  // Typed views. Each validates its section.
  NoiseSchedule schedule() const;
  DenoiserConfig denoiser() const;
  CandidatePolicy candidates() const;
  GuidanceConfig guidance() const;
  /// Head for the configured (or task default) objective. Label objectives
  /// use cross-entropy when num_classes >= 2, otherwise a regression of
  /// width value_dim.
  HeadSpec head_spec(int num_classes, int value_dim = 1) const;
  AugmentPlan augment_plan() const;
  DownstreamSpec downstream() const;
  TaskKind task() const;

 private:
  const std::string& raw(std::string_view key) const;
  void assign(std::string key, std::string value, const std::filesystem::path& base_dir, bool allow_replace);

  std::map<std::string, std::string, std::less<>> values_;
  std::map<std::string, bool, std::less<>> explicit_;
};

}  // namespace gsaug::cli
