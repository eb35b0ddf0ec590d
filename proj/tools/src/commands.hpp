#pragma once

#include <ostream>
#include <string>

#include "config.hpp"

namespace gsaug::cli {

/// Filters, samples and clusters the pre-training corpus into <run>/corpus.
/// Returns the manifest hash.
std::string cmd_collect(const ExperimentConfig& cfg, std::ostream& log);

/// Trains the denoiser on <run>/corpus; writes the checkpoint(s) and loss CSV.
/// Returns the parameter hash of the final checkpoint.
std::string cmd_pretrain(const ExperimentConfig& cfg, std::ostream& log);

/// Trains one guidance head per fold (graph task) or one head (link and node
/// tasks) on training-split supervision only.
void cmd_guide_train(const ExperimentConfig& cfg, std::ostream& log);

/// Generates the augmented training data and exports it with provenance.
void cmd_augment(const ExperimentConfig& cfg, std::ostream& log);

/// Trains and scores the downstream model; writes reports/eval.csv and
/// reports/summary.txt. Returns the report hash.
std::string cmd_eval(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace gsaug::cli
