// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wogma/eval/report.hpp"
#include "wogma/train/config.hpp"

namespace wogma::cli {

/// Everything a run needs: the training configuration plus file locations and
/// evaluation settings. One flat JSON object holds all of it.
struct RunConfig {
  train::TrainConfig train;
  std::string train_data;
  std::string test_data;
  std::string out_dir = ".";
  std::vector<double> fractions = eval::EvalOptions{}.fractions;
  double instance_threshold = eval::EvalOptions{}.instance_threshold;
  bool seed_given = false;  // whether the file set "seed"

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  /// Evaluation options for a model trained with `trained` (kappa and frame budget follow it).
  eval::EvalOptions eval_options(const train::TrainConfig& trained) const;
};

/// Keys outside TrainConfig that a run file may carry.
std::vector<std::string> run_only_keys();

/// Parses a run file. Unknown keys and ill-typed values raise ConfigError.
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& config);

/// Seed precedence: explicit flag, then the run file, then WOGMA_SEED, then `fallback`.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const RunConfig& config, std::uint64_t fallback);

}  // namespace wogma::cli
