// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wogma/model/config.hpp"

namespace wogma::train {

/// Optimization and pseudo-labeling hyper-parameters plus the architecture.
struct TrainConfig {
  model::ModelConfig model;
  double lr = 5e-5;
  double weight_decay = 5e-4;
  std::size_t epochs = 100;
  std::size_t kappa = 8;
  double theta_class = 0.4;
  double theta_score = 0.3;
  std::size_t max_frames = 6000;
  std::uint64_t seed = 0;
  bool ablate_pseudo = false;
  std::size_t batch_size = 1;  // videos per optimizer step
  std::size_t threads = 1;     // >1 computes the videos of a batch concurrently

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Flat JSON object with one key per field; architecture fields are top-level
/// (tau, stride, hidden, n_c, ablate_local, ...).
std::string config_to_json(const TrainConfig& config);
/// Starts from `base` and overrides the keys present in `text`. Unknown keys
/// and ill-typed values raise ConfigError.
TrainConfig config_from_json(const std::string& text, TrainConfig base = {});
/// Keys understood by config_from_json.
std::vector<std::string> config_keys();

}  // namespace wogma::train
