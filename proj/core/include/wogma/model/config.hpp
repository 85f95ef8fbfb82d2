// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace wogma::model {

/// Architecture hyper-parameters. Defaults follow the reference setup where it
/// states a value (tau = stride = 20, hidden 1024, one action class) and are
/// desk-scale choices otherwise.
struct ModelConfig {
  std::size_t joints = 18;
  std::size_t channels = 3;  // x, y, confidence
  std::size_t tau = 20;
  std::size_t stride = 20;
  std::size_t scales = 3;  // M; scales 0..M are aggregated
  std::size_t g3d_layers = 1;
  std::size_t g3d_channels = 32;
  std::size_t feature_dim = 64;  // C_f
  std::size_t temporal_layers = 2;
  std::size_t temporal_kernel = 3;
  std::size_t hidden = 1024;
  std::size_t classes = 1;  // n_c
  bool ablate_local = false;
  bool ablate_longrange = false;

  /// Throws ConfigError on inconsistent values.
  void validate() const;
};

}  // namespace wogma::model
