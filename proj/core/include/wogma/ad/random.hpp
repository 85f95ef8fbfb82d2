// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "wogma/ad/tensor.hpp"

namespace wogma::ad {

/// Seeded generator. Uniform draws are built from the raw 64-bit engine output
/// so they do not depend on the standard library's distribution code.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }
  /// Standard normal by Box-Muller.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Uniform in +-sqrt(1 / fan_in).
Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng);
/// Uniform in [lo, hi).
Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0);

}  // namespace wogma::ad
