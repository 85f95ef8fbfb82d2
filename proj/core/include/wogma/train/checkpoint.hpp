// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "wogma/ad/tensor.hpp"
#include "wogma/graph/skeleton_graph.hpp"
#include "wogma/model/model.hpp"
#include "wogma/train/config.hpp"
#include "wogma/train/trainer.hpp"

namespace wogma::train {

inline constexpr char kCheckpointMagic[4] = {'W', 'O', 'G', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  ad::Tensor value;

  bool operator==(const NamedTensor&) const = default;
};

/// Snapshot of a training run. Byte layout, all integers little-endian:
///   "WOGM" | version u32 | epoch u32 | seed u64 | config length u32 | config JSON
///   | record count u32 | parameter records | Adam records
/// where a record is name length u32 | name | rank u32 | dims u32[rank] | f64[].
/// Adam records are named adam_m/<p>, adam_v/<p> and adam_step/<p> (rank 0).
struct Checkpoint {
  TrainConfig config;
  std::uint32_t epoch = 0;
  std::vector<NamedTensor> params;
  std::vector<NamedTensor> adam;

  bool operator==(const Checkpoint& other) const;
};

Checkpoint capture(const model::Model& model, const TrainConfig& config, std::size_t epoch);
Checkpoint capture(const Trainer& trainer);
/// Copies values and Adam state into `model`; names and shapes must match.
void restore(const Checkpoint& checkpoint, model::Model& model);
/// Rebuilds the model described by the checkpoint and loads its parameters.
std::unique_ptr<model::Model> model_from_checkpoint(const Checkpoint& checkpoint,
                                                    const graph::SkeletonGraph& skeleton);
/// Trainer positioned after checkpoint.epoch completed epochs.
std::unique_ptr<Trainer> trainer_from_checkpoint(const Checkpoint& checkpoint, const graph::SkeletonGraph& skeleton);

std::string serialize(const Checkpoint& checkpoint);
/// Throws DataError on a bad magic, an unknown version, truncation or
/// trailing bytes. Nothing is returned unless the whole input parsed.
Checkpoint deserialize(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace wogma::train
