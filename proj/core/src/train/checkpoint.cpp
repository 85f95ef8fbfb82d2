// SPDX-License-Identifier: Apache-2.0
#include "wogma/train/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "wogma/error.hpp"

namespace wogma::train {
namespace {

constexpr std::string_view kMomentPrefix = "adam_m/";
constexpr std::string_view kVelocityPrefix = "adam_v/";
constexpr std::string_view kStepPrefix = "adam_step/";

class Writer {
 public:
  void u32(std::uint64_t v) {
    if (v > std::numeric_limits<std::uint32_t>::max()) throw DataError("checkpoint field exceeds 32 bits");
    le(v, 4);
  }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::string_view s) { out_.append(s); }
  void record(const NamedTensor& r) {
    u32(r.name.size());
    bytes(r.name);
    u32(r.value.rank());
    for (std::size_t d : r.value.shape()) u32(d);
    for (double v : r.value.values()) f64(v);
  }
  std::string take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string_view bytes(std::size_t n) {
    need(n);
    const std::string_view s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  NamedTensor record() {
    NamedTensor r;
    r.name = std::string(bytes(u32()));
    const std::uint32_t rank = u32();
    ad::Shape shape(rank);
    for (auto& d : shape) d = u32();
    const std::size_t count = ad::shape_size(shape);
    // Guard the allocation against a corrupt dimension field.
    if (count > (in_.size() - pos_) / 8) throw DataError("checkpoint truncated in record '" + r.name + "'");
    std::vector<double> values(count);
    for (double& v : values) v = f64();
    r.value = ad::Tensor(std::move(shape), std::move(values));
    return r;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

const NamedTensor& expect(const std::vector<NamedTensor>& records, std::size_t index, const std::string& name,
                          const ad::Shape& shape) {
  if (index >= records.size() || records[index].name != name) {
    throw DataError("checkpoint lacks record '" + name + "' at position " + std::to_string(index));
  }
  if (records[index].value.shape() != shape) {
    throw DataError("checkpoint record '" + name + "' has shape " + ad::shape_string(records[index].value.shape()) +
                    ", model expects " + ad::shape_string(shape));
  }
  return records[index];
}

}  // namespace

bool Checkpoint::operator==(const Checkpoint& other) const {
  return epoch == other.epoch && config_to_json(config) == config_to_json(other.config) && params == other.params &&
         adam == other.adam;
}

Checkpoint capture(const model::Model& model, const TrainConfig& config, std::size_t epoch) {
  Checkpoint c;
  c.config = config;
  c.epoch = static_cast<std::uint32_t>(epoch);
  for (const ad::Parameter& p : model.params()) c.params.push_back({p.name, p.value});
  for (const ad::Parameter& p : model.params()) {
    c.adam.push_back({std::string(kMomentPrefix) + p.name, p.adam_m});
    c.adam.push_back({std::string(kVelocityPrefix) + p.name, p.adam_v});
    c.adam.push_back({std::string(kStepPrefix) + p.name, ad::Tensor::scalar(static_cast<double>(p.step_count))});
  }
  return c;
}

Checkpoint capture(const Trainer& trainer) { return capture(trainer.model(), trainer.config(), trainer.epoch()); }

void restore(const Checkpoint& checkpoint, model::Model& model) {
  // Validate everything before the first write so a mismatch leaves the model untouched.
  std::size_t i = 0;
  for (const ad::Parameter& p : model.params()) {
    expect(checkpoint.params, i, p.name, p.value.shape());
    expect(checkpoint.adam, 3 * i, std::string(kMomentPrefix) + p.name, p.value.shape());
    expect(checkpoint.adam, 3 * i + 1, std::string(kVelocityPrefix) + p.name, p.value.shape());
    const double steps = expect(checkpoint.adam, 3 * i + 2, std::string(kStepPrefix) + p.name, {}).value[0];
    if (!(steps >= 0.0) || steps != std::floor(steps)) throw DataError("checkpoint has an invalid Adam step count");
    ++i;
  }
  if (checkpoint.params.size() != i || checkpoint.adam.size() != 3 * i) {
    throw DataError("checkpoint holds " + std::to_string(checkpoint.params.size()) + " parameters, model has " +
                    std::to_string(i));
  }
  i = 0;
  for (ad::Parameter& p : model.params()) {
    p.value = checkpoint.params[i].value;
    p.adam_m = checkpoint.adam[3 * i].value;
    p.adam_v = checkpoint.adam[3 * i + 1].value;
    p.step_count = static_cast<std::uint64_t>(checkpoint.adam[3 * i + 2].value[0]);
    p.zero_grad();
    ++i;
  }
}

std::unique_ptr<model::Model> model_from_checkpoint(const Checkpoint& checkpoint,
                                                    const graph::SkeletonGraph& skeleton) {
  auto m = std::make_unique<model::Model>(checkpoint.config.model, skeleton, checkpoint.config.seed);
  restore(checkpoint, *m);
  return m;
}

std::unique_ptr<Trainer> trainer_from_checkpoint(const Checkpoint& checkpoint, const graph::SkeletonGraph& skeleton) {
  auto t = std::make_unique<Trainer>(checkpoint.config, skeleton);
  restore(checkpoint, t->model());
  t->set_epoch(checkpoint.epoch);
  return t;
}

std::string serialize(const Checkpoint& c) {
  Writer w;
  w.bytes(std::string_view(kCheckpointMagic, 4));
  w.u32(kCheckpointVersion);
  w.u32(c.epoch);
  w.u64(c.config.seed);
  const std::string config = config_to_json(c.config);
  w.u32(config.size());
  w.bytes(config);
  w.u32(c.params.size());
  for (const NamedTensor& r : c.params) w.record(r);
  for (const NamedTensor& r : c.adam) w.record(r);
  return w.take();
}

Checkpoint deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(4) != std::string_view(kCheckpointMagic, 4)) throw DataError("not a checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + ", expected " +
                    std::to_string(kCheckpointVersion));
  }
  Checkpoint c;
  c.epoch = r.u32();
  const std::uint64_t seed = r.u64();
  const std::string config(r.bytes(r.u32()));
  try {
    c.config = config_from_json(config);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint config is corrupt: ") + e.what());
  }
  if (c.config.seed != seed) throw DataError("checkpoint seed disagrees with its config");
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) c.params.push_back(r.record());
  for (std::uint32_t i = 0; i < 3 * count; ++i) c.adam.push_back(r.record());
  if (!r.done()) throw DataError("checkpoint has trailing bytes");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = serialize(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace wogma::train
