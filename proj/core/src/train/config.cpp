// SPDX-License-Identifier: Apache-2.0
#include "wogma/train/config.hpp"

#include <functional>
#include <json.hpp>
#include <map>

#include "wogma/error.hpp"

namespace wogma::train {
namespace {

using nlohmann::json;

struct Field {
  std::function<json(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const json&)> set;
};

std::size_t as_count(const json& v) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError("expected a non-negative integer");
  const auto n = v.get<std::int64_t>();
  if (n < 0) throw ConfigError("expected a non-negative integer");
  return static_cast<std::size_t>(n);
}

double as_real(const json& v) {
  if (!v.is_number()) throw ConfigError("expected a number");
  return v.get<double>();
}

bool as_flag(const json& v) {
  if (!v.is_boolean()) throw ConfigError("expected true or false");
  return v.get<bool>();
}

template <typename M>
Field count_field(M member) {
  return {[member](const TrainConfig& c) { return json(c.*member); },
          [member](TrainConfig& c, const json& v) { c.*member = as_count(v); }};
}

template <typename M>
Field model_count_field(M member) {
  return {[member](const TrainConfig& c) { return json(c.model.*member); },
          [member](TrainConfig& c, const json& v) { c.model.*member = as_count(v); }};
}

template <typename M>
Field real_field(M member) {
  return {[member](const TrainConfig& c) { return json(c.*member); },
          [member](TrainConfig& c, const json& v) { c.*member = as_real(v); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"lr", real_field(&TrainConfig::lr)},
      {"weight_decay", real_field(&TrainConfig::weight_decay)},
      {"epochs", count_field(&TrainConfig::epochs)},
      {"kappa", count_field(&TrainConfig::kappa)},
      {"theta_class", real_field(&TrainConfig::theta_class)},
      {"theta_score", real_field(&TrainConfig::theta_score)},
      {"max_frames", count_field(&TrainConfig::max_frames)},
      {"batch_size", count_field(&TrainConfig::batch_size)},
      {"threads", count_field(&TrainConfig::threads)},
      {"seed",
       {[](const TrainConfig& c) { return json(c.seed); },
        [](TrainConfig& c, const json& v) {
          c.seed = v.is_number_unsigned() ? v.get<std::uint64_t>() : static_cast<std::uint64_t>(as_count(v));
        }}},
      {"ablate_pseudo",
       {[](const TrainConfig& c) { return json(c.ablate_pseudo); },
        [](TrainConfig& c, const json& v) { c.ablate_pseudo = as_flag(v); }}},
      {"ablate_local",
       {[](const TrainConfig& c) { return json(c.model.ablate_local); },
        [](TrainConfig& c, const json& v) { c.model.ablate_local = as_flag(v); }}},
      {"ablate_longrange",
       {[](const TrainConfig& c) { return json(c.model.ablate_longrange); },
        [](TrainConfig& c, const json& v) { c.model.ablate_longrange = as_flag(v); }}},
      {"joints", model_count_field(&model::ModelConfig::joints)},
      {"tau", model_count_field(&model::ModelConfig::tau)},
      {"stride", model_count_field(&model::ModelConfig::stride)},
      {"scales", model_count_field(&model::ModelConfig::scales)},
      {"g3d_layers", model_count_field(&model::ModelConfig::g3d_layers)},
      {"g3d_channels", model_count_field(&model::ModelConfig::g3d_channels)},
      {"feature_dim", model_count_field(&model::ModelConfig::feature_dim)},
      {"temporal_layers", model_count_field(&model::ModelConfig::temporal_layers)},
      {"temporal_kernel", model_count_field(&model::ModelConfig::temporal_kernel)},
      {"hidden", model_count_field(&model::ModelConfig::hidden)},
      {"n_c", model_count_field(&model::ModelConfig::classes)},
  };
  return table;
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (kappa == 0) throw ConfigError("kappa must be >= 1");
  if (theta_class < 0.0 || theta_class > 1.0) throw ConfigError("theta_class must be in [0, 1]");
  if (theta_score < 0.0 || theta_score > 1.0) throw ConfigError("theta_score must be in [0, 1]");
  if (max_frames < model.tau) throw ConfigError("max_frames must be >= tau");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (threads == 0) throw ConfigError("threads must be >= 1");
}

std::string config_to_json(const TrainConfig& config) {
  json out = json::object();
  for (const auto& [key, field] : fields()) out[key] = field.get(config);
  return out.dump();
}

TrainConfig config_from_json(const std::string& text, TrainConfig base) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!in.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : in.items()) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->second.set(base, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  return base;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& entry : fields()) keys.push_back(entry.first);
  return keys;
}

}  // namespace wogma::train
