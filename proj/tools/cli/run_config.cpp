// SPDX-License-Identifier: Apache-2.0
#include "run_config.hpp"

#include <json.hpp>

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "wogma/error.hpp"

namespace wogma::cli {

using json = nlohmann::json;

void RunConfig::validate() const {
  train.validate();
  eval_options(train).validate();
}

eval::EvalOptions RunConfig::eval_options(const train::TrainConfig& trained) const {
  eval::EvalOptions o;
  o.kappa = trained.kappa;
  o.max_frames = trained.max_frames;
  o.fractions = fractions;
  o.instance_threshold = instance_threshold;
  return o;
}

std::vector<std::string> run_only_keys() {
  return {"train_data", "test_data", "out_dir", "fractions", "instance_threshold"};
}

RunConfig run_config_from_json(const std::string& text) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!in.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  json rest = json::object();
  try {
    for (const auto& [key, value] : in.items()) {
      if (key == "train_data") {
        c.train_data = value.get<std::string>();
      } else if (key == "test_data") {
        c.test_data = value.get<std::string>();
      } else if (key == "out_dir") {
        c.out_dir = value.get<std::string>();
      } else if (key == "fractions") {
        c.fractions = value.get<std::vector<double>>();
      } else if (key == "instance_threshold") {
        if (!value.is_number()) throw ConfigError("config key 'instance_threshold' must be a number");
        c.instance_threshold = value.get<double>();
      } else {
        rest[key] = value;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  c.seed_given = rest.contains("seed");
  c.train = train::config_from_json(rest.dump(), c.train);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return run_config_from_json(buf.str());
}

std::string run_config_to_json(const RunConfig& config) {
  json j = json::parse(train::config_to_json(config.train));
  j["train_data"] = config.train_data;
  j["test_data"] = config.test_data;
  j["out_dir"] = config.out_dir;
  j["fractions"] = config.fractions;
  j["instance_threshold"] = config.instance_threshold;
  return j.dump(2);
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const RunConfig& config, std::uint64_t fallback) {
  if (flag) return *flag;
  if (config.seed_given) return config.train.seed;
  if (const char* env = std::getenv("WOGMA_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0' || env[0] == '-' || errno == ERANGE) throw ConfigError(std::string("WOGMA_SEED is not an unsigned integer: ") + env);
    return v;
  }
  return fallback;
}

}  // namespace wogma::cli
