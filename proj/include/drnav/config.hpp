#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "drnav/estimator.hpp"
#include "drnav/eval.hpp"
#include "drnav/simulator.hpp"

namespace drnav {

/// Everything a command can be tuned with. On disk it is one JSON object
/// whose nested sections mirror the dotted key names, e.g.
/// {"estimator": {"slot_s": 2.0}, "motion": {"accel_threshold": 0.1}}.
struct GlobalConfig {
  EstimatorConfig estimator;
  NoiseSpec noise;
  EvalConfig eval;
};

struct ConfigKey {
  std::string key;
  std::string help;
  nlohmann::json default_value;
};

/// Every settable key with its default, in a stable order.
std::vector<ConfigKey> config_keys();

/// Sets one dotted key from a JSON value. Unknown keys and type mismatches
/// raise kConfig. `queue.buckets.<name>.mu|sigma` may name a new bucket.
void set_config_value(GlobalConfig& cfg, std::string_view key, const nlohmann::json& value);

/// Parses "key=value"; value is read as JSON when possible, else as a string.
void apply_override(GlobalConfig& cfg, std::string_view assignment);

/// Overlays a nested JSON document onto `cfg`.
void apply_config_json(GlobalConfig& cfg, const nlohmann::json& j);

nlohmann::json to_json(const GlobalConfig& cfg);

/// Checks every section; loads the queue profile file when one is named.
void finalize(GlobalConfig& cfg);

/// Defaults, then the optional file, then the overrides, then finalize.
GlobalConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Key listing used by --help.
std::string config_help();

}  // namespace drnav
