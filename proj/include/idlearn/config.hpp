#pragma once

#include "idlearn/experiment.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace idlearn {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

NoiseLevel parse_noise_level(const std::string& s);
Level parse_level(const std::string& s);
Controller parse_controller(const std::string& s);
GainSetting parse_gain_setting(const std::string& s);
DataSource parse_data_source(const std::string& s);

nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Strict: unknown keys and out-of-range enum values raise ConfigError.
// Missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);

nlohmann::json grid_to_json(const SweepGrid& grid);
SweepGrid grid_from_json(const nlohmann::json& j, const ExperimentConfig& base);

// Applies "key=value" (dotted keys reach into nested objects). The value is
// parsed as JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& root, const std::string& assignment);

struct LoadedConfig {
  ExperimentConfig config;
  std::optional<SweepGrid> grid;  // present when the file has a "grid" block

  // Fully resolved form, written next to every output.
  nlohmann::json resolved() const;
};

// Reads a JSON config file (an empty file means all defaults), applies the
// overrides and validates the result.
LoadedConfig load_config(const std::filesystem::path& path,
                         const std::vector<std::string>& overrides = {});
LoadedConfig load_config_json(nlohmann::json root,
                              const std::vector<std::string>& overrides = {});

}  // namespace idlearn
