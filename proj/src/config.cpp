#include "idlearn/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <utility>
#include <variant>

namespace idlearn {

using nlohmann::json;

namespace {

template <typename E>
struct EnumTable {
  const char* what;
  std::vector<std::pair<const char*, E>> entries;

  E parse(const std::string& s) const {
    for (const auto& [name, value] : entries) {
      if (s == name) return value;
    }
    std::string valid;
    for (const auto& [name, value] : entries) {
      if (!valid.empty()) valid += ", ";
      valid += name;
    }
    throw ConfigError("invalid " + std::string(what) + " '" + s + "'; valid choices: " + valid);
  }
};

const EnumTable<NoiseLevel> kNoise{"noise_level",
                                   {{"none", NoiseLevel::kNone},
                                    {"low", NoiseLevel::kLow},
                                    {"medium", NoiseLevel::kMedium},
                                    {"high", NoiseLevel::kHigh},
                                    {"very_high", NoiseLevel::kVeryHigh}}};
const EnumTable<Level> kLevel{"level",
                              {{"none", Level::kNone}, {"medium", Level::kMedium}, {"high", Level::kHigh}}};
const EnumTable<Controller> kController{"controller",
                                        {{"pid", Controller::kPid}, {"adaptive", Controller::kAdaptive}}};
const EnumTable<GainSetting> kGain{"gain_setting", {{"low", GainSetting::kLow}, {"high", GainSetting::kHigh}}};
const EnumTable<DataSource> kSource{"data_source",
                                   {{"indirect", DataSource::kIndirect},
                                    {"direct", DataSource::kDirect},
                                    {"joint", DataSource::kJoint}}};

using C = ExperimentConfig;
using FieldRef = std::variant<int C::*, double C::*, bool C::*, std::uint64_t C::*,
                              std::vector<double> C::*, std::vector<int> C::*>;

const std::vector<std::pair<const char*, FieldRef>>& fields() {
  static const std::vector<std::pair<const char*, FieldRef>> table{
      {"epochs", &C::epochs},
      {"n_iterations", &C::n_iterations},
      {"seed", &C::seed},
      {"repetition", &C::repetition},
      {"horizon", &C::horizon},
      {"dim", &C::dim},
      {"dt", &C::dt},
      {"true_mass", &C::true_mass},
      {"model_mass", &C::model_mass},
      {"q_init", &C::q_init},
      {"q_goal", &C::q_goal},
      {"viscous_levels", &C::viscous_levels},
      {"coulomb_levels", &C::coulomb_levels},
      {"break_torque_levels", &C::break_torque_levels},
      {"coulomb_pattern", &C::coulomb_pattern},
      {"region_edge", &C::region_edge},
      {"v_stick", &C::v_stick},
      {"policy_kp", &C::policy_kp},
      {"policy_kd", &C::policy_kd},
      {"pid_kp", &C::pid_kp},
      {"pid_ki", &C::pid_ki},
      {"pid_kd", &C::pid_kd},
      {"integral_limit", &C::integral_limit},
      {"pid_derivative_filter", &C::pid_derivative_filter},
      {"adaptive_eta", &C::adaptive_eta},
      {"adaptive_error_filter", &C::adaptive_error_filter},
      {"gain_ratio", &C::gain_ratio},
      {"learner_filter", &C::learner_filter},
      {"layer_widths", &C::layer_widths},
      {"prelu_alpha", &C::prelu_alpha},
      {"learning_rate", &C::learning_rate},
      {"batch_size", &C::batch_size},
      {"output_clamp", &C::output_clamp},
      {"accumulate_data", &C::accumulate_data},
      {"converge_pos_tol", &C::converge_pos_tol},
      {"converge_vel_tol", &C::converge_vel_tol},
      {"abort_threshold", &C::abort_threshold},
  };
  return table;
}

std::string expect_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("'" + key + "' must be a string");
  return v.get<std::string>();
}

template <typename E>
std::vector<E> parse_axis(const json& v, const EnumTable<E>& table, const std::string& key) {
  if (!v.is_array()) throw ConfigError("grid." + key + " must be an array");
  std::vector<E> out;
  for (const auto& item : v) out.push_back(table.parse(expect_string(item, key)));
  return out;
}

template <typename E>
json axis_json(const std::vector<E>& values) {
  json a = json::array();
  for (auto v : values) a.push_back(to_string(v));
  return a;
}

}  // namespace

NoiseLevel parse_noise_level(const std::string& s) { return kNoise.parse(s); }
Level parse_level(const std::string& s) { return kLevel.parse(s); }
Controller parse_controller(const std::string& s) { return kController.parse(s); }
GainSetting parse_gain_setting(const std::string& s) { return kGain.parse(s); }
DataSource parse_data_source(const std::string& s) { return kSource.parse(s); }

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["noise_level"] = to_string(cfg.noise_level);
  j["friction_level"] = to_string(cfg.friction_level);
  j["stiction_level"] = to_string(cfg.stiction_level);
  j["controller"] = to_string(cfg.controller);
  j["gain_setting"] = to_string(cfg.gain_setting);
  j["data_source"] = to_string(cfg.data_source);
  for (const auto& [name, ref] : fields()) {
    std::visit([&](auto member) { j[name] = cfg.*member; }, ref);
  }
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "noise_level") {
      cfg.noise_level = kNoise.parse(expect_string(value, key));
    } else if (key == "friction_level") {
      cfg.friction_level = kLevel.parse(expect_string(value, key));
    } else if (key == "stiction_level") {
      cfg.stiction_level = kLevel.parse(expect_string(value, key));
    } else if (key == "controller") {
      cfg.controller = kController.parse(expect_string(value, key));
    } else if (key == "gain_setting") {
      cfg.gain_setting = kGain.parse(expect_string(value, key));
    } else if (key == "data_source") {
      cfg.data_source = kSource.parse(expect_string(value, key));
    } else {
      const auto& table = fields();
      auto it = std::find_if(table.begin(), table.end(),
                             [&key](const auto& f) { return key == f.first; });
      if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
      try {
        std::visit(
            [&](auto member) {
              using T = std::remove_reference_t<decltype(cfg.*member)>;
              if constexpr (std::is_same_v<T, bool>) {
                if (!value.is_boolean()) throw ConfigError("'" + key + "' must be a boolean");
              } else if constexpr (std::is_arithmetic_v<T>) {
                if (!value.is_number()) throw ConfigError("'" + key + "' must be a number");
              } else {
                if (!value.is_array()) throw ConfigError("'" + key + "' must be an array");
              }
              cfg.*member = value.get<T>();
            },
            it->second);
      } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + key + "': " + e.what());
      }
    }
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

json grid_to_json(const SweepGrid& g) {
  json j;
  j["noise_level"] = axis_json(g.noise_levels);
  j["friction_level"] = axis_json(g.friction_levels);
  j["stiction_level"] = axis_json(g.stiction_levels);
  j["controller"] = axis_json(g.controllers);
  j["gain_setting"] = axis_json(g.gain_settings);
  j["data_source"] = axis_json(g.data_sources);
  j["epochs"] = g.epochs;
  j["repetitions"] = g.repetitions;
  j["base_seed"] = g.base_seed;
  return j;
}

SweepGrid grid_from_json(const json& j, const ExperimentConfig& base) {
  if (!j.is_object()) throw ConfigError("grid must be a JSON object");
  SweepGrid g = SweepGrid::single(base);
  for (const auto& [key, value] : j.items()) {
    if (key == "noise_level") g.noise_levels = parse_axis(value, kNoise, key);
    else if (key == "friction_level") g.friction_levels = parse_axis(value, kLevel, key);
    else if (key == "stiction_level") g.stiction_levels = parse_axis(value, kLevel, key);
    else if (key == "controller") g.controllers = parse_axis(value, kController, key);
    else if (key == "gain_setting") g.gain_settings = parse_axis(value, kGain, key);
    else if (key == "data_source") g.data_sources = parse_axis(value, kSource, key);
    else if (key == "epochs") {
      if (!value.is_array()) throw ConfigError("grid.epochs must be an array");
      g.epochs = value.get<std::vector<int>>();
      for (int e : g.epochs) {
        if (e < 0) throw ConfigError("grid.epochs must be >= 0");
      }
    } else if (key == "repetitions") {
      if (!value.is_number_integer() || value.get<int>() < 1) {
        throw ConfigError("grid.repetitions must be a positive integer");
      }
      g.repetitions = value.get<int>();
    } else if (key == "base_seed") {
      if (!value.is_number_integer()) throw ConfigError("grid.base_seed must be an integer");
      g.base_seed = value.get<std::uint64_t>();
    } else {
      throw ConfigError("unknown grid key '" + key + "'");
    }
  }
  return g;
}

void apply_override(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &root;
  std::stringstream path(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(path, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& child = (*node)[parts[i]];
    if (child.is_null()) child = json::object();
    if (!child.is_object()) throw ConfigError("override path '" + key + "' is not an object");
    node = &child;
  }
  (*node)[parts.back()] = std::move(value);
}

json LoadedConfig::resolved() const {
  json j = config_to_json(config);
  if (grid) j["grid"] = grid_to_json(*grid);
  return j;
}

LoadedConfig load_config_json(json root, const std::vector<std::string>& overrides) {
  if (root.is_null()) root = json::object();
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& o : overrides) apply_override(root, o);

  LoadedConfig loaded;
  json grid_block;
  if (root.contains("grid")) {
    grid_block = root["grid"];
    root.erase("grid");
  }
  loaded.config = config_from_json(root);
  if (!grid_block.is_null()) loaded.grid = grid_from_json(grid_block, loaded.config);
  return loaded;
}

LoadedConfig load_config(const std::filesystem::path& path,
                         const std::vector<std::string>& overrides) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << is.rdbuf();
  const std::string text = buf.str();
  json root = json::object();
  if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
    root = json::parse(text, nullptr, false, true);
    if (root.is_discarded()) throw ConfigError("config file '" + path.string() + "' is not valid JSON");
  }
  return load_config_json(std::move(root), overrides);
}

}  // namespace idlearn
