#pragma once

#include <string>
#include <vector>

#include "hypermask/trainer.hpp"

namespace hypermask {

// Named experiment presets; unknown names throw ConfigError listing the
// available ones.
TrainConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

// Flat key=value config file ('#' comments, blank lines ignored). Keys match
// the TrainConfig field names; lists are comma separated.
TrainConfig parse_config_file(const std::string& path,
                              const TrainConfig& base);

// Applies one key=value override; unknown key throws ConfigError naming it.
void apply_config_key(TrainConfig& cfg, const std::string& key,
                      const std::string& value);

// The config echo used by run manifests and config round trips.
std::vector<std::pair<std::string, std::string>> config_items(
    const TrainConfig& cfg);

}  // namespace hypermask
