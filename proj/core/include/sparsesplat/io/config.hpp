#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sparsesplat/trainer.hpp"

namespace sparsesplat::io {

// Flat `key = value` text with `#` comments. Every key is optional; omitted
// keys keep their defaults. Lists are comma-separated. Unknown keys and
// unparsable values throw ConfigError naming the line.
TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);

// Every key with its current value, in the format parse_config reads.
std::string format_config(const TrainConfig& cfg);
std::vector<std::string> config_keys();

}  // namespace sparsesplat::io
