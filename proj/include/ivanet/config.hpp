#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "ivanet/train.hpp"

namespace ivanet {

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
};

/// Flat `key = value` lines; `#` starts a comment line.
std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& source);

/// Unknown keys and malformed values raise ParseError naming the key's line.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);
/// Every key, doubles printed to round-trip exactly.
std::string format_run_config(const RunConfig& cfg);

}  // namespace ivanet
