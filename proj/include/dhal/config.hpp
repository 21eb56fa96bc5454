#pragma once

// Flat key=value configuration. Keys are exactly the TrainingConfig field names;
// '#' starts a comment. Precedence is CLI flag > config file > built-in default.

#include <filesystem>
#include <string>
#include <vector>

#include "dhal/training.hpp"

namespace dhal {

const std::vector<std::string>& config_keys();

/// Throws ConfigError listing the valid keys when `key` is unknown, or naming the
/// key when the value does not parse.
void set_config_value(TrainingConfig& config, const std::string& key, const std::string& value);

/// Parses "key=value". Throws ConfigError on a missing '='.
void apply_assignment(TrainingConfig& config, const std::string& assignment);

/// Applies every assignment in the file on top of `base`.
TrainingConfig load_config_file(const std::filesystem::path& path, TrainingConfig base = {});

/// One "key=value" line per key in config_keys() order.
std::string canonical_config_text(const TrainingConfig& config);

/// 64-bit FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const TrainingConfig& config);

}  // namespace dhal
