#pragma once

// key=value configuration for training runs. Keys match the run manifest,
// so a manifest.txt written by a previous run can be fed back as a config
// once its descriptive (non-tunable) entries are removed.

#include "disrank/checkpoint.hpp"
#include "disrank/trainer.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace disrank::config {

struct KeyInfo {
    std::string_view key;
    std::string_view description;
};

/// Tunable keys in documentation order.
const std::vector<KeyInfo>& known_keys();

/// Applies entries on top of `base`. Unknown keys and unparseable values
/// raise ValidationError; the result is validated.
TrainConfig apply(TrainConfig base, const Manifest& entries);

Manifest read_file(const std::filesystem::path& path);

/// Parses "key=value"; used for command-line overrides.
std::pair<std::string, std::string> split_assignment(std::string_view text);

/// Resolved value of every tunable key, in known_keys() order.
Manifest resolved(const TrainConfig& config);

} // namespace disrank::config
