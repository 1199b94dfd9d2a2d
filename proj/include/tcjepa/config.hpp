#pragma once

#include <string>
#include <vector>

#include "tcjepa/probe.hpp"
#include "tcjepa/trainer.hpp"

namespace tcjepa {

/// Everything a run needs; populated from a flat key=value file plus
/// command-line overrides of the same syntax.
struct RunConfig {
    TrainConfig train;
    ProbeConfig probe;
};

/// Applies "key=value" assignments in order. Unknown keys raise ConfigError
/// listing every offender; bad values raise ConfigError naming the key.
void apply_assignments(RunConfig& cfg, const std::vector<std::string>& assignments);

/// Parses a config file: one key=value per line, '#' comments, blank lines
/// ignored. Missing file raises ConfigError.
void load_config_file(RunConfig& cfg, const std::string& path);

/// Canonical listing of the resolved configuration, one key=value per line
/// in fixed order (used by --dry-run and for config hashing).
std::string resolved_config(const RunConfig& cfg);

/// FNV-1a over the resolved configuration text.
uint64_t config_hash(const RunConfig& cfg);

/// All recognized keys, for help output.
std::vector<std::string> config_keys();

}  // namespace tcjepa
