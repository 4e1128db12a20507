#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "freqforge/harness/dataset.hpp"
#include "freqforge/harness/experiments.hpp"
#include "freqforge/harness/trainer.hpp"
#include "freqforge/network.hpp"

namespace freqforge::config {

/// Every tunable of a run, grouped like the INI sections.
struct RunConfig {
    harness::GeneratorConfig data;  // [data]
    network::NetworkConfig model;   // [model] and [loss]
    harness::TrainConfig train;     // [train] and [augment]
    harness::RobustnessConfig robustness; // [robustness]
    harness::AblationConfig ablation;     // [ablation]

    void validate() const;
};

/// Parses INI text on top of the defaults. Unknown sections or keys are a ConfigError.
RunConfig parse_ini(const std::string& text, RunConfig base = {});
RunConfig load_ini(const std::filesystem::path& file, RunConfig base = {});

/// Applies one "section.key=value" override.
void apply_override(RunConfig& config, const std::string& assignment);

/// Complete INI listing of every key; parse_ini(to_ini(c)) reproduces c.
std::string to_ini(const RunConfig& config);

/// Section -> key names accepted by the parser.
std::vector<std::pair<std::string, std::vector<std::string>>> known_keys();

nlohmann::json to_json(const network::NetworkConfig& c);
network::NetworkConfig network_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const harness::TrainConfig& c);
harness::TrainConfig train_config_from_json(const nlohmann::json& j);

} // namespace freqforge::config
