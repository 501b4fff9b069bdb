// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spotflow/decoder.hpp"
#include "spotflow/errors.hpp"
#include "spotflow/flow_model.hpp"
#include "spotflow/latent.hpp"
#include "spotflow/pipeline.hpp"

namespace spotflow {

inline constexpr std::string_view kScenarioSchema = "spotflow-scenario/1";

/// Malformed scenario; field() is the dotted path of the offending entry.
class ScenarioError : public ConfigError {
public:
    ScenarioError(std::string field, const std::string& message)
        : ConfigError("scenario field '" + field + "': " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct Scenario {
    std::uint64_t seed = 0;  // noise seed; unset sub-seeds derive from it
    std::size_t h = 16, w = 16, c = 8;
    ModelConfig model;
    bool anchored = false;  // toy-dit velocity offset by the straight-line field toward the edit target
    std::size_t T = 50, K_init = 4;
    SelectorConfig selector;
    FusionMode mode = FusionMode::spotfusion;
    std::optional<std::size_t> reset_interval = 10;
    std::vector<TokenRect> mask;
    double delta_magnitude = 1.0;
    std::uint64_t delta_seed = 0;
    std::size_t prompt_m = 8;
    std::uint64_t prompt_seed = 0;
    std::uint64_t condition_seed = 0;
    AcceleratorConfig accelerator;
};

/// Parses a "spotflow-scenario/1" document. Unknown keys are rejected.
/// Throws ScenarioError naming the field.
Scenario parse_scenario(std::string_view json_text, std::optional<std::uint64_t> seed_override = std::nullopt);
Scenario load_scenario(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = std::nullopt);

/// Everything a run needs, materialized from a scenario.
struct ScenarioInstance {
    LatentGrid y;
    LatentGrid target;
    std::vector<bool> mask;
    PromptEmbedding prompt;
    std::unique_ptr<VelocityModel> model;
    LatentDecoder decoder;
    PipelineConfig pipeline;
};

ScenarioInstance instantiate(const Scenario& scenario);

}  // namespace spotflow
