// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "spotflow/decoder.hpp"
#include "spotflow/flow_model.hpp"
#include "spotflow/kv_cache.hpp"
#include "spotflow/report.hpp"
#include "spotflow/routing.hpp"
#include "spotflow/sampler.hpp"
#include "spotflow/selector.hpp"

namespace spotflow {

enum class AcceleratorKind { none, velocity_reuse };

struct AcceleratorConfig {
    AcceleratorKind kind = AcceleratorKind::none;
    /// Every period-th spot model call reuses the previous active velocities; nullopt means never.
    std::optional<std::size_t> period;
};

/// Replaces the selector's routing at a spot step. Receives the schedule index
/// and the selector's own routing.
using RoutingHook = std::function<TokenRouting(std::size_t index, const TokenRouting& selected)>;

struct PipelineConfig {
    std::size_t T = 50;
    std::size_t K_init = 4;
    SelectorConfig selector;  // selector.tau is the routing threshold
    FusionConfig fusion;
    std::uint64_t seed = 0;   // noise seed for X_1
    AcceleratorConfig accelerator;
    RoutingHook routing_hook;

    /// Throws ConfigError unless 1 <= K_init < T and T >= 2.
    void validate() const;
};

/// Returns config with the zeroth-order velocity-reuse accelerator attached.
/// Throws ConfigError for period < 2.
PipelineConfig attach_velocity_reuse_accelerator(PipelineConfig config, std::size_t period);

enum class ResetOutcome { kept, refreshed };

/// Advances the reset counter by one spot step. When the interval is reached
/// the counter is zeroed and, if refresh is given, the cache is rebuilt from
/// its K/V. A nullopt interval never fires.
ResetOutcome maybe_reset(ConditionCache& cache, const FusionConfig& config, std::size_t step,
                         const std::function<std::vector<BlockKV>()>& refresh);

struct EditResult {
    LatentGrid final_latent;            // after consolidation
    LatentGrid pre_consolidation;       // x at t = 0 before reused tokens are overwritten
    LatentGrid x0_hat;                  // last reconstruction
    PixelImage image;
    std::vector<TokenRouting> routing_history;  // selector routing, one per spot step
    TokenRouting final_routing;
    RunReport report;
};

EditResult run_spotedit(const VelocityModel& model, const LatentGrid& y, const PromptEmbedding& p,
                        const LatentDecoder& decoder, const PipelineConfig& config,
                        const StepObserver& observer = {});

}  // namespace spotflow
