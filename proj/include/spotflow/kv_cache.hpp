// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "spotflow/routing.hpp"
#include "spotflow/tensor.hpp"

namespace spotflow {

/// Keys and values of one transformer block, split by token group. Rows are
/// tokens (image and condition rows indexed by grid position), columns are
/// heads * d_head.
struct BlockKV {
    std::size_t block = 0;
    Tensor prompt_k, prompt_v;
    Tensor image_k, image_v;
    Tensor cond_k, cond_v;

    friend bool operator==(const BlockKV&, const BlockKV&) = default;
};

enum class FusionMode {
    spotfusion,          // cumulative cos^2 blend of reused K/V toward condition K/V
    static_fusion,       // reuse cached K/V without blending
    naive_skip,          // drop reused tokens from the key/value set
    no_condition_cache,  // recompute prompt and condition branches every step
};

std::string_view fusion_mode_name(FusionMode mode);
std::optional<FusionMode> parse_fusion_mode(std::string_view name);

/// cos^2(pi t / 2); throws DomainError outside [0, 1].
double alpha_cos2(double t);

struct FusionConfig {
    FusionMode mode = FusionMode::spotfusion;
    /// Spot steps between forced full refreshes; nullopt disables reset.
    std::optional<std::size_t> reset_interval = 10;
    std::function<double(double)> alpha = alpha_cos2;
};

/// Per-block K/V for the prompt, condition, and reusable image tokens.
class ConditionCache {
public:
    ConditionCache() = default;

    std::size_t block_count() const { return blocks_.size(); }
    std::size_t image_tokens() const { return image_tokens_; }

    /// Throws CacheIncompleteError when block b is absent.
    const BlockKV& block(std::size_t b) const;
    BlockKV& block(std::size_t b);

    bool has_image_entry(std::size_t token) const { return token < image_valid_.size() && image_valid_[token]; }
    /// Throws CacheIncompleteError unless every listed token resolves in every block.
    void require_entries(std::span<const std::size_t> tokens) const;
    /// Drops a token's image entry in every block.
    void invalidate_image_entry(std::size_t token);

    std::size_t last_full_step = 0;
    std::size_t steps_since_reset = 0;

private:
    friend ConditionCache init_cache(std::vector<BlockKV> kv, std::size_t step, std::size_t image_tokens);
    std::vector<BlockKV> blocks_;
    std::vector<bool> image_valid_;
    std::size_t image_tokens_ = 0;
};

/// Mirrors one full forward's K/V. Throws CacheIncompleteError when a block is
/// missing or any group's row counts disagree.
ConditionCache init_cache(std::vector<BlockKV> kv, std::size_t step, std::size_t image_tokens);

/// Blends the K/V of every reused token at time t. Condition and prompt
/// entries are never modified. Returns the alpha that was applied (1 when the
/// mode performs no blend).
double blend_cache(ConditionCache& cache, double t, const TokenRouting& routing, const FusionConfig& config);

enum class KeyGroup { prompt, active, reused, condition };

struct KeyTag {
    KeyGroup group;
    std::size_t index;  // prompt row or image/condition grid index

    friend bool operator==(const KeyTag&, const KeyTag&) = default;
};

/// Freshly computed projections for one block of a partial forward. Prompt and
/// condition K/V are present only when the mode recomputes those branches.
struct FreshProjections {
    const Tensor* q_prompt = nullptr;
    const Tensor* q_active = nullptr;
    const Tensor* k_active = nullptr;
    const Tensor* v_active = nullptr;
    const Tensor* q_cond = nullptr;
    const Tensor* k_prompt = nullptr;
    const Tensor* v_prompt = nullptr;
    const Tensor* k_cond = nullptr;
    const Tensor* v_cond = nullptr;
};

struct AttentionInputs {
    Tensor q, k, v;
    std::vector<KeyTag> key_order;
};

/// Q = [Q_P, Q_A (, Q_Y)], K/V = [P, A, R, Y] in ascending token order per
/// group; R is omitted in naive-skip mode. Throws RoutingError on overlapping
/// sets and CacheIncompleteError when a reused token has no cached entry.
AttentionInputs assemble_attention_inputs(const ConditionCache& cache, std::size_t block,
                                          const TokenRouting& routing, FusionMode mode,
                                          const FreshProjections& fresh);

}  // namespace spotflow
