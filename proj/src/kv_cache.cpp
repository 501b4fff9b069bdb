// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "spotflow/kv_cache.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "spotflow/errors.hpp"

namespace spotflow {

void TokenRouting::validate() const {
    const std::size_t n = indicator.size();
    if (active.size() + reuse.size() != n) {
        throw RoutingError("routing covers " + std::to_string(active.size() + reuse.size()) + " of " +
                           std::to_string(n) + " tokens");
    }
    if (!std::is_sorted(active.begin(), active.end()) || !std::is_sorted(reuse.begin(), reuse.end())) {
        throw RoutingError("routing index lists must be sorted ascending");
    }
    std::vector<std::uint8_t> seen(n, 0);
    for (std::size_t i : active) {
        if (i >= n || seen[i]++ || indicator[i] != 0) throw RoutingError("active token " + std::to_string(i) + " overlaps the reuse set or is out of range");
    }
    for (std::size_t i : reuse) {
        if (i >= n || seen[i]++ || indicator[i] != 1) throw RoutingError("reused token " + std::to_string(i) + " overlaps the active set or is out of range");
    }
}

TokenRouting TokenRouting::all_active(std::size_t tokens, double tau) {
    return from_indicator(std::vector<std::uint8_t>(tokens, 0), tau);
}

TokenRouting TokenRouting::from_indicator(std::vector<std::uint8_t> indicator, double tau) {
    TokenRouting r;
    r.tau = tau;
    for (std::size_t i = 0; i < indicator.size(); ++i) (indicator[i] ? r.reuse : r.active).push_back(i);
    r.indicator = std::move(indicator);
    return r;
}

std::string_view fusion_mode_name(FusionMode mode) {
    switch (mode) {
        case FusionMode::spotfusion: return "spotfusion";
        case FusionMode::static_fusion: return "static";
        case FusionMode::naive_skip: return "naive-skip";
        case FusionMode::no_condition_cache: return "no-condition-cache";
    }
    return "unknown";
}

std::optional<FusionMode> parse_fusion_mode(std::string_view name) {
    if (name == "spotfusion") return FusionMode::spotfusion;
    if (name == "static") return FusionMode::static_fusion;
    if (name == "naive-skip") return FusionMode::naive_skip;
    if (name == "no-condition-cache") return FusionMode::no_condition_cache;
    return std::nullopt;
}

double alpha_cos2(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("alpha_cos2: t = " + std::to_string(t) + " outside [0, 1]");
    if (t == 1.0) return 0.0;  // cos(pi/2) is not exactly zero in binary floating point
    const double c = std::cos(0.5 * std::numbers::pi * t);
    return c * c;
}

const BlockKV& ConditionCache::block(std::size_t b) const {
    if (b >= blocks_.size()) {
        throw CacheIncompleteError("condition cache has no entry for block " + std::to_string(b) + " (holds " +
                                   std::to_string(blocks_.size()) + ")");
    }
    return blocks_[b];
}

BlockKV& ConditionCache::block(std::size_t b) {
    return const_cast<BlockKV&>(static_cast<const ConditionCache&>(*this).block(b));
}

void ConditionCache::require_entries(std::span<const std::size_t> tokens) const {
    for (std::size_t t : tokens) {
        if (!has_image_entry(t)) throw CacheIncompleteError("condition cache has no K/V for image token " + std::to_string(t));
    }
}

void ConditionCache::invalidate_image_entry(std::size_t token) {
    if (token < image_valid_.size()) image_valid_[token] = false;
}

ConditionCache init_cache(std::vector<BlockKV> kv, std::size_t step, std::size_t image_tokens) {
    std::size_t width = 0;
    for (std::size_t b = 0; b < kv.size(); ++b) {
        const BlockKV& blk = kv[b];
        if (blk.block != b) throw CacheIncompleteError("K/V list is missing block " + std::to_string(b));
        const Tensor* all[] = {&blk.prompt_k, &blk.prompt_v, &blk.image_k, &blk.image_v, &blk.cond_k, &blk.cond_v};
        for (const Tensor* t : all) {
            if (t->rank() != 2) throw CacheIncompleteError("block " + std::to_string(b) + " lacks a token group");
            if (b == 0 && t == all[0]) width = t->cols();
            if (t->cols() != width) throw CacheIncompleteError("block " + std::to_string(b) + " has inconsistent head width");
        }
        if (blk.prompt_k.rows() != blk.prompt_v.rows() || blk.prompt_k.rows() == 0) {
            throw CacheIncompleteError("block " + std::to_string(b) + " prompt group incomplete");
        }
        if (blk.image_k.rows() != image_tokens || blk.image_v.rows() != image_tokens) {
            throw CacheIncompleteError("block " + std::to_string(b) + " image group covers " +
                                       std::to_string(blk.image_k.rows()) + " of " + std::to_string(image_tokens) +
                                       " tokens");
        }
        if (blk.cond_k.rows() != image_tokens || blk.cond_v.rows() != image_tokens) {
            throw CacheIncompleteError("block " + std::to_string(b) + " condition group incomplete");
        }
    }
    ConditionCache cache;
    cache.blocks_ = std::move(kv);
    cache.image_valid_.assign(image_tokens, true);
    cache.image_tokens_ = image_tokens;
    cache.last_full_step = step;
    cache.steps_since_reset = 0;
    return cache;
}

double blend_cache(ConditionCache& cache, double t, const TokenRouting& routing, const FusionConfig& config) {
    if (config.mode != FusionMode::spotfusion && config.mode != FusionMode::no_condition_cache) return 1.0;
    const double a = config.alpha(t);
    cache.require_entries(routing.reuse);
    if (routing.reuse.empty()) return a;
    for (std::size_t b = 0; b < cache.block_count(); ++b) {
        BlockKV& blk = cache.block(b);
        for (std::size_t i : routing.reuse) {
            auto k = blk.image_k.row(i);
            auto v = blk.image_v.row(i);
            auto ky = blk.cond_k.row(i);
            auto vy = blk.cond_v.row(i);
            for (std::size_t d = 0; d < k.size(); ++d) {
                k[d] = a * k[d] + (1.0 - a) * ky[d];
                v[d] = a * v[d] + (1.0 - a) * vy[d];
            }
        }
    }
    return a;
}

namespace {

void copy_rows(Tensor& dst, std::size_t& at, const Tensor& src) {
    std::copy(src.data().begin(), src.data().end(), dst.data().begin() + static_cast<std::ptrdiff_t>(at * dst.cols()));
    at += src.rows();
}

void copy_selected(Tensor& dst, std::size_t& at, const Tensor& src, std::span<const std::size_t> rows) {
    for (std::size_t r : rows) {
        std::copy_n(src.row(r).begin(), src.cols(), dst.row(at).begin());
        ++at;
    }
}

}  // namespace

AttentionInputs assemble_attention_inputs(const ConditionCache& cache, std::size_t block,
                                          const TokenRouting& routing, FusionMode mode,
                                          const FreshProjections& fresh) {
    routing.validate();
    const BlockKV& cached = cache.block(block);
    const bool drop_reused = mode == FusionMode::naive_skip;
    if (!drop_reused) cache.require_entries(routing.reuse);
    if (!fresh.q_prompt || !fresh.q_active || !fresh.k_active || !fresh.v_active) {
        throw DimensionError("assemble_attention_inputs: missing fresh projections");
    }
    if (fresh.q_active->rows() != routing.active.size() || fresh.k_active->rows() != routing.active.size()) {
        throw DimensionError("assemble_attention_inputs: active projections do not match the active set");
    }
    const Tensor& kp = fresh.k_prompt ? *fresh.k_prompt : cached.prompt_k;
    const Tensor& vp = fresh.v_prompt ? *fresh.v_prompt : cached.prompt_v;
    const Tensor& ky = fresh.k_cond ? *fresh.k_cond : cached.cond_k;
    const Tensor& vy = fresh.v_cond ? *fresh.v_cond : cached.cond_v;

    AttentionInputs out;
    out.q = fresh.q_cond ? concat_rows({fresh.q_prompt, fresh.q_active, fresh.q_cond})
                         : concat_rows({fresh.q_prompt, fresh.q_active});

    const std::size_t n_reused = drop_reused ? 0 : routing.reuse.size();
    const std::size_t n_keys = kp.rows() + routing.active.size() + n_reused + ky.rows();
    const std::size_t width = kp.cols();
    out.k = Tensor::matrix(n_keys, width);
    out.v = Tensor::matrix(n_keys, width);
    out.key_order.reserve(n_keys);

    std::size_t at_k = 0, at_v = 0;
    copy_rows(out.k, at_k, kp);
    copy_rows(out.v, at_v, vp);
    for (std::size_t i = 0; i < kp.rows(); ++i) out.key_order.push_back({KeyGroup::prompt, i});
    copy_rows(out.k, at_k, *fresh.k_active);
    copy_rows(out.v, at_v, *fresh.v_active);
    for (std::size_t i : routing.active) out.key_order.push_back({KeyGroup::active, i});
    if (!drop_reused) {
        copy_selected(out.k, at_k, cached.image_k, routing.reuse);
        copy_selected(out.v, at_v, cached.image_v, routing.reuse);
        for (std::size_t i : routing.reuse) out.key_order.push_back({KeyGroup::reused, i});
    }
    copy_rows(out.k, at_k, ky);
    copy_rows(out.v, at_v, vy);
    for (std::size_t i = 0; i < ky.rows(); ++i) out.key_order.push_back({KeyGroup::condition, i});
    return out;
}

}  // namespace spotflow
