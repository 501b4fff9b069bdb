// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "spotflow/decoder.hpp"
#include "spotflow/latent.hpp"
#include "spotflow/routing.hpp"
#include "spotflow/tensor.hpp"

namespace spotflow {

enum class SelectorMetric { lpips_like, raw_l2 };

std::string_view selector_metric_name(SelectorMetric metric);
std::optional<SelectorMetric> parse_selector_metric(std::string_view name);

struct SelectorConfig {
    double tau = 0.2;
    /// Decoder layers to compare; empty selects every layer.
    std::vector<std::size_t> layers;
    /// Per-layer weights, same length as the selected layers; empty means 1/|L| each.
    std::vector<double> weights;
    SelectorMetric metric = SelectorMetric::lpips_like;

    /// Throws ConfigError for negative or mismatched weights or unknown layers.
    void validate(std::size_t decoder_layers) const;
};

/// One non-negative score per image token, row-major.
struct ScoreMap {
    std::size_t h = 0, w = 0;
    std::vector<double> scores;
    double mean() const;
    friend bool operator==(const ScoreMap&, const ScoreMap&) = default;
};

/// Feature-space perceptual score: per selected layer, squared distance of
/// channel-normalized features, resized to the finest layer's resolution,
/// weighted, summed, and average-pooled to the token grid.
ScoreMap lpips_score_map(const LatentGrid& x0_hat, const LatentGrid& y, const LatentDecoder& decoder,
                         const SelectorConfig& config, FlopCounter* counter = nullptr);

/// As above with precomputed features of y (reused across steps).
ScoreMap lpips_score_map(const LatentGrid& x0_hat, const DecoderFeatures& y_features, const LatentDecoder& decoder,
                         const SelectorConfig& config, FlopCounter* counter = nullptr);

/// Per-token squared latent distance.
ScoreMap raw_l2_score_map(const LatentGrid& x0_hat, const LatentGrid& y, FlopCounter* counter = nullptr);

/// Dispatches on config.metric.
ScoreMap score_map(const LatentGrid& x0_hat, const LatentGrid& y, const LatentDecoder& decoder,
                   const SelectorConfig& config, FlopCounter* counter = nullptr);

/// reuse = {i : s(i) <= tau}, active = the rest, both ascending.
TokenRouting route_tokens(const ScoreMap& scores, double tau);

}  // namespace spotflow
