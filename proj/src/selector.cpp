// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "spotflow/selector.hpp"

#include <cmath>
#include <string>

#include "spotflow/errors.hpp"
#include "spotflow/kernels.hpp"

namespace spotflow {

std::string_view selector_metric_name(SelectorMetric metric) {
    return metric == SelectorMetric::lpips_like ? "lpips-like" : "raw-l2";
}

std::optional<SelectorMetric> parse_selector_metric(std::string_view name) {
    if (name == "lpips-like") return SelectorMetric::lpips_like;
    if (name == "raw-l2") return SelectorMetric::raw_l2;
    return std::nullopt;
}

void SelectorConfig::validate(std::size_t decoder_layers) const {
    for (std::size_t l : layers) {
        if (l >= decoder_layers) {
            throw ConfigError("selector layer " + std::to_string(l) + " does not exist (decoder has " +
                              std::to_string(decoder_layers) + ")");
        }
    }
    const std::size_t selected = layers.empty() ? decoder_layers : layers.size();
    if (!weights.empty() && weights.size() != selected) {
        throw ConfigError("selector weights: expected " + std::to_string(selected) + " entries, got " +
                          std::to_string(weights.size()));
    }
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("selector weights must be finite and non-negative");
    }
    if (std::isnan(tau)) throw ConfigError("selector tau must not be NaN");
}

double ScoreMap::mean() const {
    if (scores.empty()) return 0.0;
    double s = 0.0;
    for (double v : scores) s += v;
    return s / static_cast<double>(scores.size());
}

namespace {

/// Sum over channels of the squared difference of unit-normalized feature vectors.
Tensor normalized_distance(const Tensor& a, const Tensor& b) {
    const Tensor na = channel_normalize(a);
    const Tensor nb = channel_normalize(b);
    const std::size_t h = a.dim(0), w = a.dim(1), c = a.dim(2);
    Tensor d({h, w, 1});
    const double* pa = na.data().data();
    const double* pb = nb.data().data();
    for (std::size_t i = 0; i < h * w; ++i) d.data()[i] = kernels::squared_distance(pa + i * c, pb + i * c, c);
    return d;
}

}  // namespace

ScoreMap lpips_score_map(const LatentGrid& x0_hat, const DecoderFeatures& y_features, const LatentDecoder& decoder,
                         const SelectorConfig& config, FlopCounter* counter) {
    config.validate(decoder.layer_count());
    if (y_features.layers.size() != decoder.layer_count()) {
        throw DimensionError("lpips_score_map: condition features do not match the decoder's layer count");
    }
    const DecoderFeatures fx = decoder.decode_features(x0_hat);
    std::vector<std::size_t> layers = config.layers;
    if (layers.empty())
        for (std::size_t l = 0; l < decoder.layer_count(); ++l) layers.push_back(l);
    for (std::size_t l : layers) {
        if (fx.layers[l].shape() != y_features.layers[l].shape()) {
            throw DimensionError("lpips_score_map: feature shapes differ at layer " + std::to_string(l) + ": " +
                                 shape_to_string(fx.layers[l].shape()) + " vs " +
                                 shape_to_string(y_features.layers[l].shape()));
        }
    }
    std::size_t H = 0, W = 0;
    for (std::size_t l : layers) {
        if (fx.layers[l].dim(0) * fx.layers[l].dim(1) > H * W) {
            H = fx.layers[l].dim(0);
            W = fx.layers[l].dim(1);
        }
    }
    const std::size_t h = x0_hat.h(), w = x0_hat.w();
    if (H % h != 0 || W % w != 0 || H / h != W / w) {
        throw DimensionError("lpips_score_map: finest feature map is not an integer multiple of the token grid");
    }
    Tensor acc({H, W, 1});
    std::uint64_t flops = 0;
    for (std::size_t idx = 0; idx < layers.size(); ++idx) {
        const std::size_t l = layers[idx];
        const double wl = config.weights.empty() ? 1.0 / static_cast<double>(layers.size()) : config.weights[idx];
        const Tensor d = normalized_distance(fx.layers[l], y_features.layers[l]);
        const Tensor r = bilinear_resize(d, H, W);
        for (std::size_t k = 0; k < acc.size(); ++k) acc.data()[k] += wl * r.data()[k];
        flops += 6 * fx.layers[l].size() + 2 * acc.size();
    }
    const Tensor pooled = avg_pool2d(acc, H / h, H / h);
    flops += acc.size();
    ScoreMap out;
    out.h = h;
    out.w = w;
    out.scores.assign(pooled.data().begin(), pooled.data().end());
    for (double& s : out.scores) s = std::max(0.0, s);
    if (counter) counter->elementwise_flops += flops;
    return out;
}

ScoreMap lpips_score_map(const LatentGrid& x0_hat, const LatentGrid& y, const LatentDecoder& decoder,
                         const SelectorConfig& config, FlopCounter* counter) {
    require_same_shape(x0_hat, y, "lpips_score_map");
    return lpips_score_map(x0_hat, decoder.decode_features(y), decoder, config, counter);
}

ScoreMap raw_l2_score_map(const LatentGrid& x0_hat, const LatentGrid& y, FlopCounter* counter) {
    require_same_shape(x0_hat, y, "raw_l2_score_map");
    ScoreMap out;
    out.h = y.h();
    out.w = y.w();
    out.scores.resize(y.tokens());
    for (std::size_t i = 0; i < y.tokens(); ++i) {
        out.scores[i] = kernels::squared_distance(x0_hat.token(i).data(), y.token(i).data(), y.c());
    }
    if (counter) counter->elementwise_flops += 3 * y.data().size();
    return out;
}

ScoreMap score_map(const LatentGrid& x0_hat, const LatentGrid& y, const LatentDecoder& decoder,
                   const SelectorConfig& config, FlopCounter* counter) {
    if (config.metric == SelectorMetric::raw_l2) return raw_l2_score_map(x0_hat, y, counter);
    return lpips_score_map(x0_hat, y, decoder, config, counter);
}

TokenRouting route_tokens(const ScoreMap& scores, double tau) {
    std::vector<std::uint8_t> ind(scores.scores.size(), 0);
    for (std::size_t i = 0; i < ind.size(); ++i) {
        if (!std::isfinite(scores.scores[i])) {
            throw DomainError("route_tokens: score of token " + std::to_string(i) + " is not finite");
        }
        ind[i] = scores.scores[i] <= tau ? 1 : 0;
    }
    return TokenRouting::from_indicator(std::move(ind), tau);
}

}  // namespace spotflow
