// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spotflow/latent.hpp"
#include "spotflow/tensor.hpp"

namespace spotflow {

struct DecoderConfig {
    std::size_t c = 8;                         // latent channels
    std::vector<std::size_t> layer_channels{16, 16};
    std::size_t patch = 8;                     // pixels per token edge
    double mix_gain = 1.0;                     // channel-mix weights are U(+-mix_gain * sqrt(3 / fan_in))
    double bias_bound = 0.5;                   // feature biases are U(+-bias_bound)
    double dc_rejection = 0.5;                 // fraction of each first-layer row mean removed (1 = zero-sum rows)
    std::uint64_t seed = 0x5eed'dec0'de00ull;
};

/// Shallow-layer feature maps; layer l has shape (h*2^(l+1)) x (w*2^(l+1)) x c_l.
struct DecoderFeatures {
    std::vector<Tensor> layers;
};

/// RGB image with values in [0, 1], stored height x width x 3.
struct PixelImage {
    std::size_t height = 0, width = 0;
    std::vector<double> data;

    double at(std::size_t y, std::size_t x, std::size_t ch) const { return data[(y * width + x) * 3 + ch]; }
    double& at(std::size_t y, std::size_t x, std::size_t ch) { return data[(y * width + x) * 3 + ch]; }

    friend bool operator==(const PixelImage&, const PixelImage&) = default;
};

/// Fixed seeded stand-in for a VAE decoder. The feature path is cumulative
/// (channel mix, x2 nearest expansion, tanh per layer). The pixel head maps
/// each token to its own p x p x 3 patch, so equal tokens give equal patches.
class LatentDecoder {
public:
    explicit LatentDecoder(DecoderConfig config = {});

    const DecoderConfig& config() const { return config_; }
    std::size_t layer_count() const { return config_.layer_channels.size(); }

    DecoderFeatures decode_features(const LatentGrid& latent) const;
    PixelImage decode_pixels(const LatentGrid& latent) const;

    // Layer l: weight c_l x c_{l-1}, bias c_l.
    const Tensor& layer_weight(std::size_t l) const { return mix_w_[l]; }
    const Tensor& layer_bias(std::size_t l) const { return mix_b_[l]; }
    const Tensor& pixel_weight() const { return pixel_w_; }  // (p*p*3) x c
    const Tensor& pixel_bias() const { return pixel_b_; }    // 1 x 3

private:
    DecoderConfig config_;
    std::vector<Tensor> mix_w_, mix_b_;
    Tensor pixel_w_, pixel_b_;
};

}  // namespace spotflow
