// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "spotflow/decoder.hpp"

#include <cmath>

#include "spotflow/errors.hpp"
#include "spotflow/rng.hpp"

namespace spotflow {

namespace {

Tensor seeded_uniform(SplitMix64& rng, std::size_t rows, std::size_t cols, double bound) {
    Tensor t = Tensor::matrix(rows, cols);
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
    return t;
}

}  // namespace

LatentDecoder::LatentDecoder(DecoderConfig config) : config_(std::move(config)) {
    if (config_.c == 0 || config_.patch == 0 || config_.layer_channels.empty()) {
        throw ConfigError("decoder needs c >= 1, patch >= 1 and at least one feature layer");
    }
    SplitMix64 rng(config_.seed);
    std::size_t in = config_.c;
    if (!(config_.dc_rejection >= 0.0 && config_.dc_rejection <= 1.0)) {
        throw ConfigError("decoder dc_rejection must lie in [0, 1]");
    }
    for (std::size_t out : config_.layer_channels) {
        if (out == 0) throw ConfigError("decoder layer channel count must be >= 1");
        const double bound = config_.mix_gain * std::sqrt(3.0 / static_cast<double>(in));
        Tensor w = seeded_uniform(rng, out, in, bound);
        if (mix_w_.empty() && config_.dc_rejection != 0.0) {
            for (std::size_t o = 0; o < out; ++o) {
                auto row = w.row(o);
                double mean = 0.0;
                for (double v : row) mean += v;
                mean /= static_cast<double>(in);
                for (double& v : row) v -= config_.dc_rejection * mean;
            }
        }
        mix_w_.push_back(std::move(w));
        mix_b_.push_back(seeded_uniform(rng, 1, out, config_.bias_bound));
        in = out;
    }
    const std::size_t p = config_.patch;
    pixel_w_ = seeded_uniform(rng, p * p * 3, config_.c, 1.0 / std::sqrt(static_cast<double>(config_.c)));
    pixel_b_ = seeded_uniform(rng, 1, 3, 0.5);
}

DecoderFeatures LatentDecoder::decode_features(const LatentGrid& latent) const {
    if (latent.c() != config_.c) throw DimensionError("decode_features: latent channel count does not match decoder");
    DecoderFeatures f;
    Tensor cur = latent.as_tensor();
    for (std::size_t l = 0; l < layer_count(); ++l) {
        const std::size_t h = cur.dim(0), w = cur.dim(1), cin = cur.dim(2);
        const Tensor& W = mix_w_[l];
        const Tensor& B = mix_b_[l];
        const std::size_t cout = W.rows();
        // Mix and activate at the input resolution, then expand.
        Tensor mixed({h, w, cout});
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j)
                for (std::size_t o = 0; o < cout; ++o) {
                    double s = B(0, o);
                    for (std::size_t k = 0; k < cin; ++k) s += W(o, k) * cur(i, j, k);
                    mixed(i, j, o) = std::tanh(s);
                }
        Tensor up({2 * h, 2 * w, cout});
        for (std::size_t i = 0; i < 2 * h; ++i)
            for (std::size_t j = 0; j < 2 * w; ++j)
                for (std::size_t o = 0; o < cout; ++o) up(i, j, o) = mixed(i / 2, j / 2, o);
        f.layers.push_back(up);
        cur = std::move(up);
    }
    return f;
}

PixelImage LatentDecoder::decode_pixels(const LatentGrid& latent) const {
    if (latent.c() != config_.c) throw DimensionError("decode_pixels: latent channel count does not match decoder");
    const std::size_t p = config_.patch;
    PixelImage img;
    img.height = latent.h() * p;
    img.width = latent.w() * p;
    img.data.assign(img.height * img.width * 3, 0.0);
    for (std::size_t ti = 0; ti < latent.h(); ++ti)
        for (std::size_t tj = 0; tj < latent.w(); ++tj) {
            auto tok = latent.token(ti * latent.w() + tj);
            for (std::size_t py = 0; py < p; ++py)
                for (std::size_t px = 0; px < p; ++px)
                    for (std::size_t ch = 0; ch < 3; ++ch) {
                        const std::size_t row = (py * p + px) * 3 + ch;
                        double s = pixel_b_(0, ch);
                        for (std::size_t k = 0; k < tok.size(); ++k) s += pixel_w_(row, k) * tok[k];
                        img.at(ti * p + py, tj * p + px, ch) = 1.0 / (1.0 + std::exp(-s));
                    }
        }
    return img;
}

}  // namespace spotflow
