// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "spotflow/latent.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spotflow/errors.hpp"
#include "spotflow/rng.hpp"

namespace spotflow {

LatentGrid::LatentGrid(std::size_t h, std::size_t w, std::size_t c) : h_(h), w_(w), c_(c), data_(h * w * c, 0.0) {}

LatentGrid::LatentGrid(std::size_t h, std::size_t w, std::size_t c, std::vector<double> data)
    : h_(h), w_(w), c_(c), data_(std::move(data)) {
    if (data_.size() != h * w * c) throw DimensionError("latent data length does not match h*w*c");
}

Tensor LatentGrid::as_matrix() const { return Tensor({tokens(), c_}, data_); }

Tensor LatentGrid::as_tensor() const { return Tensor({h_, w_, c_}, data_); }

LatentGrid LatentGrid::from_matrix(std::size_t h, std::size_t w, const Tensor& m) {
    if (m.rank() != 2 || m.rows() != h * w) {
        throw DimensionError("latent from_matrix: shape " + shape_to_string(m.shape()) + " does not hold " +
                             std::to_string(h) + "x" + std::to_string(w) + " tokens");
    }
    return LatentGrid(h, w, m.cols(), m.storage());
}

bool LatentGrid::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const LatentGrid& a, const LatentGrid& b, const char* what) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(what) + ": latent grids differ, " + std::to_string(a.h()) + "x" +
                             std::to_string(a.w()) + "x" + std::to_string(a.c()) + " vs " + std::to_string(b.h()) +
                             "x" + std::to_string(b.w()) + "x" + std::to_string(b.c()));
    }
}

LatentGrid gaussian_latent(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
    LatentGrid g(h, w, c);
    SplitMix64 rng(seed);
    for (double& v : g.data()) v = rng.normal();
    return g;
}

LatentGrid smooth_latent(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
    LatentGrid g(h, w, c);
    SplitMix64 rng(seed);
    constexpr int kWaves = 4;
    for (std::size_t ch = 0; ch < c; ++ch) {
        double fy[kWaves], fx[kWaves], phase[kWaves], amp[kWaves];
        for (int k = 0; k < kWaves; ++k) {
            fy[k] = rng.uniform(-1.5, 1.5);
            fx[k] = rng.uniform(-1.5, 1.5);
            phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
            amp[k] = rng.uniform(0.1, 0.25);
        }
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t col = 0; col < w; ++col) {
                double v = 0.0;
                for (int k = 0; k < kWaves; ++k) {
                    const double arg = 2.0 * std::numbers::pi *
                                           (fy[k] * static_cast<double>(r) / static_cast<double>(h) +
                                            fx[k] * static_cast<double>(col) / static_cast<double>(w)) +
                                       phase[k];
                    v += amp[k] * std::sin(arg);
                }
                g.token(r * w + col)[ch] = v;
            }
    }
    return g;
}

PromptEmbedding seeded_prompt(std::size_t m, std::size_t d_model, std::uint64_t seed) {
    if (m == 0) throw ConfigError("prompt must contain at least one token");
    Tensor t = Tensor::matrix(m, d_model);
    SplitMix64 rng(seed);
    for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
    return {std::move(t)};
}

std::vector<bool> rect_mask(std::size_t h, std::size_t w, std::span<const TokenRect> rects) {
    std::vector<bool> mask(h * w, false);
    for (const auto& r : rects)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j)
                if (r.contains(i, j)) mask[i * w + j] = true;
    return mask;
}

LatentGrid apply_edit(const LatentGrid& y, const std::vector<bool>& mask, double magnitude, std::uint64_t seed) {
    if (mask.size() != y.tokens()) throw DimensionError("edit mask size does not match token count");
    LatentGrid out = y;
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < y.tokens(); ++i) {
        // A delta is drawn for every token, masked or not.
        for (double& v : out.token(i)) {
            const double sign = (rng.next() >> 63) ? 1.0 : -1.0;
            if (mask[i]) v += sign * magnitude;
        }
    }
    return out;
}

}  // namespace spotflow
