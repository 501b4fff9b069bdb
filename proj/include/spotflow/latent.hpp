// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spotflow/tensor.hpp"

namespace spotflow {

/// h x w grid of c-channel tokens. Token i is the row-major position (i / w, i % w).
/// Noisy states, reconstructions, and the condition latent all live here.
class LatentGrid {
public:
    LatentGrid() = default;
    LatentGrid(std::size_t h, std::size_t w, std::size_t c);
    LatentGrid(std::size_t h, std::size_t w, std::size_t c, std::vector<double> data);

    std::size_t h() const { return h_; }
    std::size_t w() const { return w_; }
    std::size_t c() const { return c_; }
    std::size_t tokens() const { return h_ * w_; }

    std::span<double> token(std::size_t i) { return {data_.data() + i * c_, c_}; }
    std::span<const double> token(std::size_t i) const { return {data_.data() + i * c_, c_}; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    /// (h*w) x c matrix view, copied.
    Tensor as_matrix() const;
    /// h x w x c tensor, copied.
    Tensor as_tensor() const;
    static LatentGrid from_matrix(std::size_t h, std::size_t w, const Tensor& m);

    bool same_shape(const LatentGrid& o) const { return h_ == o.h_ && w_ == o.w_ && c_ == o.c_; }
    bool all_finite() const;

    friend bool operator==(const LatentGrid&, const LatentGrid&) = default;

private:
    std::size_t h_ = 0, w_ = 0, c_ = 0;
    std::vector<double> data_;
};

/// Instruction-token features, m x d_model, m >= 1.
struct PromptEmbedding {
    Tensor tokens;

    std::size_t count() const { return tokens.rows(); }
};

void require_same_shape(const LatentGrid& a, const LatentGrid& b, const char* what);

/// Seeded standard-normal latent (the noise endpoint X_1).
LatentGrid gaussian_latent(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed);

/// Smooth low-frequency field: per channel, a sum of four seeded sinusoids.
LatentGrid smooth_latent(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed);

/// Seeded prompt tokens with entries uniform in [-1, 1].
PromptEmbedding seeded_prompt(std::size_t m, std::size_t d_model, std::uint64_t seed);

/// Axis-aligned rectangle in token coordinates.
struct TokenRect {
    std::size_t row = 0, col = 0, height = 0, width = 0;

    bool contains(std::size_t r, std::size_t c) const {
        return r >= row && r < row + height && c >= col && c < col + width;
    }
};

/// Token-level mask (true = inside some rectangle).
std::vector<bool> rect_mask(std::size_t h, std::size_t w, std::span<const TokenRect> rects);

/// y plus a seeded additive delta of +/- magnitude per channel on masked tokens.
LatentGrid apply_edit(const LatentGrid& y, const std::vector<bool>& mask, double magnitude, std::uint64_t seed);

}  // namespace spotflow
