// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Brute-force perceptual score: every fine pixel is evaluated from the latent
// token under it, interpolated by hand, and averaged per token with plain loops.

#include <algorithm>
#include <cmath>
#include <vector>

#include "spotflow/decoder.hpp"
#include "spotflow/latent.hpp"

namespace testutil {

inline std::vector<double> token_feature(const spotflow::LatentDecoder& dec, std::span<const double> token,
                                         std::size_t layer) {
    std::vector<double> cur(token.begin(), token.end());
    for (std::size_t l = 0; l <= layer; ++l) {
        const auto& W = dec.layer_weight(l);
        const auto& B = dec.layer_bias(l);
        std::vector<double> next(W.rows());
        for (std::size_t o = 0; o < W.rows(); ++o) {
            double s = B(0, o);
            for (std::size_t k = 0; k < cur.size(); ++k) s += W(o, k) * cur[k];
            next[o] = std::tanh(s);
        }
        cur = std::move(next);
    }
    return cur;
}

inline double normalized_sq_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double na = 0.0, nb = 0.0;
    for (double v : a) na += v * v;
    for (double v : b) nb += v * v;
    na = std::sqrt(na) + 1e-12;
    nb = std::sqrt(nb) + 1e-12;
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] / na - b[k] / nb;
        s += d * d;
    }
    return s;
}

inline std::vector<double> brute_force_scores(const spotflow::LatentGrid& x, const spotflow::LatentGrid& y,
                                              const spotflow::LatentDecoder& dec, std::vector<double> weights = {},
                                              std::vector<std::size_t> layers = {}) {
    const std::size_t h = x.h(), w = x.w(), L = dec.layer_count();
    if (layers.empty())
        for (std::size_t l = 0; l < L; ++l) layers.push_back(l);
    if (weights.empty()) weights.assign(layers.size(), 1.0 / static_cast<double>(layers.size()));
    const std::size_t finest = *std::max_element(layers.begin(), layers.end());
    const std::size_t up = std::size_t{1} << (finest + 1);  // pixels per token edge at the finest selected layer
    const std::size_t H = h * up, Wd = w * up;
    // Per layer, per token distance (features are constant over a token's footprint).
    std::vector<std::vector<double>> dist(L, std::vector<double>(h * w));
    for (std::size_t l = 0; l < L; ++l)
        for (std::size_t i = 0; i < h * w; ++i)
            dist[l][i] = normalized_sq_distance(token_feature(dec, x.token(i), l), token_feature(dec, y.token(i), l));
    std::vector<double> scores(h * w, 0.0);
    for (std::size_t py = 0; py < H; ++py)
        for (std::size_t px = 0; px < Wd; ++px) {
            double m = 0.0;
            for (std::size_t idx = 0; idx < layers.size(); ++idx) {
                const std::size_t l = layers[idx];
                const std::size_t per = std::size_t{1} << (l + 1);
                const double Rh = static_cast<double>(h * per), Rw = static_cast<double>(w * per);
                auto sample = [&](double r, double c) {
                    const std::size_t ri = static_cast<std::size_t>(r), ci = static_cast<std::size_t>(c);
                    return dist[l][(ri / per) * w + ci / per];
                };
                double sy = (static_cast<double>(py) + 0.5) * Rh / static_cast<double>(H) - 0.5;
                double sx = (static_cast<double>(px) + 0.5) * Rw / static_cast<double>(Wd) - 0.5;
                sy = std::clamp(sy, 0.0, Rh - 1.0);
                sx = std::clamp(sx, 0.0, Rw - 1.0);
                const double y0 = std::floor(sy), x0 = std::floor(sx);
                const double y1 = std::min(y0 + 1.0, Rh - 1.0), x1 = std::min(x0 + 1.0, Rw - 1.0);
                const double fy = sy - y0, fx = sx - x0;
                const double v = (1 - fy) * ((1 - fx) * sample(y0, x0) + fx * sample(y0, x1)) +
                                 fy * ((1 - fx) * sample(y1, x0) + fx * sample(y1, x1));
                m += weights[idx] * v;
            }
            scores[(py / up) * w + px / up] += m / static_cast<double>(up * up);
        }
    return scores;
}

}  // namespace testutil
