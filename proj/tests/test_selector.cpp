// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>

#include "doctest.h"
#include "selector_oracle.hpp"
#include "spotflow/errors.hpp"
#include "spotflow/selector.hpp"
#include "test_util.hpp"

using namespace spotflow;
using testutil::random_latent;

namespace {

std::size_t chebyshev_to_rect(std::size_t r, std::size_t c, const TokenRect& rect) {
    auto gap = [](std::size_t v, std::size_t lo, std::size_t len) -> std::size_t {
        if (v < lo) return lo - v;
        if (v >= lo + len) return v - (lo + len - 1);
        return 0;
    };
    return std::max(gap(r, rect.row, rect.height), gap(c, rect.col, rect.width));
}

}  // namespace

TEST_CASE("lpips score: identical inputs give zero everywhere") {
    const LatentDecoder dec;
    const LatentGrid y = smooth_latent(8, 8, 8, 3);
    const ScoreMap s = lpips_score_map(y, y, dec, {});
    CHECK(s.h == 8);
    CHECK(s.w == 8);
    for (double v : s.scores) CHECK(v == 0.0);
}

TEST_CASE("lpips score matches the brute-force oracle") {
    const LatentDecoder dec;
    for (std::uint64_t k = 0; k < 10; ++k) {
        const LatentGrid a = random_latent(8, 8, 8, 500 + k), b = random_latent(8, 8, 8, 600 + k);
        const ScoreMap s = lpips_score_map(a, b, dec, {});
        const auto oracle = testutil::brute_force_scores(a, b, dec);
        for (std::size_t i = 0; i < 64; ++i) CHECK(std::abs(s.scores[i] - oracle[i]) <= 1e-9);
    }
    SelectorConfig weighted;
    weighted.weights = {0.8, 0.3};
    const LatentGrid a = random_latent(4, 6, 8, 1), b = random_latent(4, 6, 8, 2);
    const ScoreMap s = lpips_score_map(a, b, dec, weighted);
    const auto oracle = testutil::brute_force_scores(a, b, dec, {0.8, 0.3});
    for (std::size_t i = 0; i < 24; ++i) CHECK(std::abs(s.scores[i] - oracle[i]) <= 1e-9);
}

TEST_CASE("lpips score is symmetric and non-negative") {
    const LatentDecoder dec;
    for (std::uint64_t k = 0; k < 5; ++k) {
        const LatentGrid a = random_latent(6, 6, 8, 10 + k), b = random_latent(6, 6, 8, 20 + k);
        const ScoreMap ab = lpips_score_map(a, b, dec, {}), ba = lpips_score_map(b, a, dec, {});
        for (std::size_t i = 0; i < 36; ++i) {
            CHECK(std::abs(ab.scores[i] - ba.scores[i]) <= 1e-12);
            CHECK(ab.scores[i] >= 0.0);
            CHECK(std::isfinite(ab.scores[i]));
        }
    }
}

TEST_CASE("lpips score separates a rectangle edit") {
    const LatentDecoder dec;
    const LatentGrid y = smooth_latent(16, 16, 8, 77);
    const TokenRect rect{5, 5, 6, 6};
    const auto mask = rect_mask(16, 16, std::span<const TokenRect>(&rect, 1));
    const LatentGrid target = apply_edit(y, mask, 1.0, 78);
    const ScoreMap s = lpips_score_map(target, y, dec, {});
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t c = 0; c < 16; ++c) {
            const double v = s.scores[r * 16 + c];
            const std::size_t dist = chebyshev_to_rect(r, c, rect);
            if (dist == 0) {
                CHECK(v > 0.2);
            } else if (dist == 1) {
                // Interpolation of the coarser layer leaks into the neighbouring ring only.
                CHECK(v > 0.0);
                CHECK(v <= 0.125);
            } else {
                CHECK(v == 0.0);
            }
        }
}

TEST_CASE("selector layer subsets and config validation") {
    const LatentDecoder dec;
    const LatentGrid a = random_latent(4, 4, 8, 1), b = random_latent(4, 4, 8, 2);
    SelectorConfig only_first;
    only_first.layers = {0};
    const ScoreMap s = lpips_score_map(a, b, dec, only_first);
    const auto oracle = testutil::brute_force_scores(a, b, dec, {}, {0});
    for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(s.scores[i] - oracle[i]) <= 1e-9);

    SelectorConfig bad;
    bad.weights = {1.0};
    CHECK_THROWS_AS(lpips_score_map(a, b, dec, bad), ConfigError);
    bad.weights = {1.0, -0.5};
    CHECK_THROWS_AS(lpips_score_map(a, b, dec, bad), ConfigError);
    bad = SelectorConfig{};
    bad.layers = {2};
    CHECK_THROWS_AS(lpips_score_map(a, b, dec, bad), ConfigError);
    CHECK_THROWS_AS(lpips_score_map(a, random_latent(4, 5, 8, 1), dec, {}), DimensionError);
    CHECK(parse_selector_metric("raw-l2") == SelectorMetric::raw_l2);
    CHECK(parse_selector_metric("lpips-like") == SelectorMetric::lpips_like);
    CHECK_FALSE(parse_selector_metric("l1").has_value());
}

TEST_CASE("raw l2 score") {
    const LatentGrid a = random_latent(4, 4, 8, 3);
    const ScoreMap z = raw_l2_score_map(a, a);
    for (double v : z.scores) CHECK(v == 0.0);

    // Dyadic values keep the shifted differences exact.
    LatentGrid y(4, 4, 8);
    SplitMix64 rng(5);
    for (double& v : y.data()) v = static_cast<double>(static_cast<int>(rng.next() % 64) - 32) / 64.0;
    LatentGrid shifted = y;
    const double beta = 0.25;
    for (double& v : shifted.data()) v += beta;
    const ScoreMap s = raw_l2_score_map(shifted, y);
    for (double v : s.scores) CHECK(v == 8 * beta * beta);

    const LatentGrid b = random_latent(4, 4, 8, 4);
    const ScoreMap r = raw_l2_score_map(a, b);
    for (std::size_t i = 0; i < 16; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 8; ++k) acc += (a.token(i)[k] - b.token(i)[k]) * (a.token(i)[k] - b.token(i)[k]);
        CHECK(std::abs(r.scores[i] - acc) <= 1e-12);
    }
}

TEST_CASE("route_tokens examples") {
    ScoreMap s{1, 3, {0.1, 0.3, 0.2}};
    const TokenRouting r = route_tokens(s, 0.2);
    CHECK(r.reuse == std::vector<std::size_t>{0, 2});
    CHECK(r.active == std::vector<std::size_t>{1});
    CHECK(r.indicator == std::vector<std::uint8_t>{1, 0, 1});
    CHECK(route_tokens(s, -1.0).reuse.empty());
    CHECK(route_tokens(s, std::numeric_limits<double>::infinity()).active.empty());
    ScoreMap bad{1, 2, {0.0, std::numeric_limits<double>::quiet_NaN()}};
    CHECK_THROWS_AS(route_tokens(bad, 0.2), DomainError);
}

TEST_CASE("route_tokens is monotone in tau and partitions the grid") {
    SplitMix64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        ScoreMap s{4, 4, std::vector<double>(16)};
        for (double& v : s.scores) v = rng.uniform() * 0.5;
        double t1 = rng.uniform() * 0.5, t2 = rng.uniform() * 0.5;
        if (t1 > t2) std::swap(t1, t2);
        const TokenRouting a = route_tokens(s, t1), b = route_tokens(s, t2);
        CHECK_NOTHROW(a.validate());
        CHECK(a.active.size() + a.reuse.size() == 16);
        for (std::size_t i : a.reuse) CHECK(b.is_reused(i));
        for (std::size_t i = 0; i < 16; ++i) CHECK((s.scores[i] <= t1) == a.is_reused(i));
    }
}

TEST_CASE("score_map dispatches on the metric") {
    const LatentDecoder dec;
    const LatentGrid a = random_latent(4, 4, 8, 1), b = random_latent(4, 4, 8, 2);
    SelectorConfig cfg;
    cfg.metric = SelectorMetric::raw_l2;
    CHECK(score_map(a, b, dec, cfg) == raw_l2_score_map(a, b));
    cfg.metric = SelectorMetric::lpips_like;
    CHECK(score_map(a, b, dec, cfg) == lpips_score_map(a, b, dec, cfg));
}

TEST_CASE("global brightness weighs less in the perceptual score than in raw l2") {
    const LatentDecoder dec;
    SelectorConfig lp, l2;
    l2.metric = SelectorMetric::raw_l2;
    const TokenRect rect{3, 3, 4, 4};
    const auto mask = rect_mask(12, 12, std::span<const TokenRect>(&rect, 1));
    const double sign[8] = {-1, 1, 1, -1, 1, -1, 1, -1};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const LatentGrid y = smooth_latent(12, 12, 8, 700 + seed);
        LatentGrid bright = y, tex = y;
        for (double& v : bright.data()) v += 0.5;
        CHECK(score_map(bright, y, dec, l2).mean() > score_map(bright, y, dec, lp).mean());
        for (std::size_t i = 0; i < 144; ++i) {
            auto tok = tex.token(i);
            const double checker = ((i / 12 + i % 12) % 2) ? 1.0 : -1.0;
            for (std::size_t k = 0; k < 8; ++k) tok[k] += 0.1 + (mask[i] ? 0.3 * sign[k] * checker : 0.0);
        }
        auto contrast = [&](const ScoreMap& s) {
            double in = 0.0, out = 0.0;
            for (std::size_t i = 0; i < 144; ++i) (mask[i] ? in : out) += s.scores[i];
            return (in / 16.0) / (out / 128.0);
        };
        CHECK(contrast(score_map(tex, y, dec, lp)) > contrast(score_map(tex, y, dec, l2)));
    }
}
