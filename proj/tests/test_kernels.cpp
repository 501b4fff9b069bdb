// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "doctest.h"
#include "spotflow/flow_model.hpp"
#include "spotflow/kernels.hpp"
#include "test_util.hpp"

using namespace spotflow;
namespace k = spotflow::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-2.0, 2.0);
    return v;
}

struct IsaGuard {
    k::Isa saved = k::active_isa();
    ~IsaGuard() { k::set_isa(saved); }
};

}  // namespace

TEST_CASE("isa names and scalar availability") {
    CHECK(k::isa_name(k::Isa::scalar) == "scalar");
    CHECK(k::isa_name(k::Isa::avx2) == "avx2");
    CHECK(k::isa_available(k::Isa::scalar));
    IsaGuard g;
    CHECK(k::set_isa(k::Isa::scalar));
    CHECK(k::active_isa() == k::Isa::scalar);
    CHECK(k::set_isa(k::Isa::avx2) == k::isa_available(k::Isa::avx2));
}

TEST_CASE("gemm variants are bit-identical across ISAs") {
    const std::size_t shapes[][3] = {{1, 1, 1}, {3, 5, 7}, {4, 8, 8}, {9, 13, 17}, {16, 64, 64}, {37, 16, 130}, {5, 1, 9}};
    for (const auto& s : shapes) {
        const std::size_t m = s[0], kk = s[1], n = s[2];
        const auto a = random_vec(m * kk, m * 131 + kk);
        const auto b = random_vec(kk * n, n * 17 + kk);
        const auto bt = random_vec(n * kk, n * 19 + kk);
        std::vector<double> c1(m * n), c2(m * n), d1(m * n), d2(m * n);
        k::scalar::gemm(a.data(), b.data(), c1.data(), m, kk, n);
        k::avx2::gemm(a.data(), b.data(), c2.data(), m, kk, n);
        CHECK(c1 == c2);
        k::scalar::gemm_bt(a.data(), bt.data(), d1.data(), m, kk, n);
        k::avx2::gemm_bt(a.data(), bt.data(), d2.data(), m, kk, n);
        CHECK(d1 == d2);
    }
}

TEST_CASE("scalar gemm matches a naive product exactly") {
    const std::size_t m = 6, kk = 11, n = 5;
    const auto a = random_vec(m * kk, 1), b = random_vec(kk * n, 2);
    std::vector<double> c(m * n);
    k::scalar::gemm(a.data(), b.data(), c.data(), m, kk, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < kk; ++p) s += a[i * kk + p] * b[p * n + j];
            CHECK(c[i * n + j] == s);
        }
}

TEST_CASE("reductions agree across ISAs up to rounding") {
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 16u, 33u, 1000u}) {
        const auto x = random_vec(n, n + 5), y = random_vec(n, n + 6);
        const double d1 = k::scalar::dot(x.data(), y.data(), n), d2 = k::avx2::dot(x.data(), y.data(), n);
        const double s1 = k::scalar::squared_distance(x.data(), y.data(), n);
        const double s2 = k::avx2::squared_distance(x.data(), y.data(), n);
        const double scale = 1.0 + static_cast<double>(n);
        CHECK(std::abs(d1 - d2) <= 1e-12 * scale);
        CHECK(std::abs(s1 - s2) <= 1e-12 * scale);
        CHECK(s2 >= 0.0);
    }
}

TEST_CASE("toy transformer output does not depend on the dispatched ISA") {
    IsaGuard g;
    const ModelConfig cfg = testutil::small_toy();
    const ToyDit model(cfg);
    const LatentGrid x = testutil::random_latent(4, 4, 4, 1), y = testutil::random_latent(4, 4, 4, 2);
    const PromptEmbedding p = seeded_prompt(3, cfg.d_model, 3);
    FlopCounter f1, f2;
    k::set_isa(k::Isa::scalar);
    const ForwardResult r1 = model.forward_full(x, y, p, 0.6, f1);
    k::set_isa(k::Isa::avx2);
    const ForwardResult r2 = model.forward_full(x, y, p, 0.6, f2);
    CHECK(r1.velocity == r2.velocity);
    CHECK(r1.kv == r2.kv);
    CHECK(f1 == f2);
}
