// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <string>

#include "spotflow/kernels.hpp"

namespace spotflow::kernels {

#if !defined(SPOTFLOW_BUILD_AVX2)
// Build without the AVX2 translation unit: route the symbols to scalar.
namespace avx2 {
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    scalar::gemm(a, b, c, m, k, n);
}
void gemm_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    scalar::gemm_bt(a, b, c, m, k, n);
}
double dot(const double* x, const double* y, std::size_t n) { return scalar::dot(x, y, n); }
double squared_distance(const double* x, const double* y, std::size_t n) {
    return scalar::squared_distance(x, y, n);
}
}  // namespace avx2
#endif

namespace {

bool cpu_has_avx2() {
#if defined(SPOTFLOW_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Isa initial_isa() {
    if (const char* env = std::getenv("SPOTFLOW_ISA")) {
        const std::string v(env);
        if (v == "scalar") return Isa::scalar;
        if (v == "avx2" && cpu_has_avx2()) return Isa::avx2;
    }
    return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) { return isa == Isa::scalar || cpu_has_avx2(); }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

bool set_isa(Isa isa) {
    if (!isa_available(isa)) return false;
    current().store(isa, std::memory_order_relaxed);
    return true;
}

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    if (active_isa() == Isa::avx2) return avx2::gemm(a, b, c, m, k, n);
    scalar::gemm(a, b, c, m, k, n);
}

void gemm_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    if (active_isa() == Isa::avx2) return avx2::gemm_bt(a, b, c, m, k, n);
    scalar::gemm_bt(a, b, c, m, k, n);
}

double dot(const double* x, const double* y, std::size_t n) {
    return active_isa() == Isa::avx2 ? avx2::dot(x, y, n) : scalar::dot(x, y, n);
}

double squared_distance(const double* x, const double* y, std::size_t n) {
    return active_isa() == Isa::avx2 ? avx2::squared_distance(x, y, n) : scalar::squared_distance(x, y, n);
}

}  // namespace spotflow::kernels
