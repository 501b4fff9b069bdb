// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Inner-loop kernels with a scalar reference and an AVX2 variant chosen at
// runtime. The GEMM variants accumulate every output element in ascending k
// without FMA, so both ISAs produce bit-identical products. Reductions
// (dot, squared distance) reassociate in the SIMD path and agree with the
// scalar reference only up to rounding.

#include <cstddef>
#include <string_view>

namespace spotflow::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// True when the CPU and the build both support the ISA.
bool isa_available(Isa isa);

/// Currently dispatched ISA. Defaults to the best available, or to the value
/// of SPOTFLOW_ISA ("scalar" / "avx2") when set.
Isa active_isa();

/// Force an ISA (tests and benchmarking). Returns false if unavailable.
bool set_isa(Isa isa);

// c[m x n] = a[m x k] * b[k x n], all row-major with tight strides.
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
// c[m x n] = a[m x k] * b[n x k]^T.
void gemm_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double squared_distance(const double* x, const double* y, std::size_t n);

namespace scalar {
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void gemm_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double squared_distance(const double* x, const double* y, std::size_t n);
}  // namespace scalar

namespace avx2 {
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void gemm_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double squared_distance(const double* x, const double* y, std::size_t n);
}  // namespace avx2

}  // namespace spotflow::kernels
