// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <immintrin.h>

#include <vector>

#include "spotflow/kernels.hpp"

namespace spotflow::kernels::avx2 {

namespace {

// One output row, columns [j0, n): accumulate in ascending k with mul + add.
void gemm_row_tail(const double* a_row, const double* b, double* c_row, std::size_t k, std::size_t n,
                   std::size_t j0) {
    std::size_t j = j0;
    for (; j + 4 <= n; j += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t p = 0; p < k; ++p) {
            acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(a_row[p]), _mm256_loadu_pd(b + p * n + j)));
        }
        _mm256_storeu_pd(c_row + j, acc);
    }
    for (; j < n; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += a_row[p] * b[p * n + j];
        c_row[j] = s;
    }
}

}  // namespace

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    std::size_t i = 0;
    // 4 rows x 8 columns register tile.
    for (; i + 4 <= m; i += 4) {
        const double* a0 = a + (i + 0) * k;
        const double* a1 = a + (i + 1) * k;
        const double* a2 = a + (i + 2) * k;
        const double* a3 = a + (i + 3) * k;
        std::size_t j = 0;
        for (; j + 8 <= n; j += 8) {
            __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
            __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
            __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
            __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
            for (std::size_t p = 0; p < k; ++p) {
                const __m256d b0 = _mm256_loadu_pd(b + p * n + j);
                const __m256d b1 = _mm256_loadu_pd(b + p * n + j + 4);
                __m256d s = _mm256_set1_pd(a0[p]);
                c00 = _mm256_add_pd(c00, _mm256_mul_pd(s, b0));
                c01 = _mm256_add_pd(c01, _mm256_mul_pd(s, b1));
                s = _mm256_set1_pd(a1[p]);
                c10 = _mm256_add_pd(c10, _mm256_mul_pd(s, b0));
                c11 = _mm256_add_pd(c11, _mm256_mul_pd(s, b1));
                s = _mm256_set1_pd(a2[p]);
                c20 = _mm256_add_pd(c20, _mm256_mul_pd(s, b0));
                c21 = _mm256_add_pd(c21, _mm256_mul_pd(s, b1));
                s = _mm256_set1_pd(a3[p]);
                c30 = _mm256_add_pd(c30, _mm256_mul_pd(s, b0));
                c31 = _mm256_add_pd(c31, _mm256_mul_pd(s, b1));
            }
            _mm256_storeu_pd(c + (i + 0) * n + j, c00);
            _mm256_storeu_pd(c + (i + 0) * n + j + 4, c01);
            _mm256_storeu_pd(c + (i + 1) * n + j, c10);
            _mm256_storeu_pd(c + (i + 1) * n + j + 4, c11);
            _mm256_storeu_pd(c + (i + 2) * n + j, c20);
            _mm256_storeu_pd(c + (i + 2) * n + j + 4, c21);
            _mm256_storeu_pd(c + (i + 3) * n + j, c30);
            _mm256_storeu_pd(c + (i + 3) * n + j + 4, c31);
        }
        for (std::size_t r = 0; r < 4; ++r) gemm_row_tail(a + (i + r) * k, b, c + (i + r) * n, k, n, j);
    }
    for (; i < m; ++i) gemm_row_tail(a + i * k, b, c + i * n, k, n, 0);
}

void gemm_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    std::vector<double> bt(k * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
    gemm(a, bt.data(), c, m, k, n);
}

namespace {
double hsum(__m256d v) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, v);
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}
}  // namespace

double dot(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double squared_distance(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

}  // namespace spotflow::kernels::avx2
