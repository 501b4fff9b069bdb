// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace spotflow {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

/// Dense row-major tensor of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor matrix(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }

    // 2-D conveniences.
    std::size_t rows() const { return shape_.at(0); }
    std::size_t cols() const { return shape_.at(1); }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * shape_[1], shape_[1]}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * shape_[1], shape_[1]}; }

    // 3-D (h x w x c) conveniences.
    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Floating-point operation tally for one logical run.
struct FlopCounter {
    std::uint64_t matmul_flops = 0;
    std::uint64_t softmax_flops = 0;
    std::uint64_t elementwise_flops = 0;
    std::uint64_t attention_query_tokens = 0;

    std::uint64_t total_flops() const { return matmul_flops + softmax_flops + elementwise_flops; }
    void reset() { *this = FlopCounter{}; }

    FlopCounter& operator+=(const FlopCounter& o);
    friend FlopCounter operator-(FlopCounter a, const FlopCounter& b);
    friend bool operator==(const FlopCounter&, const FlopCounter&) = default;
};

// Per-element operation costs charged by the elementwise kernels.
inline constexpr std::uint64_t kSoftmaxFlopsPerElement = 4;  // subtract max, exp, accumulate, scale

/// Dense product; charges 2*m*k*n to counter.matmul_flops.
Tensor matmul(const Tensor& a, const Tensor& b, FlopCounter& counter);

/// a * b^T without materializing the transpose.
Tensor matmul_transposed(const Tensor& a, const Tensor& b, FlopCounter& counter);

Tensor transpose(const Tensor& a);

/// Row-wise softmax stabilized by subtracting each row's maximum.
Tensor softmax_rows(const Tensor& x);
Tensor softmax_rows(const Tensor& x, FlopCounter& counter);

/// Unit-L2-normalizes each location's channel vector; zero vectors stay zero.
Tensor channel_normalize(const Tensor& x);

/// Non-overlapping average pooling on an h x w x c tensor (kernel must equal stride).
Tensor avg_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride);

/// Bilinear resize, align-corners-false (half-pixel centers, edge clamped).
Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w);

/// Selects rows of a 2-D tensor in the given order.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

/// Stacks 2-D tensors with equal column counts vertically.
Tensor concat_rows(std::initializer_list<const Tensor*> parts);

}  // namespace spotflow
