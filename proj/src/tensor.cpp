// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "spotflow/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "spotflow/errors.hpp"
#include "spotflow/kernels.hpp"

namespace spotflow {

namespace {

std::size_t shape_product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                             shape_to_string(t.shape()));
    }
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size()) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_to_string(shape_));
    }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged rows in Tensor::from_rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

FlopCounter& FlopCounter::operator+=(const FlopCounter& o) {
    matmul_flops += o.matmul_flops;
    softmax_flops += o.softmax_flops;
    elementwise_flops += o.elementwise_flops;
    attention_query_tokens += o.attention_query_tokens;
    return *this;
}

FlopCounter operator-(FlopCounter a, const FlopCounter& b) {
    a.matmul_flops -= b.matmul_flops;
    a.softmax_flops -= b.softmax_flops;
    a.elementwise_flops -= b.elementwise_flops;
    a.attention_query_tokens -= b.attention_query_tokens;
    return a;
}

Tensor matmul(const Tensor& a, const Tensor& b, FlopCounter& counter) {
    require_rank(a, 2, "matmul lhs");
    require_rank(b, 2, "matmul rhs");
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul inner dimensions disagree: " + shape_to_string(a.shape()) + " x " +
                             shape_to_string(b.shape()));
    }
    Tensor c = Tensor::matrix(a.rows(), b.cols());
    if (c.size() != 0 && a.cols() != 0) kernels::gemm(a.data().data(), b.data().data(), c.data().data(), a.rows(), a.cols(), b.cols());
    counter.matmul_flops += 2ull * a.rows() * a.cols() * b.cols();
    return c;
}

Tensor matmul_transposed(const Tensor& a, const Tensor& b, FlopCounter& counter) {
    require_rank(a, 2, "matmul_transposed lhs");
    require_rank(b, 2, "matmul_transposed rhs");
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_transposed inner dimensions disagree: " + shape_to_string(a.shape()) +
                             " x " + shape_to_string(b.shape()) + "^T");
    }
    Tensor c = Tensor::matrix(a.rows(), b.rows());
    if (c.size() != 0 && a.cols() != 0) kernels::gemm_bt(a.data().data(), b.data().data(), c.data().data(), a.rows(), a.cols(), b.rows());
    counter.matmul_flops += 2ull * a.rows() * a.cols() * b.rows();
    return c;
}

Tensor transpose(const Tensor& a) {
    require_rank(a, 2, "transpose");
    Tensor t = Tensor::matrix(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Tensor softmax_rows(const Tensor& x, FlopCounter& counter) {
    require_rank(x, 2, "softmax_rows");
    Tensor out = x;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        if (row.empty()) continue;
        const double mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            sum += v;
        }
        const double inv = 1.0 / sum;
        for (double& v : row) v *= inv;
    }
    counter.softmax_flops += kSoftmaxFlopsPerElement * x.size();
    return out;
}

Tensor softmax_rows(const Tensor& x) {
    FlopCounter scratch;
    return softmax_rows(x, scratch);
}

Tensor channel_normalize(const Tensor& x) {
    require_rank(x, 3, "channel_normalize");
    constexpr double kEps = 1e-12;
    const std::size_t c = x.dim(2);
    Tensor out = x;
    auto data = out.data();
    for (std::size_t base = 0; base < data.size(); base += c) {
        double ss = 0.0;
        for (std::size_t k = 0; k < c; ++k) ss += data[base + k] * data[base + k];
        const double inv = 1.0 / (std::sqrt(ss) + kEps);
        for (std::size_t k = 0; k < c; ++k) data[base + k] *= inv;
    }
    return out;
}

Tensor avg_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride) {
    require_rank(x, 3, "avg_pool2d");
    if (kernel == 0 || kernel != stride) {
        throw DimensionError("avg_pool2d supports only non-overlapping pooling (kernel == stride), got kernel " +
                             std::to_string(kernel) + " stride " + std::to_string(stride));
    }
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    if (h % stride != 0 || w % stride != 0) {
        throw DimensionError("avg_pool2d: input " + shape_to_string(x.shape()) + " not divisible by stride " +
                             std::to_string(stride));
    }
    const std::size_t oh = h / stride, ow = w / stride;
    Tensor out({oh, ow, c});
    const double inv = 1.0 / static_cast<double>(kernel * kernel);
    for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j)
            for (std::size_t k = 0; k < c; ++k) {
                double s = 0.0;
                for (std::size_t di = 0; di < kernel; ++di)
                    for (std::size_t dj = 0; dj < kernel; ++dj) s += x(i * stride + di, j * stride + dj, k);
                out(i, j, k) = s * inv;
            }
    return out;
}

namespace {

struct Tap {
    std::size_t lo, hi;
    double frac;  // weight of hi
};

Tap half_pixel_tap(std::size_t dst, std::size_t in, std::size_t out) {
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    double src = (static_cast<double>(dst) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    const double max_src = static_cast<double>(in - 1);
    if (src > max_src) src = max_src;
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    return {lo, hi, src - static_cast<double>(lo)};
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w) {
    require_rank(x, 3, "bilinear_resize");
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    if (h == 0 || w == 0 || out_h == 0 || out_w == 0) {
        throw DimensionError("bilinear_resize requires non-empty grids, got " + shape_to_string(x.shape()) +
                             " -> " + std::to_string(out_h) + "x" + std::to_string(out_w));
    }
    if (h == out_h && w == out_w) return x;
    Tensor out({out_h, out_w, c});
    for (std::size_t i = 0; i < out_h; ++i) {
        const Tap ty = half_pixel_tap(i, h, out_h);
        for (std::size_t j = 0; j < out_w; ++j) {
            const Tap tx = half_pixel_tap(j, w, out_w);
            for (std::size_t k = 0; k < c; ++k) {
                const double top = x(ty.lo, tx.lo, k) * (1.0 - tx.frac) + x(ty.lo, tx.hi, k) * tx.frac;
                const double bot = x(ty.hi, tx.lo, k) * (1.0 - tx.frac) + x(ty.hi, tx.hi, k) * tx.frac;
                out(i, j, k) = top * (1.0 - ty.frac) + bot * ty.frac;
            }
        }
    }
    return out;
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
    require_rank(x, 2, "gather_rows");
    Tensor out = Tensor::matrix(rows.size(), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= x.rows()) throw DimensionError("gather_rows: row index out of range");
        std::copy_n(x.row(rows[r]).begin(), x.cols(), out.row(r).begin());
    }
    return out;
}

Tensor concat_rows(std::initializer_list<const Tensor*> parts) {
    std::size_t rows = 0, cols = 0;
    bool first = true;
    for (const Tensor* p : parts) {
        require_rank(*p, 2, "concat_rows");
        if (first) {
            cols = p->cols();
            first = false;
        } else if (p->cols() != cols) {
            throw DimensionError("concat_rows: column mismatch " + shape_to_string(p->shape()));
        }
        rows += p->rows();
    }
    Tensor out = Tensor::matrix(rows, cols);
    std::size_t off = 0;
    for (const Tensor* p : parts) {
        std::copy(p->data().begin(), p->data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off * cols));
        off += p->rows();
    }
    return out;
}

}  // namespace spotflow
