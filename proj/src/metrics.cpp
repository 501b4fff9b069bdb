// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "spotflow/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "spotflow/errors.hpp"

namespace spotflow {

namespace {

void require_same_dims(const PixelImage& a, const PixelImage& b, const char* what) {
    if (a.height != b.height || a.width != b.width || a.data.size() != b.data.size()) {
        throw DimensionError(std::string(what) + ": image dimensions differ (" + std::to_string(a.height) + "x" +
                             std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                             std::to_string(b.width) + ")");
    }
}

double psnr_from_mse(double mse) {
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ratio(double num, double den) {
    if (den == 0.0) return num == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return num / den;
}

}  // namespace

double psnr(const PixelImage& a, const PixelImage& b) {
    require_same_dims(a, b, "psnr");
    if (a.data.empty()) return kPsnrCap;
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sum += d * d;
    }
    return psnr_from_mse(sum / static_cast<double>(a.data.size()));
}

double ssim(const PixelImage& a, const PixelImage& b, std::size_t window, double c1, double c2) {
    require_same_dims(a, b, "ssim");
    if (window == 0 || a.height % window != 0 || a.width % window != 0 || a.height == 0) {
        throw DimensionError("ssim: image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                             " is not divisible into " + std::to_string(window) + "-pixel windows");
    }
    auto luma = [](const PixelImage& img, std::size_t y, std::size_t x) {
        return (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0;
    };
    const double n = static_cast<double>(window * window);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t wy = 0; wy < a.height; wy += window)
        for (std::size_t wx = 0; wx < a.width; wx += window) {
            double ma = 0.0, mb = 0.0;
            for (std::size_t y = wy; y < wy + window; ++y)
                for (std::size_t x = wx; x < wx + window; ++x) {
                    ma += luma(a, y, x);
                    mb += luma(b, y, x);
                }
            ma /= n;
            mb /= n;
            double va = 0.0, vb = 0.0, cov = 0.0;
            for (std::size_t y = wy; y < wy + window; ++y)
                for (std::size_t x = wx; x < wx + window; ++x) {
                    const double da = luma(a, y, x) - ma, db = luma(b, y, x) - mb;
                    va += da * da;
                    vb += db * db;
                    cov += da * db;
                }
            va /= n;
            vb /= n;
            cov /= n;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return total / static_cast<double>(count);
}

double region_psnr(const PixelImage& a, const PixelImage& b, const std::vector<bool>& include, std::size_t patch) {
    require_same_dims(a, b, "region_psnr");
    if (patch == 0 || a.height % patch != 0 || a.width % patch != 0) {
        throw DimensionError("region_psnr: image is not a whole number of patches");
    }
    const std::size_t th = a.height / patch, tw = a.width / patch;
    if (include.size() != th * tw) {
        throw DimensionError("region_psnr: mask covers " + std::to_string(include.size()) + " tokens, image has " +
                             std::to_string(th * tw));
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t ti = 0; ti < th; ++ti)
        for (std::size_t tj = 0; tj < tw; ++tj) {
            if (!include[ti * tw + tj]) continue;
            for (std::size_t y = ti * patch; y < (ti + 1) * patch; ++y)
                for (std::size_t x = tj * patch; x < (tj + 1) * patch; ++x)
                    for (std::size_t ch = 0; ch < 3; ++ch) {
                        const double d = a.at(y, x, ch) - b.at(y, x, ch);
                        sum += d * d;
                        ++count;
                    }
        }
    if (count == 0) return kPsnrCap;
    return psnr_from_mse(sum / static_cast<double>(count));
}

Speedup speedup_ratio(const RunReport& baseline, const RunReport& spot) {
    Speedup s;
    const auto base = static_cast<double>(baseline.totals.forward_flops);
    const auto mine = static_cast<double>(spot.totals.forward_flops);
    s.flops = ratio(base, mine);
    s.infinite = std::isinf(s.flops);
    s.query_tokens = ratio(static_cast<double>(baseline.totals.attention_query_tokens),
                           static_cast<double>(spot.totals.attention_query_tokens));
    s.wall_clock = ratio(baseline.wall_clock_seconds, spot.wall_clock_seconds);
    return s;
}

}  // namespace spotflow
