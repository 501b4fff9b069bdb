// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "spotflow/decoder.hpp"
#include "spotflow/report.hpp"

namespace spotflow {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) for images in [0, 1]; identical images give kPsnrCap.
double psnr(const PixelImage& a, const PixelImage& b);

/// Mean SSIM over non-overlapping window x window blocks of the luma (channel mean).
double ssim(const PixelImage& a, const PixelImage& b, std::size_t window = 8, double c1 = 1e-4, double c2 = 9e-4);

/// PSNR over the pixels of tokens whose include flag is set (token grid of
/// include.size() entries, patch x patch pixels each). Returns kPsnrCap when
/// the region is empty or identical.
double region_psnr(const PixelImage& a, const PixelImage& b, const std::vector<bool>& include, std::size_t patch);

struct Speedup {
    double flops = 1.0;   // baseline forward FLOPs / spot forward FLOPs
    bool infinite = false;  // spot run performed no forward FLOPs
    double query_tokens = 1.0;  // same ratio for attention query tokens
    double wall_clock = 1.0;  // informational only
};

Speedup speedup_ratio(const RunReport& baseline, const RunReport& spot);

}  // namespace spotflow
