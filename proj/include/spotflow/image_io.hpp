// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "spotflow/decoder.hpp"
#include "spotflow/routing.hpp"
#include "spotflow/selector.hpp"

namespace spotflow {

/// Binary PPM (P6), 8 bits per channel, values clamped to [0, 1] then rounded.
void write_ppm(const PixelImage& image, const std::filesystem::path& path);

/// Binary PGM (P5) of an h x w field, min-max scaled to 0..255 (a constant field maps to 0).
void write_pgm(std::span<const double> values, std::size_t h, std::size_t w, const std::filesystem::path& path);

/// Active tokens white, reused tokens black.
void write_routing_pgm(const TokenRouting& routing, std::size_t h, std::size_t w, const std::filesystem::path& path);

/// row,col,score with round-trip precision.
void write_score_csv(const ScoreMap& scores, const std::filesystem::path& path);

/// 8-bit encoding written by write_ppm (for tests and tools).
std::vector<std::uint8_t> encode_ppm(const PixelImage& image);
std::vector<std::uint8_t> encode_pgm(std::span<const double> values, std::size_t h, std::size_t w);

}  // namespace spotflow
