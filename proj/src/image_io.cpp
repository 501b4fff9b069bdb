// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "spotflow/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "spotflow/errors.hpp"

namespace spotflow {

namespace {

std::uint8_t to_byte(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

void append_header(std::vector<std::uint8_t>& out, const std::string& header) {
    out.insert(out.end(), header.begin(), header.end());
}

void write_bytes(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("failed writing " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_ppm(const PixelImage& image) {
    if (image.data.size() != image.height * image.width * 3) throw DimensionError("encode_ppm: inconsistent image");
    std::vector<std::uint8_t> out;
    append_header(out, "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n");
    out.reserve(out.size() + image.data.size());
    for (double v : image.data) out.push_back(to_byte(v));
    return out;
}

std::vector<std::uint8_t> encode_pgm(std::span<const double> values, std::size_t h, std::size_t w) {
    if (values.size() != h * w) throw DimensionError("encode_pgm: value count does not match " +
                                                     std::to_string(h) + "x" + std::to_string(w));
    double lo = 0.0, hi = 0.0;
    if (!values.empty()) {
        const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
        lo = *mn;
        hi = *mx;
    }
    std::vector<std::uint8_t> out;
    append_header(out, "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n");
    for (double v : values) out.push_back(hi > lo ? to_byte((v - lo) / (hi - lo)) : 0);
    return out;
}

void write_ppm(const PixelImage& image, const std::filesystem::path& path) { write_bytes(encode_ppm(image), path); }

void write_pgm(std::span<const double> values, std::size_t h, std::size_t w, const std::filesystem::path& path) {
    write_bytes(encode_pgm(values, h, w), path);
}

void write_routing_pgm(const TokenRouting& routing, std::size_t h, std::size_t w, const std::filesystem::path& path) {
    if (routing.tokens() != h * w) throw DimensionError("write_routing_pgm: routing size does not match grid");
    std::vector<std::uint8_t> out;
    append_header(out, "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n");
    for (std::size_t i = 0; i < routing.tokens(); ++i) out.push_back(routing.is_reused(i) ? 0 : 255);
    write_bytes(out, path);
}

void write_score_csv(const ScoreMap& scores, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << "row,col,score\n";
    char buf[40];
    for (std::size_t i = 0; i < scores.scores.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", scores.scores[i]);
        f << i / scores.w << ',' << i % scores.w << ',' << buf << '\n';
    }
    if (!f) throw IoError("failed writing " + path.string());
}

}  // namespace spotflow
