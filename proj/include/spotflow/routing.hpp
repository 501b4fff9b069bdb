// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace spotflow {

/// Partition of image tokens into the regenerated (active) and reused sets.
/// Both index lists are sorted ascending; indicator[i] == 1 iff i is reused.
struct TokenRouting {
    std::vector<std::size_t> active;
    std::vector<std::size_t> reuse;
    std::vector<std::uint8_t> indicator;
    double tau = 0.0;

    std::size_t tokens() const { return indicator.size(); }
    bool is_reused(std::size_t i) const { return indicator[i] != 0; }

    /// Throws RoutingError when the sets overlap, are unsorted, or do not cover all tokens.
    void validate() const;

    static TokenRouting all_active(std::size_t tokens, double tau = -1.0);
    /// Builds a routing from a reuse indicator.
    static TokenRouting from_indicator(std::vector<std::uint8_t> indicator, double tau);

    friend bool operator==(const TokenRouting&, const TokenRouting&) = default;
};

}  // namespace spotflow
