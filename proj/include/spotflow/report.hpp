// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spotflow {

inline constexpr std::string_view kReportSchema = "spotflow-report/1";

enum class StepKind { full, spot, refresh, skipped };

std::string_view step_kind_name(StepKind kind);
std::optional<StepKind> parse_step_kind(std::string_view name);

struct StepRecord {
    std::size_t index = 0;  // schedule knot i; the step integrates t_i -> t_{i-1}
    double t = 0.0;
    StepKind kind = StepKind::full;
    std::size_t active = 0;
    std::size_t reuse = 0;
    std::uint64_t forward_flops = 0;
    std::uint64_t attention_query_tokens = 0;
    bool reset_fired = false;
    bool accelerator_hit = false;
    double alpha = 1.0;
    std::size_t migrations = 0;  // tokens that moved from reuse to active at this step

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct RunTotals {
    std::uint64_t forward_flops = 0;
    std::uint64_t attention_query_tokens = 0;
    std::uint64_t selector_flops = 0;
    std::size_t resets = 0;
    std::size_t accelerator_hits = 0;
    std::size_t migrations = 0;
    std::size_t model_calls = 0;

    friend bool operator==(const RunTotals&, const RunTotals&) = default;
};

/// Per-step accounting for one pipeline run.
struct RunReport {
    std::string label;
    std::string model;
    std::size_t tokens = 0;
    std::vector<StepRecord> steps;
    RunTotals totals;
    double wall_clock_seconds = 0.0;

    /// Recomputes totals from the step records (selector_flops is kept as is).
    void finalize();
    /// Forward FLOPs of the steps whose schedule index is <= max_index.
    std::uint64_t forward_flops_from(std::size_t max_index) const;

    friend bool operator==(const RunReport&, const RunReport&) = default;
};

struct QualityScores {
    double psnr = 0.0;
    double ssim = 0.0;
    double region_psnr = 0.0;

    friend bool operator==(const QualityScores&, const QualityScores&) = default;
};

/// Rounds to 9 significant digits, the precision written to reports.
double round_report_real(double v);

/// Writes the report as a "spotflow-report/1" JSON document. When csv_path is
/// given, also writes the per-step table there. Throws IoError with the path.
void write_report(const RunReport& report, const std::optional<QualityScores>& scores,
                  const std::filesystem::path& path,
                  const std::optional<std::filesystem::path>& csv_path = std::nullopt);

std::string report_to_json(const RunReport& report, const std::optional<QualityScores>& scores);

struct LoadedReport {
    RunReport report;
    std::optional<QualityScores> scores;
};

/// Parses a document produced by write_report. Throws IoError or ConfigError.
LoadedReport read_report(const std::filesystem::path& path);
LoadedReport report_from_json(std::string_view text);

void write_steps_csv(const RunReport& report, const std::filesystem::path& path);

}  // namespace spotflow
