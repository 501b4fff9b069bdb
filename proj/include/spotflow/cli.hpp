// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spotflow/metrics.hpp"
#include "spotflow/pipeline.hpp"
#include "spotflow/sampler.hpp"
#include "spotflow/scenario.hpp"

namespace spotflow {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

inline constexpr std::string_view kCompareSchema = "spotflow-compare/1";

struct CompareOutcome {
    BaselineResult baseline;
    EditResult spot;
    Speedup speedup;
    QualityScores quality;   // spot vs baseline; region_psnr is outside the mask vs the decoded condition
    double edit_region_psnr = 0.0;  // inside the mask, spot vs baseline
    double mean_reuse = 0.0;        // mean selector reuse-set size over spot steps
};

/// Runs the baseline and the selective pipeline on identical seeds.
CompareOutcome compare_scenario(const Scenario& scenario);

std::string compare_to_json(const CompareOutcome& outcome);

/// Applies one sweep value to a scenario. Throws ConfigError for unknown
/// parameters or unparsable values.
Scenario apply_sweep_value(Scenario scenario, const std::string& param, const std::string& value);

int cmd_run(const std::filesystem::path& scenario_path, const std::filesystem::path& out_dir,
            std::optional<std::uint64_t> seed_override, std::ostream& err);
int cmd_compare(const std::filesystem::path& scenario_path, const std::filesystem::path& out_dir,
                std::optional<std::uint64_t> seed_override, std::ostream& err);
/// Parallelism is capped by SPOTFLOW_THREADS (default: hardware concurrency).
int cmd_sweep(const std::filesystem::path& scenario_path, const std::string& param,
              const std::vector<std::string>& values, const std::filesystem::path& out_dir,
              std::optional<std::uint64_t> seed_override, std::ostream& err);

}  // namespace spotflow
