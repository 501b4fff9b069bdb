// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "spotflow/decoder.hpp"
#include "spotflow/flow_model.hpp"
#include "spotflow/latent.hpp"
#include "spotflow/report.hpp"

namespace spotflow {

/// Knots t_0 = 0 < t_1 < ... < t_T = 1. Sampling walks from index T down to 0.
class TimeSchedule {
public:
    /// Throws ConfigError unless the knots are strictly increasing from exactly 0 to exactly 1.
    explicit TimeSchedule(std::vector<double> knots);
    std::size_t steps() const { return knots_.size() - 1; }
    double t(std::size_t i) const { return knots_.at(i); }
    const std::vector<double>& knots() const { return knots_; }

private:
    std::vector<double> knots_;
};

/// t_i = i / T; throws ConfigError for T < 2.
TimeSchedule uniform_schedule(std::size_t T);

/// x - (t_i - t_prev) * v; throws DomainError unless t_i > t_prev >= 0.
LatentGrid euler_step(const LatentGrid& x_t, const LatentGrid& v, double t_i, double t_prev);

/// x - t * v, the one-step estimate of the clean latent.
LatentGrid reconstruct_x0(const LatentGrid& x_t, const LatentGrid& v, double t);

/// State visible to step observers after each schedule step.
struct StepTrace {
    std::size_t index = 0;  // knot i the step started from
    double t = 0.0;
    StepKind kind = StepKind::full;
    const LatentGrid* x_before = nullptr;
    const LatentGrid* x_after = nullptr;
    const LatentGrid* x0_hat = nullptr;
    const ConditionCache* cache = nullptr;  // set when a cache exists after the step
};
using StepObserver = std::function<void(const StepTrace&)>;

struct BaselineResult {
    LatentGrid final_latent;
    PixelImage image;
    RunReport report;
};

/// Full-token sampling from seeded Gaussian noise with forward_full at every step.
BaselineResult run_baseline(const VelocityModel& model, const LatentGrid& y, const PromptEmbedding& p,
                            const TimeSchedule& schedule, std::uint64_t seed, const LatentDecoder& decoder,
                            const StepObserver& observer = {});

}  // namespace spotflow
