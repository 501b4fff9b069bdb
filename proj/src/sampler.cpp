// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "spotflow/sampler.hpp"

#include <chrono>
#include <string>

#include "spotflow/errors.hpp"

namespace spotflow {

TimeSchedule::TimeSchedule(std::vector<double> knots) : knots_(std::move(knots)) {
    if (knots_.size() < 2) throw ConfigError("time schedule needs at least two knots");
    if (knots_.front() != 0.0 || knots_.back() != 1.0) throw ConfigError("time schedule must run from 0 to 1 exactly");
    for (std::size_t i = 1; i < knots_.size(); ++i) {
        if (!(knots_[i] > knots_[i - 1])) {
            throw ConfigError("time schedule is not strictly increasing at knot " + std::to_string(i));
        }
    }
}

TimeSchedule uniform_schedule(std::size_t T) {
    if (T < 2) throw ConfigError("uniform_schedule requires T >= 2, got " + std::to_string(T));
    std::vector<double> knots(T + 1);
    for (std::size_t i = 0; i <= T; ++i) knots[i] = static_cast<double>(i) / static_cast<double>(T);
    return TimeSchedule(std::move(knots));
}

LatentGrid euler_step(const LatentGrid& x_t, const LatentGrid& v, double t_i, double t_prev) {
    require_same_shape(x_t, v, "euler_step");
    if (!(t_i > t_prev) || !(t_prev >= 0.0)) {
        throw DomainError("euler_step: step from t=" + std::to_string(t_i) + " to t=" + std::to_string(t_prev) +
                          " has non-positive width");
    }
    const double dt = t_i - t_prev;
    LatentGrid out = x_t;
    auto o = out.data();
    auto vv = v.data();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] -= dt * vv[k];
    return out;
}

LatentGrid reconstruct_x0(const LatentGrid& x_t, const LatentGrid& v, double t) {
    require_same_shape(x_t, v, "reconstruct_x0");
    if (!(t > 0.0 && t <= 1.0)) throw DomainError("reconstruct_x0: t must lie in (0, 1]");
    LatentGrid out = x_t;
    auto o = out.data();
    auto vv = v.data();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] -= t * vv[k];
    return out;
}

BaselineResult run_baseline(const VelocityModel& model, const LatentGrid& y, const PromptEmbedding& p,
                            const TimeSchedule& schedule, std::uint64_t seed, const LatentDecoder& decoder,
                            const StepObserver& observer) {
    const auto start = std::chrono::steady_clock::now();
    BaselineResult result;
    result.report.label = "baseline";
    result.report.model = std::string(model.name());
    result.report.tokens = y.tokens();

    LatentGrid x = gaussian_latent(y.h(), y.w(), y.c(), seed);
    FlopCounter counter;
    for (std::size_t i = schedule.steps(); i >= 1; --i) {
        const double t = schedule.t(i);
        const FlopCounter before = counter;
        const ForwardResult fwd = model.forward_full(x, y, p, t, counter);
        const FlopCounter used = counter - before;
        LatentGrid next = euler_step(x, fwd.velocity, t, schedule.t(i - 1));
        const LatentGrid x0 = reconstruct_x0(x, fwd.velocity, t);

        StepRecord rec;
        rec.index = i;
        rec.t = t;
        rec.kind = StepKind::full;
        rec.active = y.tokens();
        rec.forward_flops = used.total_flops();
        rec.attention_query_tokens = used.attention_query_tokens;
        result.report.steps.push_back(rec);
        if (observer) {
            StepTrace tr;
            tr.index = i;
            tr.t = t;
            tr.x_before = &x;
            tr.x_after = &next;
            tr.x0_hat = &x0;
            observer(tr);
        }
        x = std::move(next);
    }
    result.final_latent = x;
    result.image = decoder.decode_pixels(x);
    result.report.finalize();
    result.report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace spotflow
