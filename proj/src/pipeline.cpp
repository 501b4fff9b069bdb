// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "spotflow/pipeline.hpp"

#include <chrono>
#include <string>

#include "spotflow/errors.hpp"

namespace spotflow {

void PipelineConfig::validate() const {
    if (T < 2) throw ConfigError("pipeline: T must be >= 2, got " + std::to_string(T));
    if (K_init < 1 || K_init >= T) {
        throw ConfigError("pipeline: K_init must satisfy 1 <= K_init < T (K_init=" + std::to_string(K_init) +
                          ", T=" + std::to_string(T) + ")");
    }
    if (fusion.reset_interval && *fusion.reset_interval == 0) throw ConfigError("pipeline: reset_interval must be >= 1");
    if (!fusion.alpha) throw ConfigError("pipeline: fusion alpha schedule is empty");
    if (accelerator.kind == AcceleratorKind::velocity_reuse && accelerator.period && *accelerator.period < 2) {
        throw ConfigError("pipeline: accelerator period must be >= 2");
    }
}

PipelineConfig attach_velocity_reuse_accelerator(PipelineConfig config, std::size_t period) {
    if (period < 2) throw ConfigError("velocity-reuse accelerator period must be >= 2, got " + std::to_string(period));
    config.accelerator.kind = AcceleratorKind::velocity_reuse;
    config.accelerator.period = period;
    return config;
}

ResetOutcome maybe_reset(ConditionCache& cache, const FusionConfig& config, std::size_t step,
                         const std::function<std::vector<BlockKV>()>& refresh) {
    ++cache.steps_since_reset;
    if (!config.reset_interval || cache.steps_since_reset < *config.reset_interval) return ResetOutcome::kept;
    if (refresh) {
        const std::size_t tokens = cache.image_tokens();
        cache = init_cache(refresh(), step, tokens);
    }
    cache.steps_since_reset = 0;
    return ResetOutcome::refreshed;
}

namespace {

class ScoreEngine {
public:
    ScoreEngine(const LatentGrid& y, const LatentDecoder& decoder, const SelectorConfig& config)
        : y_(y), decoder_(decoder), config_(config) {
        config_.validate(decoder_.layer_count());
        if (config_.metric == SelectorMetric::lpips_like) y_features_ = decoder_.decode_features(y_);
    }

    TokenRouting route(const LatentGrid& x0_hat, FlopCounter& counter) const {
        const ScoreMap s = config_.metric == SelectorMetric::lpips_like
                               ? lpips_score_map(x0_hat, y_features_, decoder_, config_, &counter)
                               : raw_l2_score_map(x0_hat, y_, &counter);
        return route_tokens(s, config_.tau);
    }

private:
    const LatentGrid& y_;
    const LatentDecoder& decoder_;
    SelectorConfig config_;
    DecoderFeatures y_features_;
};

void record_step(RunReport& report, std::size_t index, double t, StepKind kind, std::size_t active,
                 std::size_t tokens, const FlopCounter& used) {
    StepRecord rec;
    rec.index = index;
    rec.t = t;
    rec.kind = kind;
    rec.active = active;
    rec.reuse = tokens - active;
    rec.forward_flops = used.total_flops();
    rec.attention_query_tokens = used.attention_query_tokens;
    report.steps.push_back(rec);
}

}  // namespace

EditResult run_spotedit(const VelocityModel& model, const LatentGrid& y, const PromptEmbedding& p,
                        const LatentDecoder& decoder, const PipelineConfig& config, const StepObserver& observer) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const TimeSchedule schedule = uniform_schedule(config.T);
    const std::size_t n = y.tokens(), T = config.T;
    const ScoreEngine selector(y, decoder, config.selector);

    EditResult result;
    RunReport& report = result.report;
    report.label = "spotedit";
    report.model = std::string(model.name());
    report.tokens = n;

    FlopCounter counter, selector_counter;
    LatentGrid x = gaussian_latent(y.h(), y.w(), y.c(), config.seed);
    LatentGrid x0 = x;
    LatentGrid last_v(y.h(), y.w(), y.c());
    std::vector<bool> has_v(n, false);
    std::vector<BlockKV> last_kv;

    // Initial stage: every token, every step.
    const std::size_t first_spot = T - config.K_init;
    for (std::size_t i = T; i > first_spot; --i) {
        const double t = schedule.t(i);
        const FlopCounter before = counter;
        ForwardResult fwd = model.forward_full(x, y, p, t, counter);
        LatentGrid next = euler_step(x, fwd.velocity, t, schedule.t(i - 1));
        x0 = reconstruct_x0(x, fwd.velocity, t);
        last_v = fwd.velocity;
        has_v.assign(n, true);
        last_kv = std::move(fwd.kv);
        record_step(report, i, t, StepKind::full, n, n, counter - before);
        if (observer) {
            StepTrace tr{i, t, StepKind::full, &x, &next, &x0, nullptr};
            observer(tr);
        }
        x = std::move(next);
    }
    ConditionCache cache = init_cache(std::move(last_kv), first_spot, n);

    std::vector<std::uint8_t> prev_reuse(n, 0);
    std::size_t spot_calls = 0;
    const bool accelerated = config.accelerator.kind == AcceleratorKind::velocity_reuse && config.accelerator.period;

    for (std::size_t i = first_spot; i >= 1; --i) {
        const double t = schedule.t(i), t_prev = schedule.t(i - 1);
        TokenRouting routing = selector.route(x0, selector_counter);
        if (config.routing_hook) routing = config.routing_hook(i, routing);
        routing.validate();
        if (routing.tokens() != n) throw RoutingError("routing hook returned a routing of the wrong size");
        result.routing_history.push_back(routing);

        std::size_t migrations = 0;
        for (std::size_t a : routing.active) migrations += prev_reuse[a] ? 1 : 0;
        prev_reuse = routing.indicator;

        const double alpha = blend_cache(cache, t, routing, config.fusion);
        const FlopCounter before = counter;
        const LatentGrid x_before = x;

        std::optional<ForwardResult> refreshed;
        std::function<std::vector<BlockKV>()> refresh;
        if (!routing.active.empty()) {
            refresh = [&]() {
                refreshed = model.forward_full(x, y, p, t, counter);
                return refreshed->kv;
            };
        }
        const ResetOutcome reset = maybe_reset(cache, config.fusion, i - 1, refresh);

        StepKind kind = StepKind::spot;
        bool hit = false;
        std::size_t active_count = routing.active.size();
        if (refreshed) {
            kind = StepKind::refresh;
            active_count = n;
            x = euler_step(x_before, refreshed->velocity, t, t_prev);
            x0 = reconstruct_x0(x_before, refreshed->velocity, t);
            last_v = refreshed->velocity;
            has_v.assign(n, true);
        } else if (routing.active.empty()) {
            kind = StepKind::skipped;
        } else {
            ++spot_calls;
            const auto& ids = routing.active;
            Tensor v_active;
            bool reusable = accelerated && spot_calls % *config.accelerator.period == 0;
            for (std::size_t a : ids) reusable = reusable && has_v[a];
            if (reusable) {
                hit = true;
                v_active = Tensor::matrix(ids.size(), y.c());
                for (std::size_t r = 0; r < ids.size(); ++r) {
                    auto src = last_v.token(ids[r]);
                    std::copy(src.begin(), src.end(), v_active.row(r).begin());
                }
            } else {
                const Tensor x_active = gather_rows(x.as_matrix(), ids);
                PartialRequest req;
                req.routing = &routing;
                req.x_active = &x_active;
                req.y = &y;
                req.prompt = &p;
                req.t = t;
                req.mode = config.fusion.mode;
                v_active = model.forward_partial(req, cache, counter);
            }
            const double dt = t - t_prev;
            for (std::size_t r = 0; r < ids.size(); ++r) {
                auto xi = x.token(ids[r]);
                auto x0i = x0.token(ids[r]);
                auto vi = last_v.token(ids[r]);
                auto vr = v_active.row(r);
                for (std::size_t k = 0; k < xi.size(); ++k) {
                    const double xb = xi[k];
                    xi[k] = xb - dt * vr[k];
                    x0i[k] = xb - t * vr[k];
                    vi[k] = vr[k];
                }
                has_v[ids[r]] = true;
            }
            for (std::size_t r : routing.reuse) {
                auto now = x.token(r);
                auto was = x_before.token(r);
                if (!std::equal(now.begin(), now.end(), was.begin())) {
                    throw ConsistencyError("reused token " + std::to_string(r) + " was modified at step " +
                                           std::to_string(i));
                }
            }
        }

        record_step(report, i, t, kind, active_count, n, counter - before);
        StepRecord& rec = report.steps.back();
        rec.reset_fired = reset == ResetOutcome::refreshed;
        rec.accelerator_hit = hit;
        rec.alpha = alpha;
        rec.migrations = migrations;
        if (observer) {
            StepTrace tr{i, t, kind, &x_before, &x, &x0, &cache};
            observer(tr);
        }
    }

    // Consolidation: tokens the selector still considers unedited take the condition latent.
    result.x0_hat = x0;
    result.final_routing = selector.route(x0, selector_counter);
    result.pre_consolidation = x;
    result.final_latent = x;
    for (std::size_t r : result.final_routing.reuse) {
        auto dst = result.final_latent.token(r);
        auto src = y.token(r);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    result.image = decoder.decode_pixels(result.final_latent);
    report.totals.selector_flops = selector_counter.total_flops();
    report.finalize();
    report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace spotflow
