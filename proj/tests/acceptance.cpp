// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "selector_oracle.hpp"
#include "spotflow/cli.hpp"
#include "spotflow/errors.hpp"
#include "spotflow/metrics.hpp"
#include "spotflow/pipeline.hpp"
#include "spotflow/scenario.hpp"
#include "test_util.hpp"

using namespace spotflow;
using testutil::max_abs_diff;

namespace {

// Pinned tolerances.
constexpr double kReconstructionTol = 1e-10;
constexpr double kBaselineTol = 1e-9;
constexpr double kBaselineSeconds = 30.0;
constexpr double kPartialTol = 1e-9;
constexpr double kSelectorTol = 1e-9;
constexpr double kResetCacheTol = 1e-12;
constexpr double kResetOutputTol = 1e-9;
constexpr double kFlopRatioRelTol = 0.10;
constexpr double kAcceleratorTol = 1e-6;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), f, a, b, c);
    return buf;
}

Scenario scenario(const char* file) { return load_scenario(std::filesystem::path(SPOTFLOW_SCENARIO_DIR) / file); }

double worst_error_against(const LatentGrid& got, const LatentGrid& want) { return max_abs_diff(got, want); }

Outcome rectified_flow_identity() {
    Scenario s = scenario("analytic_rect.json");
    const ScenarioInstance inst = instantiate(s);
    double worst = 0.0;
    std::size_t steps = 0;
    const auto observe = [&](const StepTrace& tr) {
        worst = std::max(worst, worst_error_against(*tr.x0_hat, inst.target));
        ++steps;
    };
    const BaselineResult base = run_baseline(*inst.model, inst.y, inst.prompt, uniform_schedule(s.T), inst.pipeline.seed,
                                             inst.decoder, observe);
    worst = std::max(worst, worst_error_against(base.final_latent, inst.target));
    PipelineConfig all = inst.pipeline;
    all.selector.tau = -1.0;
    run_spotedit(*inst.model, inst.y, inst.prompt, inst.decoder, all, observe);
    return {steps == 2 * s.T && worst <= kReconstructionTol,
            fmt("max |x0_hat - target| = %.3g over %.0f steps", worst, static_cast<double>(steps))};
}

Outcome baseline_equivalence() {
    Scenario s = scenario("toy_dit.json");
    s.T = 20;
    s.selector.tau = -1.0;
    s.mode = FusionMode::no_condition_cache;
    const ScenarioInstance inst = instantiate(s);
    const auto start = std::chrono::steady_clock::now();
    const BaselineResult base =
        run_baseline(*inst.model, inst.y, inst.prompt, uniform_schedule(s.T), inst.pipeline.seed, inst.decoder);
    const EditResult spot = run_spotedit(*inst.model, inst.y, inst.prompt, inst.decoder, inst.pipeline);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double err = max_abs_diff(spot.final_latent, base.final_latent);
    return {err <= kBaselineTol && secs < kBaselineSeconds && inst.model->blocks() == 4 && inst.y.tokens() == 256,
            fmt("max diff %.3g, %.2f s for both runs", err, secs)};
}

Outcome full_reuse() {
    Scenario s = scenario("toy_dit.json");
    s.selector.tau = kInf;
    const ScenarioInstance inst = instantiate(s);
    const CompareOutcome o = compare_scenario(s);
    const bool identical = o.spot.image == inst.decoder.decode_pixels(inst.y);
    const std::uint64_t after = o.spot.report.forward_flops_from(s.T - s.K_init);
    const std::uint64_t base = o.baseline.report.totals.forward_flops, spot = o.spot.report.totals.forward_flops;
    const bool ratio_exact = 2 * base == 25 * spot && o.speedup.flops == 12.5;
    return {identical && after == 0 && ratio_exact,
            fmt("image identical %.0f, FLOPs after phase 1 %.0f, ratio %.17g", identical, static_cast<double>(after),
                o.speedup.flops)};
}

Outcome partial_identity() {
    SplitMix64 rng(2026);
    double worst = 0.0;
    const FusionMode modes[] = {FusionMode::spotfusion, FusionMode::static_fusion, FusionMode::no_condition_cache};
    for (int trial = 0; trial < 20; ++trial) {
        ModelConfig cfg;
        cfg.kind = ModelKind::toy_dit;
        cfg.blocks = 1 + trial % 3;
        cfg.heads = 1 + trial % 2;
        cfg.d_head = 4;
        cfg.d_model = 4 * cfg.heads;
        cfg.h = 2;
        cfg.w = 4;
        cfg.c = 3;
        cfg.seed = 100 + trial;
        const ToyDit model(cfg);
        const LatentGrid x = testutil::random_latent(2, 4, 3, 200 + trial), y = testutil::random_latent(2, 4, 3, 300 + trial);
        const PromptEmbedding p = seeded_prompt(4, cfg.d_model, 400 + trial);
        const double t = rng.uniform(0.05, 1.0);
        std::vector<std::uint8_t> reuse(8);
        for (auto& r : reuse) r = rng.uniform() < 0.5 ? 1 : 0;
        reuse[rng.next() % 8] = 0;
        FlopCounter fc;
        const ForwardResult full = model.forward_full(x, y, p, t, fc);
        const ConditionCache cache = init_cache(full.kv, 0, 8);
        const TokenRouting routing = TokenRouting::from_indicator(reuse, 0.0);
        const Tensor xa = gather_rows(x.as_matrix(), routing.active);
        PartialRequest req;
        req.routing = &routing;
        req.x_active = &xa;
        req.y = &y;
        req.prompt = &p;
        req.t = t;
        req.mode = modes[trial % 3];
        const Tensor v = model.forward_partial(req, cache, fc);
        for (std::size_t r = 0; r < routing.active.size(); ++r)
            for (std::size_t k = 0; k < 3; ++k)
                worst = std::max(worst, std::abs(v(r, k) - full.velocity.token(routing.active[r])[k]));
    }
    return {worst <= kPartialTol, fmt("max row difference %.3g over 20 instances", worst)};
}

Outcome selector_oracle() {
    const LatentDecoder dec;
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 50; ++k) {
        const LatentGrid a = testutil::random_latent(8, 8, 8, 1000 + k);
        const LatentGrid b = k % 2 ? testutil::random_latent(8, 8, 8, 2000 + k) : smooth_latent(8, 8, 8, 3000 + k);
        const ScoreMap s = lpips_score_map(a, b, dec, {});
        const auto oracle = testutil::brute_force_scores(a, b, dec);
        for (std::size_t i = 0; i < 64; ++i) worst = std::max(worst, std::abs(s.scores[i] - oracle[i]));
    }
    SplitMix64 rng(77);
    std::size_t violations = 0;
    for (int m = 0; m < 1000; ++m) {
        ScoreMap s{8, 8, std::vector<double>(64)};
        for (double& v : s.scores) v = rng.uniform();
        double t1 = rng.uniform(-0.1, 1.1), t2 = rng.uniform(-0.1, 1.1);
        if (t1 > t2) std::swap(t1, t2);
        const TokenRouting a = route_tokens(s, t1), b = route_tokens(s, t2);
        for (std::size_t i : a.reuse) violations += b.is_reused(i) ? 0 : 1;
    }
    return {worst <= kSelectorTol && violations == 0,
            fmt("max oracle difference %.3g, %.0f monotonicity violations", worst, static_cast<double>(violations))};
}

Outcome mask_recovery() {
    double worst_precision = 1.0, worst_recall = 1.0;
    std::size_t steps = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Scenario s = load_scenario(std::filesystem::path(SPOTFLOW_SCENARIO_DIR) / "analytic_rect.json", seed);
        const ScenarioInstance inst = instantiate(s);
        const EditResult r = run_spotedit(*inst.model, inst.y, inst.prompt, inst.decoder, inst.pipeline);
        for (const TokenRouting& routing : r.routing_history) {
            std::size_t tp = 0, masked = 0;
            for (std::size_t i : routing.active) tp += inst.mask[i] ? 1 : 0;
            for (bool m : inst.mask) masked += m ? 1 : 0;
            const double precision = routing.active.empty() ? 0.0 : static_cast<double>(tp) / routing.active.size();
            worst_precision = std::min(worst_precision, precision);
            worst_recall = std::min(worst_recall, static_cast<double>(tp) / masked);
            ++steps;
        }
    }
    return {worst_precision == 1.0 && worst_recall == 1.0 && steps == 460,
            fmt("min precision %.6g, min recall %.6g over %.0f spot steps (10 seeds)", worst_precision, worst_recall,
                static_cast<double>(steps))};
}

Outcome flop_scaling() {
    Scenario s = scenario("toy_dit.json");
    s.T = 20;
    s.reset_interval = std::nullopt;
    ScenarioInstance inst = instantiate(s);
    const std::size_t n = inst.y.tokens(), m = s.prompt_m, quarter = n / 4;
    std::vector<std::uint8_t> pinned(n, 1);
    SplitMix64 rng(25);
    std::size_t chosen = 0;
    while (chosen < quarter) {
        const std::size_t i = rng.next() % n;
        if (pinned[i]) {
            pinned[i] = 0;
            ++chosen;
        }
    }
    inst.pipeline.routing_hook = [pinned](std::size_t, const TokenRouting&) {
        return TokenRouting::from_indicator(pinned, 0.0);
    };
    const EditResult spot = run_spotedit(*inst.model, inst.y, inst.prompt, inst.decoder, inst.pipeline);
    const BaselineResult base =
        run_baseline(*inst.model, inst.y, inst.prompt, uniform_schedule(s.T), inst.pipeline.seed, inst.decoder);
    const double expected = static_cast<double>(m + quarter) / static_cast<double>(m + 2 * n);
    bool queries_ok = true;
    double worst_rel = 0.0, spot_ratio = 0.0;
    std::size_t spot_steps = 0;
    for (std::size_t k = 0; k < spot.report.steps.size(); ++k) {
        const StepRecord& st = spot.report.steps[k];
        if (st.kind != StepKind::spot) continue;
        ++spot_steps;
        queries_ok = queries_ok && st.attention_query_tokens == m + quarter;
        const double ratio = static_cast<double>(st.forward_flops) / static_cast<double>(base.report.steps[k].forward_flops);
        worst_rel = std::max(worst_rel, std::abs(ratio - expected) / expected);
        spot_ratio = ratio;
    }
    return {queries_ok && spot_steps == s.T - s.K_init && worst_rel <= kFlopRatioRelTol,
            fmt("query tokens per spot step ok=%.0f, FLOP ratio %.5f vs expected %.5f", queries_ok, spot_ratio, expected)};
}

Outcome schedule_properties() {
    bool ok = alpha_cos2(0.0) == 1.0 && alpha_cos2(1.0) == 0.0;
    double prev = alpha_cos2(0.0);
    for (int i = 1; i <= 1000; ++i) {
        const double a = alpha_cos2(i * 1e-3);
        ok = ok && a <= prev && a >= 0.0 && a <= 1.0;
        prev = a;
    }
    return {ok, fmt("alpha(0) = %.17g, alpha(1) = %.17g, monotone on 1001 points", alpha_cos2(0.0), alpha_cos2(1.0))};
}

Outcome reset_correctness() {
    Scenario s = scenario("toy_dit.json");
    s.T = 20;
    const ScenarioInstance inst = instantiate(s);
    double worst_cache = 0.0;
    std::size_t refreshes = 0;
    const auto observe = [&](const StepTrace& tr) {
        if (tr.kind != StepKind::refresh) return;
        ++refreshes;
        FlopCounter fc;
        const ForwardResult fresh = inst.model->forward_full(*tr.x_before, inst.y, inst.prompt, tr.t, fc);
        for (std::size_t b = 0; b < fresh.kv.size(); ++b) {
            const BlockKV& got = tr.cache->block(b);
            for (const auto& [g, w] : {std::pair{&got.prompt_k, &fresh.kv[b].prompt_k}, {&got.prompt_v, &fresh.kv[b].prompt_v},
                                       {&got.image_k, &fresh.kv[b].image_k}, {&got.image_v, &fresh.kv[b].image_v},
                                       {&got.cond_k, &fresh.kv[b].cond_k}, {&got.cond_v, &fresh.kv[b].cond_v}})
                worst_cache = std::max(worst_cache, max_abs_diff(*g, *w));
        }
    };
    run_spotedit(*inst.model, inst.y, inst.prompt, inst.decoder, inst.pipeline, observe);

    PipelineConfig every = inst.pipeline;
    every.fusion.reset_interval = 1;
    const EditResult r = run_spotedit(*inst.model, inst.y, inst.prompt, inst.decoder, every);
    PipelineConfig all = inst.pipeline;
    all.selector.tau = -1.0;
    all.fusion.mode = FusionMode::no_condition_cache;
    const EditResult full = run_spotedit(*inst.model, inst.y, inst.prompt, inst.decoder, all);
    const double out = max_abs_diff(r.pre_consolidation, full.final_latent);
    bool all_refresh = true;
    for (const StepRecord& st : r.report.steps) all_refresh = all_refresh && st.kind != StepKind::spot;
    return {refreshes >= 1 && worst_cache <= kResetCacheTol && out <= kResetOutputTol && all_refresh,
            fmt("cache diff %.3g over %.0f resets, reset=1 output diff %.3g", worst_cache, static_cast<double>(refreshes), out)};
}

Outcome reset_ablation() {
    Scenario with = scenario("toy_dit.json");
    Scenario without = with;
    without.reset_interval = std::nullopt;
    const ScenarioInstance inst = instantiate(with);
    const EditResult a = run_spotedit(*inst.model, inst.y, inst.prompt, inst.decoder, inst.pipeline);
    const ScenarioInstance inst_b = instantiate(without);
    const EditResult b = run_spotedit(*inst_b.model, inst_b.y, inst_b.prompt, inst_b.decoder, inst_b.pipeline);
    const double masked = region_psnr(b.image, a.image, inst.mask, inst.decoder.config().patch);
    const std::uint64_t fa = a.report.totals.forward_flops, fb = b.report.totals.forward_flops;
    return {masked < kPsnrCap && fb < fa,
            fmt("masked PSNR %.4g dB, FLOPs with reset %.6g, without %.6g", masked, static_cast<double>(fa),
                static_cast<double>(fb))};
}

double mean_in(const ScoreMap& s, const std::vector<bool>& mask, bool inside) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.scores.size(); ++i)
        if (mask[i] == inside) {
            sum += s.scores[i];
            ++n;
        }
    return sum / static_cast<double>(n);
}

Outcome spectral_ordering() {
    const LatentDecoder dec;
    const LatentGrid y = smooth_latent(16, 16, 8, 90);
    SelectorConfig lp, l2;
    l2.metric = SelectorMetric::raw_l2;

    const double beta = 0.5;
    LatentGrid bright = y;
    for (double& v : bright.data()) v += beta;
    const double bright_l2 = score_map(bright, y, dec, l2).mean(), bright_lp = score_map(bright, y, dec, lp).mean();

    // Texture swap: zero-mean checkerboard with balanced channel signs inside the rectangle, plus a faint
    // global offset everywhere.
    const TokenRect rect{5, 5, 6, 6};
    const auto mask = rect_mask(16, 16, std::span<const TokenRect>(&rect, 1));
    const double offset = 0.1, amplitude = 0.3;
    const double sign[8] = {1, -1, -1, 1, -1, 1, 1, -1};
    LatentGrid tex = y;
    for (std::size_t i = 0; i < 256; ++i) {
        auto tok = tex.token(i);
        const double checker = ((i / 16 + i % 16) % 2) ? 1.0 : -1.0;
        for (std::size_t k = 0; k < 8; ++k) tok[k] += offset + (mask[i] ? amplitude * sign[k] * checker : 0.0);
    }
    const ScoreMap tl2 = score_map(tex, y, dec, l2), tlp = score_map(tex, y, dec, lp);
    const double contrast_l2 = mean_in(tl2, mask, true) / mean_in(tl2, mask, false);
    const double contrast_lp = mean_in(tlp, mask, true) / mean_in(tlp, mask, false);
    char buf[256];
    std::snprintf(buf, sizeof(buf), "brightness raw %.4g > lpips %.4g; texture contrast lpips %.4g > raw %.4g", bright_l2,
                  bright_lp, contrast_lp, contrast_l2);
    return {bright_l2 > bright_lp && contrast_lp > contrast_l2, buf};
}

Outcome accelerator_composition() {
    const Scenario s = scenario("analytic_rect.json");
    const ScenarioInstance inst = instantiate(s);
    const EditResult plain = run_spotedit(*inst.model, inst.y, inst.prompt, inst.decoder, inst.pipeline);
    const EditResult fast = run_spotedit(*inst.model, inst.y, inst.prompt, inst.decoder,
                                         attach_velocity_reuse_accelerator(inst.pipeline, 2));
    const double err = max_abs_diff(fast.final_latent, inst.target);
    return {err <= kAcceleratorTol && fast.report.totals.forward_flops < plain.report.totals.forward_flops &&
                fast.report.totals.accelerator_hits > 0,
            fmt("max |final - target| %.3g, FLOPs %.6g vs %.6g", err, static_cast<double>(fast.report.totals.forward_flops),
                static_cast<double>(plain.report.totals.forward_flops))};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"rectified-flow identity", rectified_flow_identity},
        {"degenerate baseline equivalence", baseline_equivalence},
        {"degenerate full reuse", full_reuse},
        {"partial attention identity", partial_identity},
        {"selector oracle equivalence", selector_oracle},
        {"mask recovery", mask_recovery},
        {"FLOP reduction scaling", flop_scaling},
        {"fusion schedule properties", schedule_properties},
        {"reset correctness", reset_correctness},
        {"reset ablation direction", reset_ablation},
        {"low-frequency score ordering", spectral_ordering},
        {"accelerator composition", accelerator_composition},
    };
    int failures = 0;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2zu %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str(), secs);
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%zu/%zu criteria passed in %.1f s\n", criteria.size() - failures, criteria.size(), total);
    return failures == 0 ? 0 : 1;
}
