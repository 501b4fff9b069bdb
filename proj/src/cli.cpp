// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "spotflow/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <thread>

#include "json.hpp"
#include "spotflow/errors.hpp"
#include "spotflow/image_io.hpp"

namespace spotflow {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json real(double v) {
    if (!std::isfinite(v)) return nullptr;
    return round_report_real(v);
}

std::string format_real(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        body();
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "spotflow: configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "spotflow: runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw IoError("failed writing " + path.string());
}

std::string step_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "step_%03zu.pgm", index);
    return buf;
}

void write_edit_artifacts(const EditResult& r, const ScenarioInstance& inst, const std::filesystem::path& out,
                          const std::optional<QualityScores>& scores) {
    const std::size_t h = inst.y.h(), w = inst.y.w();
    write_report(r.report, scores, out / "spotedit.json", out / "spotedit_steps.csv");
    write_ppm(r.image, out / "spotedit.ppm");
    ensure_dir(out / "masks");
    // Spot steps run from knot T - K_init down to 1, one routing each.
    const std::size_t first = r.routing_history.size();
    for (std::size_t s = 0; s < r.routing_history.size(); ++s) {
        write_routing_pgm(r.routing_history[s], h, w, out / "masks" / step_name(first - s));
    }
    write_routing_pgm(r.final_routing, h, w, out / "masks" / "final.pgm");
    const ScoreMap final_scores = score_map(r.x0_hat, inst.y, inst.decoder, inst.pipeline.selector);
    write_score_csv(final_scores, out / "final_scores.csv");
    write_pgm(final_scores.scores, h, w, out / "final_scores.pgm");
}

std::size_t sweep_threads(std::size_t jobs) {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SPOTFLOW_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) throw ConfigError("SPOTFLOW_THREADS must be a positive integer");
        n = static_cast<std::size_t>(v);
    }
    return std::min(n, jobs);
}

}  // namespace

CompareOutcome compare_scenario(const Scenario& scenario) {
    const ScenarioInstance inst = instantiate(scenario);
    CompareOutcome out;
    out.baseline = run_baseline(*inst.model, inst.y, inst.prompt, uniform_schedule(scenario.T), scenario.seed,
                                inst.decoder);
    out.spot = run_spotedit(*inst.model, inst.y, inst.prompt, inst.decoder, inst.pipeline);
    out.speedup = speedup_ratio(out.baseline.report, out.spot.report);
    out.quality.psnr = psnr(out.spot.image, out.baseline.image);
    out.quality.ssim = ssim(out.spot.image, out.baseline.image);
    std::vector<bool> outside(inst.mask.size());
    for (std::size_t i = 0; i < outside.size(); ++i) outside[i] = !inst.mask[i];
    const PixelImage cond = inst.decoder.decode_pixels(inst.y);
    out.quality.region_psnr = region_psnr(out.spot.image, cond, outside, inst.decoder.config().patch);
    out.edit_region_psnr = region_psnr(out.spot.image, out.baseline.image, inst.mask, inst.decoder.config().patch);
    double reuse = 0.0;
    for (const auto& r : out.spot.routing_history) reuse += static_cast<double>(r.reuse.size());
    out.mean_reuse = out.spot.routing_history.empty() ? 0.0 : reuse / static_cast<double>(out.spot.routing_history.size());
    return out;
}

std::string compare_to_json(const CompareOutcome& o) {
    ordered_json j;
    j["schema"] = std::string(kCompareSchema);
    ordered_json s;
    s["flops"] = real(o.speedup.flops);
    s["flops_infinite"] = o.speedup.infinite;
    s["query_tokens"] = real(o.speedup.query_tokens);
    s["wall_clock_seconds_ratio"] = real(o.speedup.wall_clock);
    j["speedup"] = s;
    ordered_json q;
    q["psnr_vs_baseline"] = real(o.quality.psnr);
    q["ssim_vs_baseline"] = real(o.quality.ssim);
    q["region_psnr_vs_condition"] = real(o.quality.region_psnr);
    q["edit_region_psnr_vs_baseline"] = real(o.edit_region_psnr);
    j["quality"] = q;
    j["mean_reuse"] = real(o.mean_reuse);
    j["baseline_forward_flops"] = o.baseline.report.totals.forward_flops;
    j["spot_forward_flops"] = o.spot.report.totals.forward_flops;
    return j.dump(2) + "\n";
}

Scenario apply_sweep_value(Scenario s, const std::string& param, const std::string& value) {
    auto parse_count = [&](std::size_t min_value) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
        if (value.empty() || end == value.c_str() || *end != '\0' || value[0] == '-' || v < min_value) {
            throw ConfigError("sweep value '" + value + "' for " + param + " must be an integer >= " +
                              std::to_string(min_value));
        }
        return static_cast<std::size_t>(v);
    };
    if (param == "tau") {
        if (value == "inf" || value == "+inf") {
            s.selector.tau = std::numeric_limits<double>::infinity();
        } else if (value == "-inf") {
            s.selector.tau = -std::numeric_limits<double>::infinity();
        } else {
            char* end = nullptr;
            const double v = std::strtod(value.c_str(), &end);
            if (value.empty() || *end != '\0' || std::isnan(v)) throw ConfigError("sweep value '" + value + "' for tau is not a number");
            s.selector.tau = v;
        }
    } else if (param == "reset_interval") {
        if (value == "disabled" || value == "inf") {
            s.reset_interval = std::nullopt;
        } else {
            s.reset_interval = parse_count(1);
        }
    } else if (param == "kinit") {
        s.K_init = parse_count(1);
        if (s.K_init >= s.T) throw ConfigError("sweep value '" + value + "' for kinit must be smaller than T");
    } else {
        throw ConfigError("unknown sweep parameter '" + param + "' (expected tau, reset_interval or kinit)");
    }
    return s;
}

int cmd_run(const std::filesystem::path& scenario_path, const std::filesystem::path& out_dir,
            std::optional<std::uint64_t> seed_override, std::ostream& err) {
    return guarded(err, [&] {
        const Scenario scenario = load_scenario(scenario_path, seed_override);
        const ScenarioInstance inst = instantiate(scenario);
        ensure_dir(out_dir);
        const EditResult r = run_spotedit(*inst.model, inst.y, inst.prompt, inst.decoder, inst.pipeline);
        write_edit_artifacts(r, inst, out_dir, std::nullopt);
    });
}

int cmd_compare(const std::filesystem::path& scenario_path, const std::filesystem::path& out_dir,
                std::optional<std::uint64_t> seed_override, std::ostream& err) {
    return guarded(err, [&] {
        const Scenario scenario = load_scenario(scenario_path, seed_override);
        const ScenarioInstance inst = instantiate(scenario);
        ensure_dir(out_dir);
        const CompareOutcome o = compare_scenario(scenario);
        write_report(o.baseline.report, std::nullopt, out_dir / "baseline.json", out_dir / "baseline_steps.csv");
        write_ppm(o.baseline.image, out_dir / "baseline.ppm");
        write_ppm(inst.decoder.decode_pixels(inst.y), out_dir / "condition.ppm");
        write_edit_artifacts(o.spot, inst, out_dir, o.quality);
        write_text(out_dir / "compare.json", compare_to_json(o));
    });
}

int cmd_sweep(const std::filesystem::path& scenario_path, const std::string& param,
              const std::vector<std::string>& values, const std::filesystem::path& out_dir,
              std::optional<std::uint64_t> seed_override, std::ostream& err) {
    return guarded(err, [&] {
        if (values.size() < 2) throw ConfigError("sweep needs at least two values, got " + std::to_string(values.size()));
        const Scenario base = load_scenario(scenario_path, seed_override);
        std::vector<Scenario> runs;
        for (const auto& v : values) {
            runs.push_back(apply_sweep_value(base, param, v));
            instantiate(runs.back());  // validates before any work starts
        }
        ensure_dir(out_dir);
        std::vector<std::optional<CompareOutcome>> results(runs.size());
        std::vector<std::string> errors(runs.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t k = next++; k < runs.size(); k = next++) {
                try {
                    results[k] = compare_scenario(runs[k]);
                } catch (const std::exception& e) {
                    errors[k] = e.what();
                }
            }
        };
        const std::size_t n_threads = sweep_threads(runs.size());
        std::vector<std::thread> pool;
        for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
        worker();
        for (auto& th : pool) th.join();
        for (std::size_t k = 0; k < runs.size(); ++k) {
            if (!errors[k].empty()) throw Error("sweep value '" + values[k] + "': " + errors[k]);
        }
        std::string csv = "value,speedup,psnr,ssim,mean_reuse,spot_forward_flops\n";
        for (std::size_t k = 0; k < runs.size(); ++k) {
            const CompareOutcome& o = *results[k];
            const std::filesystem::path dir = out_dir / (param + "_" + std::to_string(k));
            ensure_dir(dir);
            write_report(o.baseline.report, std::nullopt, dir / "baseline.json");
            write_report(o.spot.report, o.quality, dir / "spotedit.json", dir / "spotedit_steps.csv");
            write_text(dir / "compare.json", compare_to_json(o));
            csv += values[k] + "," + format_real(o.speedup.flops) + "," + format_real(o.quality.psnr) + "," +
                   format_real(o.quality.ssim) + "," + format_real(o.mean_reuse) + "," +
                   std::to_string(o.spot.report.totals.forward_flops) + "\n";
        }
        write_text(out_dir / "sweep.csv", csv);
    });
}

}  // namespace spotflow
