// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "spotflow/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "spotflow/errors.hpp"

namespace spotflow {

using ordered_json = nlohmann::ordered_json;

std::string_view step_kind_name(StepKind kind) {
    switch (kind) {
        case StepKind::full: return "full";
        case StepKind::spot: return "spot";
        case StepKind::refresh: return "refresh";
        case StepKind::skipped: return "skipped";
    }
    return "unknown";
}

std::optional<StepKind> parse_step_kind(std::string_view name) {
    if (name == "full") return StepKind::full;
    if (name == "spot") return StepKind::spot;
    if (name == "refresh") return StepKind::refresh;
    if (name == "skipped") return StepKind::skipped;
    return std::nullopt;
}

void RunReport::finalize() {
    const std::uint64_t selector = totals.selector_flops;
    totals = RunTotals{};
    totals.selector_flops = selector;
    for (const auto& s : steps) {
        totals.forward_flops += s.forward_flops;
        totals.attention_query_tokens += s.attention_query_tokens;
        totals.resets += s.reset_fired ? 1 : 0;
        totals.accelerator_hits += s.accelerator_hit ? 1 : 0;
        totals.migrations += s.migrations;
        totals.model_calls += s.forward_flops > 0 ? 1 : 0;
    }
}

std::uint64_t RunReport::forward_flops_from(std::size_t max_index) const {
    std::uint64_t sum = 0;
    for (const auto& s : steps)
        if (s.index <= max_index) sum += s.forward_flops;
    return sum;
}

double round_report_real(double v) {
    if (!std::isfinite(v)) return v;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::strtod(buf, nullptr);
}

namespace {

ordered_json real(double v) {
    if (!std::isfinite(v)) return nullptr;
    return round_report_real(v);
}

double read_real(const ordered_json& j) {
    if (j.is_null()) return std::nan("");
    return j.get<double>();
}

ordered_json to_json(const RunReport& r, const std::optional<QualityScores>& q) {
    ordered_json j;
    j["schema"] = std::string(kReportSchema);
    j["label"] = r.label;
    j["model"] = r.model;
    j["tokens"] = r.tokens;
    ordered_json t;
    t["forward_flops"] = r.totals.forward_flops;
    t["attention_query_tokens"] = r.totals.attention_query_tokens;
    t["selector_flops"] = r.totals.selector_flops;
    t["resets"] = r.totals.resets;
    t["accelerator_hits"] = r.totals.accelerator_hits;
    t["migrations"] = r.totals.migrations;
    t["model_calls"] = r.totals.model_calls;
    j["totals"] = t;
    if (q) {
        ordered_json qj;
        qj["psnr"] = real(q->psnr);
        qj["ssim"] = real(q->ssim);
        qj["region_psnr"] = real(q->region_psnr);
        j["quality"] = qj;
    } else {
        j["quality"] = nullptr;
    }
    j["wall_clock_seconds"] = real(r.wall_clock_seconds);
    ordered_json steps = ordered_json::array();
    for (const auto& s : r.steps) {
        ordered_json sj;
        sj["index"] = s.index;
        sj["t"] = real(s.t);
        sj["kind"] = std::string(step_kind_name(s.kind));
        sj["active"] = s.active;
        sj["reuse"] = s.reuse;
        sj["forward_flops"] = s.forward_flops;
        sj["attention_query_tokens"] = s.attention_query_tokens;
        sj["reset_fired"] = s.reset_fired;
        sj["accelerator_hit"] = s.accelerator_hit;
        sj["alpha"] = real(s.alpha);
        sj["migrations"] = s.migrations;
        steps.push_back(std::move(sj));
    }
    j["steps"] = std::move(steps);
    return j;
}

}  // namespace

std::string report_to_json(const RunReport& report, const std::optional<QualityScores>& scores) {
    return to_json(report, scores).dump(2) + "\n";
}

void write_steps_csv(const RunReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "index,t,kind,active,reuse,forward_flops,attention_query_tokens,reset_fired,accelerator_hit,alpha,migrations\n";
    char buf[64];
    for (const auto& s : report.steps) {
        out << s.index << ',';
        std::snprintf(buf, sizeof(buf), "%.9g", s.t);
        out << buf << ',' << step_kind_name(s.kind) << ',' << s.active << ',' << s.reuse << ',' << s.forward_flops << ','
            << s.attention_query_tokens << ',' << (s.reset_fired ? 1 : 0) << ',' << (s.accelerator_hit ? 1 : 0) << ',';
        std::snprintf(buf, sizeof(buf), "%.9g", s.alpha);
        out << buf << ',' << s.migrations << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

void write_report(const RunReport& report, const std::optional<QualityScores>& scores,
                  const std::filesystem::path& path, const std::optional<std::filesystem::path>& csv_path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << report_to_json(report, scores);
    out.close();
    if (!out) throw IoError("failed writing " + path.string());
    if (csv_path) write_steps_csv(report, *csv_path);
}

LoadedReport report_from_json(std::string_view text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("report is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("schema").get<std::string>() != kReportSchema) throw ConfigError("unsupported report schema");
        LoadedReport out;
        RunReport& r = out.report;
        r.label = j.at("label").get<std::string>();
        r.model = j.at("model").get<std::string>();
        r.tokens = j.at("tokens").get<std::size_t>();
        const auto& t = j.at("totals");
        r.totals.forward_flops = t.at("forward_flops").get<std::uint64_t>();
        r.totals.attention_query_tokens = t.at("attention_query_tokens").get<std::uint64_t>();
        r.totals.selector_flops = t.at("selector_flops").get<std::uint64_t>();
        r.totals.resets = t.at("resets").get<std::size_t>();
        r.totals.accelerator_hits = t.at("accelerator_hits").get<std::size_t>();
        r.totals.migrations = t.at("migrations").get<std::size_t>();
        r.totals.model_calls = t.at("model_calls").get<std::size_t>();
        if (!j.at("quality").is_null()) {
            const auto& q = j.at("quality");
            out.scores = QualityScores{read_real(q.at("psnr")), read_real(q.at("ssim")), read_real(q.at("region_psnr"))};
        }
        r.wall_clock_seconds = read_real(j.at("wall_clock_seconds"));
        for (const auto& sj : j.at("steps")) {
            StepRecord s;
            s.index = sj.at("index").get<std::size_t>();
            s.t = read_real(sj.at("t"));
            const auto kind = parse_step_kind(sj.at("kind").get<std::string>());
            if (!kind) throw ConfigError("unknown step kind in report");
            s.kind = *kind;
            s.active = sj.at("active").get<std::size_t>();
            s.reuse = sj.at("reuse").get<std::size_t>();
            s.forward_flops = sj.at("forward_flops").get<std::uint64_t>();
            s.attention_query_tokens = sj.at("attention_query_tokens").get<std::uint64_t>();
            s.reset_fired = sj.at("reset_fired").get<bool>();
            s.accelerator_hit = sj.at("accelerator_hit").get<bool>();
            s.alpha = read_real(sj.at("alpha"));
            s.migrations = sj.at("migrations").get<std::size_t>();
            r.steps.push_back(s);
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed report: ") + e.what());
    }
}

LoadedReport read_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return report_from_json(ss.str());
}

}  // namespace spotflow
