// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "spotflow/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "spotflow/errors.hpp"
#include "spotflow/rng.hpp"

namespace spotflow {

namespace {

using json = nlohmann::json;

class Section {
public:
    Section(const json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ScenarioError(path_.empty() ? "<root>" : path_, "expected an object");
        for (const auto& [key, value] : j_.items()) {
            if (!allowed.count(key)) throw ScenarioError(child(key), "unknown key");
        }
    }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key); }
    const json& at(const std::string& key) const {
        if (!j_.contains(key)) throw ScenarioError(child(key), "required field is missing");
        return j_.at(key);
    }

    std::uint64_t u64(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            at(key);
        }
        const json& v = j_.at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            throw ScenarioError(child(key), "expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

    std::size_t count(const std::string& key, std::optional<std::size_t> fallback, std::size_t min_value) const {
        const std::uint64_t v = u64(key, fallback ? std::optional<std::uint64_t>(*fallback) : std::nullopt);
        if (v < min_value) throw ScenarioError(child(key), "must be >= " + std::to_string(min_value));
        if (v > (1ull << 20)) throw ScenarioError(child(key), "value is unreasonably large");
        return static_cast<std::size_t>(v);
    }

    double real(const std::string& key, std::optional<double> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            at(key);
        }
        const json& v = j_.at(key);
        if (!v.is_number()) throw ScenarioError(child(key), "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ScenarioError(child(key), "expected a finite number");
        return d;
    }

    /// Number or one of "inf" / "-inf".
    double extended_real(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (v.is_string()) {
            const auto s = v.get<std::string>();
            if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
            if (s == "-inf") return -std::numeric_limits<double>::infinity();
            throw ScenarioError(child(key), "expected a number, \"inf\" or \"-inf\"");
        }
        return real(key);
    }

    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            at(key);
        }
        const json& v = j_.at(key);
        if (!v.is_string()) throw ScenarioError(child(key), "expected a string");
        return v.get<std::string>();
    }

    bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_boolean()) throw ScenarioError(child(key), "expected true or false");
        return v.get<bool>();
    }

    Section sub(const std::string& key, std::set<std::string> allowed) const {
        return Section(at(key), child(key), std::move(allowed));
    }

    const json& raw() const { return j_; }

private:
    const json& j_;
    std::string path_;
};

const json kEmpty = json::object();

Section optional_sub(const Section& parent, const std::string& key, std::set<std::string> allowed) {
    if (parent.has(key)) return parent.sub(key, std::move(allowed));
    return Section(kEmpty, parent.child(key), std::move(allowed));
}

}  // namespace

Scenario parse_scenario(std::string_view json_text, std::optional<std::uint64_t> seed_override) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ScenarioError("<root>", std::string("not valid JSON: ") + e.what());
    }
    const Section root(doc, "", {"schema", "seed", "grid", "model", "schedule", "selector", "fusion", "edit", "prompt",
                                 "condition", "accelerator", "description"});
    if (root.text("schema") != kScenarioSchema) {
        throw ScenarioError("schema", "expected \"" + std::string(kScenarioSchema) + "\"");
    }
    if (root.has("description")) root.text("description");
    Scenario s;
    s.seed = seed_override ? *seed_override : root.u64("seed", 0);

    const Section grid = root.sub("grid", {"h", "w", "c"});
    s.h = grid.count("h", std::nullopt, 1);
    s.w = grid.count("w", std::nullopt, 1);
    s.c = grid.count("c", std::nullopt, 1);

    const Section model = root.sub("model", {"kind", "blocks", "heads", "d_model", "d_head", "mlp_ratio", "seed",
                                             "positional", "weight_scale", "residual_gain", "anchored"});
    const std::string kind = model.text("kind");
    if (kind == "analytic") {
        s.model.kind = ModelKind::analytic;
    } else if (kind == "toy-dit") {
        s.model.kind = ModelKind::toy_dit;
    } else {
        throw ScenarioError(model.child("kind"), "expected \"analytic\" or \"toy-dit\"");
    }
    s.model.blocks = model.count("blocks", 4, 1);
    s.model.heads = model.count("heads", 4, 1);
    s.model.d_model = model.count("d_model", 64, 2);
    s.model.d_head = model.count("d_head", s.model.d_model / s.model.heads, 1);
    s.model.mlp_ratio = model.count("mlp_ratio", 2, 1);
    s.model.seed = model.u64("seed", derive_seed(s.seed, 11));
    s.model.positional = model.flag("positional", true);
    s.model.weight_scale = model.real("weight_scale", 1.0);
    s.model.residual_gain = model.real("residual_gain", 1.0);
    s.anchored = model.flag("anchored", false);
    s.model.h = s.h;
    s.model.w = s.w;
    s.model.c = s.c;
    if (s.model.kind == ModelKind::toy_dit) {
        try {
            s.model.validate();
        } catch (const ConfigError& e) {
            throw ScenarioError("model", e.what());
        }
    }

    const Section sched = root.sub("schedule", {"T", "K_init"});
    s.T = sched.count("T", std::nullopt, 2);
    s.K_init = sched.count("K_init", 4, 1);
    if (s.K_init >= s.T) throw ScenarioError(sched.child("K_init"), "must be smaller than schedule.T");

    const Section sel = optional_sub(root, "selector", {"tau", "metric", "layers", "weights"});
    s.selector.tau = sel.extended_real("tau", 0.2);
    const auto metric = parse_selector_metric(sel.text("metric", "lpips-like"));
    if (!metric) throw ScenarioError(sel.child("metric"), "expected \"lpips-like\" or \"raw-l2\"");
    s.selector.metric = *metric;
    if (sel.has("layers")) {
        const json& a = sel.at("layers");
        if (!a.is_array()) throw ScenarioError(sel.child("layers"), "expected an array of layer indices");
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (!a[k].is_number_unsigned()) {
                throw ScenarioError(sel.child("layers") + "[" + std::to_string(k) + "]", "expected a non-negative integer");
            }
            s.selector.layers.push_back(a[k].get<std::size_t>());
        }
    }
    if (sel.has("weights")) {
        const json& a = sel.at("weights");
        if (!a.is_array()) throw ScenarioError(sel.child("weights"), "expected an array of numbers");
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (!a[k].is_number() || !(a[k].get<double>() >= 0.0)) {
                throw ScenarioError(sel.child("weights") + "[" + std::to_string(k) + "]", "expected a non-negative number");
            }
            s.selector.weights.push_back(a[k].get<double>());
        }
    }

    const Section fusion = optional_sub(root, "fusion", {"mode", "reset_interval", "alpha"});
    const auto mode = parse_fusion_mode(fusion.text("mode", "spotfusion"));
    if (!mode) {
        throw ScenarioError(fusion.child("mode"), "expected one of spotfusion, static, naive-skip, no-condition-cache");
    }
    s.mode = *mode;
    if (fusion.has("reset_interval")) {
        const json& v = fusion.at("reset_interval");
        if (v.is_string()) {
            const auto txt = v.get<std::string>();
            if (txt != "disabled" && txt != "inf") {
                throw ScenarioError(fusion.child("reset_interval"), "expected a positive integer or \"disabled\"");
            }
            s.reset_interval = std::nullopt;
        } else {
            s.reset_interval = fusion.count("reset_interval", std::nullopt, 1);
        }
    }
    if (fusion.text("alpha", "cos2") != "cos2") throw ScenarioError(fusion.child("alpha"), "only \"cos2\" is supported");

    const Section edit = optional_sub(root, "edit", {"mask", "delta_magnitude", "delta_seed"});
    if (edit.has("mask")) {
        const json& a = edit.at("mask");
        if (!a.is_array()) throw ScenarioError(edit.child("mask"), "expected an array of rectangles");
        for (std::size_t k = 0; k < a.size(); ++k) {
            const std::string path = edit.child("mask") + "[" + std::to_string(k) + "]";
            const Section r(a[k], path, {"row", "col", "height", "width"});
            TokenRect rect{r.count("row", std::nullopt, 0), r.count("col", std::nullopt, 0),
                           r.count("height", std::nullopt, 1), r.count("width", std::nullopt, 1)};
            if (rect.row + rect.height > s.h || rect.col + rect.width > s.w) {
                throw ScenarioError(path, "rectangle rows " + std::to_string(rect.row) + ".." +
                                              std::to_string(rect.row + rect.height - 1) + ", cols " +
                                              std::to_string(rect.col) + ".." +
                                              std::to_string(rect.col + rect.width - 1) + " exceeds the " +
                                              std::to_string(s.h) + "x" + std::to_string(s.w) + " token grid");
            }
            s.mask.push_back(rect);
        }
    }
    s.delta_magnitude = edit.real("delta_magnitude", 1.0);
    s.delta_seed = edit.u64("delta_seed", derive_seed(s.seed, 12));

    const Section prompt = optional_sub(root, "prompt", {"m", "seed"});
    s.prompt_m = prompt.count("m", 8, 1);
    s.prompt_seed = prompt.u64("seed", derive_seed(s.seed, 13));

    const Section cond = optional_sub(root, "condition", {"seed"});
    s.condition_seed = cond.u64("seed", derive_seed(s.seed, 14));

    const Section acc = optional_sub(root, "accelerator", {"kind", "period"});
    const std::string acc_kind = acc.text("kind", "none");
    if (acc_kind == "none") {
        s.accelerator.kind = AcceleratorKind::none;
        if (acc.has("period")) throw ScenarioError(acc.child("period"), "only valid with kind \"velocity-reuse\"");
    } else if (acc_kind == "velocity-reuse") {
        s.accelerator.kind = AcceleratorKind::velocity_reuse;
        const json& v = acc.at("period");
        if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "disabled")) {
            s.accelerator.period = std::nullopt;
        } else {
            s.accelerator.period = acc.count("period", std::nullopt, 2);
        }
    } else {
        throw ScenarioError(acc.child("kind"), "expected \"none\" or \"velocity-reuse\"");
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError("<file>", "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), seed_override);
}

ScenarioInstance instantiate(const Scenario& s) {
    ScenarioInstance inst;
    inst.y = smooth_latent(s.h, s.w, s.c, s.condition_seed);
    inst.mask = rect_mask(s.h, s.w, s.mask);
    inst.target = apply_edit(inst.y, inst.mask, s.delta_magnitude, s.delta_seed);
    const std::size_t d = s.model.kind == ModelKind::toy_dit ? s.model.d_model : 1;
    inst.prompt = seeded_prompt(s.prompt_m, d, s.prompt_seed);
    if (s.model.kind == ModelKind::analytic) {
        inst.model = std::make_unique<AnalyticModel>(inst.target);
    } else {
        inst.model = std::make_unique<ToyDit>(s.model, s.anchored ? std::optional<LatentGrid>(inst.target) : std::nullopt);
    }
    DecoderConfig dc;
    dc.c = s.c;
    inst.decoder = LatentDecoder(dc);
    PipelineConfig& pc = inst.pipeline;
    pc.T = s.T;
    pc.K_init = s.K_init;
    pc.selector = s.selector;
    pc.fusion.mode = s.mode;
    pc.fusion.reset_interval = s.reset_interval;
    pc.seed = s.seed;
    pc.accelerator = s.accelerator;
    pc.validate();
    return inst;
}

}  // namespace spotflow
