// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <string>

#include "spotflow/errors.hpp"
#include "spotflow/flow_model.hpp"
#include "spotflow/rng.hpp"

namespace spotflow {

namespace dit {

Tensor timestep_embedding(double t, std::size_t dim) {
    const std::size_t half = dim / 2;
    Tensor e = Tensor::matrix(1, dim);
    for (std::size_t k = 0; k < half; ++k) {
        const double freq = std::exp(-std::log(1000.0) * static_cast<double>(k) / static_cast<double>(half));
        const double arg = 1000.0 * t * freq;
        e(0, k) = std::sin(arg);
        e(0, half + k) = std::cos(arg);
    }
    return e;
}

double gelu(double x) {
    constexpr double kC = 0.7978845608028654;  // sqrt(2 / pi)
    return 0.5 * x * (1.0 + std::tanh(kC * (x + 0.044715 * x * x * x)));
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, FlopCounter& counter) {
    if (q.cols() != k.cols() || k.cols() != v.cols() || k.rows() != v.rows() || q.cols() % heads != 0) {
        throw DimensionError("attention: incompatible shapes " + shape_to_string(q.shape()) + ", " +
                             shape_to_string(k.shape()) + ", " + shape_to_string(v.shape()));
    }
    const std::size_t dh = q.cols() / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor out = Tensor::matrix(q.rows(), q.cols());
    Tensor qh = Tensor::matrix(q.rows(), dh), kh = Tensor::matrix(k.rows(), dh), vh = Tensor::matrix(v.rows(), dh);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        for (std::size_t r = 0; r < q.rows(); ++r)
            for (std::size_t d = 0; d < dh; ++d) qh(r, d) = q(r, off + d);
        for (std::size_t r = 0; r < k.rows(); ++r)
            for (std::size_t d = 0; d < dh; ++d) {
                kh(r, d) = k(r, off + d);
                vh(r, d) = v(r, off + d);
            }
        Tensor scores = matmul_transposed(qh, kh, counter);
        for (double& s : scores.data()) s *= inv_sqrt;
        counter.elementwise_flops += scores.size();
        const Tensor probs = softmax_rows(scores, counter);
        const Tensor oh = matmul(probs, vh, counter);
        for (std::size_t r = 0; r < q.rows(); ++r)
            for (std::size_t d = 0; d < dh; ++d) out(r, off + d) = oh(r, d);
    }
    return out;
}

}  // namespace dit

namespace {

Tensor uniform_tensor(SplitMix64& rng, std::size_t rows, std::size_t cols, std::size_t fan_in, double scale) {
    Tensor t = Tensor::matrix(rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.data()) v = scale * rng.uniform(-bound, bound);
    return t;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
    Tensor out = Tensor::matrix(end - begin, x.cols());
    std::copy(x.data().begin() + static_cast<std::ptrdiff_t>(begin * x.cols()),
              x.data().begin() + static_cast<std::ptrdiff_t>(end * x.cols()), out.data().begin());
    return out;
}

void add_inplace(Tensor& x, const Tensor& y, FlopCounter& counter) {
    auto a = x.data();
    auto b = y.data();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    counter.elementwise_flops += a.size();
}

void add_row_bias(Tensor& x, const Tensor& bias, FlopCounter& counter) {
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto row = x.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias(0, c);
    }
    counter.elementwise_flops += x.size();
}

/// LayerNorm without affine parameters followed by x * (1 + scale) + shift.
Tensor norm_modulate(const Tensor& x, std::span<const double> shift, std::span<const double> scale,
                     FlopCounter& counter) {
    Tensor out = Tensor::matrix(x.rows(), x.cols());
    const double n = static_cast<double>(x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto in = x.row(r);
        auto o = out.row(r);
        double mean = 0.0;
        for (double v : in) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : in) var += (v - mean) * (v - mean);
        var /= n;
        const double inv = 1.0 / std::sqrt(var + dit::kLayerNormEps);
        for (std::size_t c = 0; c < in.size(); ++c) o[c] = (in[c] - mean) * inv * (1.0 + scale[c]) + shift[c];
    }
    counter.elementwise_flops += (dit::kLayerNormFlops + dit::kModulateFlops) * x.size();
    return out;
}

struct Modulation {
    Tensor values;  // 1 x (k * d)
    std::span<const double> part(std::size_t k, std::size_t d) const { return values.data().subspan(k * d, d); }
};

Modulation modulation(const Tensor& temb, const Tensor& w, const Tensor& b, FlopCounter& counter) {
    Tensor m = matmul(temb, w, counter);
    add_row_bias(m, b, counter);
    return {std::move(m)};
}

/// Patch embedding of grid tokens plus positional (and optional group) embedding.
Tensor embed_tokens(const Tensor& tokens, std::span<const std::size_t> ids, const ToyDitWeights& w,
                    const ModelConfig& cfg, bool condition, FlopCounter& counter) {
    Tensor e = matmul(tokens, w.patch_w, counter);
    add_row_bias(e, w.patch_b, counter);
    for (std::size_t r = 0; r < e.rows(); ++r) {
        auto row = e.row(r);
        if (cfg.positional) {
            auto pos = w.pos.row(ids[r]);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += pos[c];
        }
        if (condition) {
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += w.cond_type(0, c);
        }
    }
    counter.elementwise_flops += e.size() * ((cfg.positional ? 1 : 0) + (condition ? 1 : 0));
    return e;
}

void mlp_residual(Tensor& stream, const ToyDitBlockWeights& bw, const Modulation& mod, std::size_t d,
                  FlopCounter& counter) {
    const Tensor b = norm_modulate(stream, mod.part(2, d), mod.part(3, d), counter);
    Tensor hidden = matmul(b, bw.w1, counter);
    add_row_bias(hidden, bw.b1, counter);
    for (double& v : hidden.data()) v = dit::gelu(v);
    counter.elementwise_flops += dit::kGeluFlops * hidden.size();
    Tensor out = matmul(hidden, bw.w2, counter);
    add_row_bias(out, bw.b2, counter);
    add_inplace(stream, out, counter);
}

}  // namespace

ToyDit::ToyDit(const ModelConfig& config, std::optional<LatentGrid> anchor)
    : config_(config), anchor_(std::move(anchor)) {
    if (config_.kind != ModelKind::toy_dit) throw ConfigError("init_toy_dit requires model.kind == toy-dit");
    config_.validate();
    if (anchor_ && (anchor_->h() != config_.h || anchor_->w() != config_.w || anchor_->c() != config_.c)) {
        throw ConfigError("toy-dit anchor grid does not match the configured grid");
    }
    const std::size_t d = config_.d_model, c = config_.c, n = config_.h * config_.w, r = config_.mlp_ratio * d;
    const double s = config_.weight_scale;
    SplitMix64 rng(config_.seed);
    weights_.patch_w = uniform_tensor(rng, c, d, c, s);
    weights_.patch_b = uniform_tensor(rng, 1, d, c, s);
    // Embedding tables use fan_in = d_model.
    weights_.cond_type = uniform_tensor(rng, 1, d, d, s);
    weights_.pos = uniform_tensor(rng, n, d, d, s);
    weights_.blocks.resize(config_.blocks);
    for (auto& b : weights_.blocks) {
        b.wq = uniform_tensor(rng, d, d, d, s);
        b.wk = uniform_tensor(rng, d, d, d, s);
        b.wv = uniform_tensor(rng, d, d, d, s);
        b.wo = uniform_tensor(rng, d, d, d, s);
        b.w1 = uniform_tensor(rng, d, r, d, s);
        b.b1 = uniform_tensor(rng, 1, r, d, s);
        b.w2 = uniform_tensor(rng, r, d, r, s);
        b.b2 = uniform_tensor(rng, 1, d, r, s);
        b.mod_w = uniform_tensor(rng, 2 * d, 4 * d, 2 * d, s);
        b.mod_b = uniform_tensor(rng, 1, 4 * d, 2 * d, s);
    }
    weights_.final_mod_w = uniform_tensor(rng, 2 * d, 2 * d, 2 * d, s);
    weights_.final_mod_b = uniform_tensor(rng, 1, 2 * d, 2 * d, s);
    weights_.out_w = uniform_tensor(rng, d, c, d, s);
    weights_.out_b = uniform_tensor(rng, 1, c, d, s);
}

ToyDit init_toy_dit(const ModelConfig& config, std::optional<LatentGrid> anchor) {
    return ToyDit(config, std::move(anchor));
}

namespace {

Tensor output_head(const Tensor& image_stream, const ToyDitWeights& w, const Tensor& temb, std::size_t d,
                   FlopCounter& counter) {
    const Modulation fm = modulation(temb, w.final_mod_w, w.final_mod_b, counter);
    const Tensor a = norm_modulate(image_stream, fm.part(0, d), fm.part(1, d), counter);
    Tensor v = matmul(a, w.out_w, counter);
    add_row_bias(v, w.out_b, counter);
    return v;
}

void apply_anchor(Tensor& v, const Tensor& x, std::span<const std::size_t> ids, const std::optional<LatentGrid>& anchor,
                  double gain, double t, FlopCounter& counter) {
    if (gain != 1.0) {
        for (double& e : v.data()) e *= gain;
        counter.elementwise_flops += v.size();
    }
    if (!anchor) return;
    for (std::size_t r = 0; r < ids.size(); ++r) {
        auto a = anchor->token(ids[r]);
        for (std::size_t k = 0; k < v.cols(); ++k) v(r, k) += (x(r, k) - a[k]) / t;
    }
    counter.elementwise_flops += 3ull * v.size();
}

}  // namespace

ForwardResult ToyDit::forward_full(const LatentGrid& x_t, const LatentGrid& y, const PromptEmbedding& p, double t,
                                   FlopCounter& counter) const {
    require_same_shape(x_t, y, "forward_full");
    if (x_t.h() != config_.h || x_t.w() != config_.w || x_t.c() != config_.c) {
        throw DimensionError("forward_full: latent grid does not match the model configuration");
    }
    const std::size_t d = config_.d_model;
    if (p.tokens.rank() != 2 || p.count() == 0 || p.tokens.cols() != d) {
        throw DimensionError("forward_full: prompt must be m x d_model with m >= 1, got " +
                             shape_to_string(p.tokens.shape()));
    }
    if (anchor_ && !(t > 0.0)) throw DomainError("forward_full: anchored velocity requires t > 0");
    const std::size_t m = p.count(), n = x_t.tokens();

    std::vector<std::size_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i;
    const Tensor x = x_t.as_matrix();
    const Tensor xe = embed_tokens(x, ids, weights_, config_, false, counter);
    const Tensor ye = embed_tokens(y.as_matrix(), ids, weights_, config_, true, counter);
    Tensor stream = concat_rows({&p.tokens, &xe, &ye});
    const Tensor temb = dit::timestep_embedding(t, 2 * d);

    ForwardResult result;
    result.kv.reserve(config_.blocks);
    for (std::size_t b = 0; b < config_.blocks; ++b) {
        const ToyDitBlockWeights& bw = weights_.blocks[b];
        const Modulation mod = modulation(temb, bw.mod_w, bw.mod_b, counter);
        const Tensor a = norm_modulate(stream, mod.part(0, d), mod.part(1, d), counter);
        const Tensor q = matmul(a, bw.wq, counter);
        const Tensor k = matmul(a, bw.wk, counter);
        const Tensor v = matmul(a, bw.wv, counter);
        BlockKV kv;
        kv.block = b;
        kv.prompt_k = slice_rows(k, 0, m);
        kv.prompt_v = slice_rows(v, 0, m);
        kv.image_k = slice_rows(k, m, m + n);
        kv.image_v = slice_rows(v, m, m + n);
        kv.cond_k = slice_rows(k, m + n, m + 2 * n);
        kv.cond_v = slice_rows(v, m + n, m + 2 * n);
        result.kv.push_back(std::move(kv));
        const Tensor attn = dit::attention(q, k, v, config_.heads, counter);
        add_inplace(stream, matmul(attn, bw.wo, counter), counter);
        mlp_residual(stream, bw, mod, d, counter);
    }
    counter.attention_query_tokens += m + 2 * n;

    Tensor vel = output_head(slice_rows(stream, m, m + n), weights_, temb, d, counter);
    apply_anchor(vel, x, ids, anchor_, config_.residual_gain, t, counter);
    result.velocity = LatentGrid::from_matrix(x_t.h(), x_t.w(), vel);
    return result;
}

Tensor ToyDit::forward_partial(const PartialRequest& req, const ConditionCache& cache, FlopCounter& counter) const {
    if (!req.routing || !req.x_active || !req.prompt) throw DimensionError("forward_partial: incomplete request");
    const TokenRouting& routing = *req.routing;
    routing.validate();
    const auto& ids = routing.active;
    if (ids.empty()) throw DomainError("forward_partial: active set is empty; the caller must skip the model call");
    const std::size_t d = config_.d_model, n = config_.h * config_.w;
    if (routing.tokens() != n) throw DimensionError("forward_partial: routing does not cover the model grid");
    const Tensor& x = *req.x_active;
    if (x.rank() != 2 || x.rows() != ids.size() || x.cols() != config_.c) {
        throw DimensionError("forward_partial: active token matrix " + shape_to_string(x.shape()) +
                             " does not match " + std::to_string(ids.size()) + " active tokens");
    }
    const PromptEmbedding& p = *req.prompt;
    if (p.tokens.rank() != 2 || p.count() == 0 || p.tokens.cols() != d) {
        throw DimensionError("forward_partial: prompt must be m x d_model with m >= 1");
    }
    if (anchor_ && !(req.t > 0.0)) throw DomainError("forward_partial: anchored velocity requires t > 0");
    if (cache.block_count() < config_.blocks) {
        throw CacheIncompleteError("forward_partial: cache holds " + std::to_string(cache.block_count()) + " of " +
                                   std::to_string(config_.blocks) + " blocks");
    }
    const bool drop_reused = req.mode == FusionMode::naive_skip;
    if (!drop_reused) cache.require_entries(routing.reuse);

    const bool recompute = req.mode == FusionMode::no_condition_cache;
    if (recompute && (!req.y || req.y->tokens() != n)) throw DimensionError("forward_partial: condition latent required");
    const std::size_t m = p.count(), na = ids.size(), ny = recompute ? n : 0;

    const Tensor xe = embed_tokens(x, ids, weights_, config_, false, counter);
    Tensor stream;
    if (recompute) {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        const Tensor ye = embed_tokens(req.y->as_matrix(), all, weights_, config_, true, counter);
        stream = concat_rows({&p.tokens, &xe, &ye});
    } else {
        stream = concat_rows({&p.tokens, &xe});
    }
    const Tensor temb = dit::timestep_embedding(req.t, 2 * d);

    for (std::size_t b = 0; b < config_.blocks; ++b) {
        const ToyDitBlockWeights& bw = weights_.blocks[b];
        const Modulation mod = modulation(temb, bw.mod_w, bw.mod_b, counter);
        const Tensor a = norm_modulate(stream, mod.part(0, d), mod.part(1, d), counter);
        const Tensor q = matmul(a, bw.wq, counter);
        const Tensor q_prompt = slice_rows(q, 0, m);
        const Tensor q_active = slice_rows(q, m, m + na);
        Tensor q_cond, k_prompt, v_prompt, k_active, v_active, k_cond, v_cond;
        FreshProjections fresh;
        fresh.q_prompt = &q_prompt;
        fresh.q_active = &q_active;
        if (recompute) {
            const Tensor k = matmul(a, bw.wk, counter);
            const Tensor v = matmul(a, bw.wv, counter);
            q_cond = slice_rows(q, m + na, m + na + ny);
            k_prompt = slice_rows(k, 0, m);
            v_prompt = slice_rows(v, 0, m);
            k_active = slice_rows(k, m, m + na);
            v_active = slice_rows(v, m, m + na);
            k_cond = slice_rows(k, m + na, m + na + ny);
            v_cond = slice_rows(v, m + na, m + na + ny);
            fresh.q_cond = &q_cond;
            fresh.k_prompt = &k_prompt;
            fresh.v_prompt = &v_prompt;
            fresh.k_cond = &k_cond;
            fresh.v_cond = &v_cond;
        } else {
            // Prompt K/V come from the cache; only the active rows are projected.
            const Tensor a_active = slice_rows(a, m, m + na);
            k_active = matmul(a_active, bw.wk, counter);
            v_active = matmul(a_active, bw.wv, counter);
        }
        fresh.k_active = &k_active;
        fresh.v_active = &v_active;
        const AttentionInputs in = assemble_attention_inputs(cache, b, routing, req.mode, fresh);
        const Tensor attn = dit::attention(in.q, in.k, in.v, config_.heads, counter);
        add_inplace(stream, matmul(attn, bw.wo, counter), counter);
        mlp_residual(stream, bw, mod, d, counter);
    }
    counter.attention_query_tokens += m + na + ny;

    Tensor vel = output_head(slice_rows(stream, m, m + na), weights_, temb, d, counter);
    apply_anchor(vel, x, ids, anchor_, config_.residual_gain, req.t, counter);
    return vel;
}

}  // namespace spotflow
