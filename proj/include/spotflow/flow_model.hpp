// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "spotflow/kv_cache.hpp"
#include "spotflow/latent.hpp"
#include "spotflow/routing.hpp"
#include "spotflow/tensor.hpp"

namespace spotflow {

enum class ModelKind { analytic, toy_dit };

struct ModelConfig {
    ModelKind kind = ModelKind::toy_dit;
    std::size_t blocks = 4;
    std::size_t heads = 4;
    std::size_t d_model = 64;
    std::size_t d_head = 16;
    std::size_t mlp_ratio = 2;
    std::uint64_t seed = 0;
    // Token grid the positional table is sized for.
    std::size_t h = 16, w = 16, c = 8;
    bool positional = true;
    /// Multiplies every drawn weight; 0 yields the all-zero model.
    double weight_scale = 1.0;
    /// Scale of the transformer output when an anchor field is attached.
    double residual_gain = 1.0;

    /// Throws ConfigError on inconsistent dimensions.
    void validate() const;
};

struct ForwardResult {
    LatentGrid velocity;
    std::vector<BlockKV> kv;
};

/// Inputs for a forward pass restricted to the active image tokens.
struct PartialRequest {
    const TokenRouting* routing = nullptr;  // active ids in ascending order
    const Tensor* x_active = nullptr;       // |A| x c, rows ordered as routing->active
    const LatentGrid* y = nullptr;          // condition latent (read when the condition branch is recomputed)
    const PromptEmbedding* prompt = nullptr;
    double t = 1.0;
    FusionMode mode = FusionMode::spotfusion;
};

/// v(X_t, C, t) with per-block K/V taps.
class VelocityModel {
public:
    virtual ~VelocityModel() = default;

    virtual std::string_view name() const = 0;
    virtual std::size_t blocks() const = 0;

    /// Joint pass over [P; image; condition]; velocity for image tokens and every block's K/V.
    virtual ForwardResult forward_full(const LatentGrid& x_t, const LatentGrid& y, const PromptEmbedding& p, double t,
                                       FlopCounter& counter) const = 0;

    /// Velocity rows for the active tokens only (|A| x c), attending over cached keys.
    virtual Tensor forward_partial(const PartialRequest& request, const ConditionCache& cache,
                                   FlopCounter& counter) const = 0;
};

/// (x_t - target) / t; throws DomainError for t <= 0.
LatentGrid analytic_velocity(const LatentGrid& x_t, const LatentGrid& target, double t);

/// Straight-line oracle whose one-step reconstruction is always the target.
class AnalyticModel final : public VelocityModel {
public:
    explicit AnalyticModel(LatentGrid target) : target_(std::move(target)) {}

    std::string_view name() const override { return "analytic"; }
    std::size_t blocks() const override { return 0; }
    const LatentGrid& target() const { return target_; }

    ForwardResult forward_full(const LatentGrid& x_t, const LatentGrid& y, const PromptEmbedding& p, double t,
                               FlopCounter& counter) const override;
    Tensor forward_partial(const PartialRequest& request, const ConditionCache& cache,
                           FlopCounter& counter) const override;

private:
    LatentGrid target_;
};

struct ToyDitBlockWeights {
    Tensor wq, wk, wv, wo;       // d x d
    Tensor w1, b1, w2, b2;       // d x r*d, 1 x r*d, r*d x d, 1 x d
    Tensor mod_w, mod_b;         // 2d x 4d, 1 x 4d: shift1, scale1, shift2, scale2
    friend bool operator==(const ToyDitBlockWeights&, const ToyDitBlockWeights&) = default;
};

struct ToyDitWeights {
    Tensor patch_w, patch_b;     // c x d, 1 x d
    Tensor cond_type;            // 1 x d, added to condition tokens
    Tensor pos;                  // (h*w) x d
    std::vector<ToyDitBlockWeights> blocks;
    Tensor final_mod_w, final_mod_b;  // 2d x 2d, 1 x 2d: shift, scale
    Tensor out_w, out_b;         // d x c, 1 x c

    friend bool operator==(const ToyDitWeights&, const ToyDitWeights&) = default;
};

/// Seeded single-stream diffusion transformer over [P; X; Y], adaLN
/// modulation from a sinusoidal timestep embedding. With an anchor field the
/// velocity becomes (x_t - anchor)/t + residual_gain * transformer output.
class ToyDit final : public VelocityModel {
public:
    explicit ToyDit(const ModelConfig& config, std::optional<LatentGrid> anchor = std::nullopt);

    std::string_view name() const override { return "toy-dit"; }
    std::size_t blocks() const override { return config_.blocks; }
    const ModelConfig& config() const { return config_; }
    const ToyDitWeights& weights() const { return weights_; }
    const std::optional<LatentGrid>& anchor() const { return anchor_; }

    ForwardResult forward_full(const LatentGrid& x_t, const LatentGrid& y, const PromptEmbedding& p, double t,
                               FlopCounter& counter) const override;
    Tensor forward_partial(const PartialRequest& request, const ConditionCache& cache,
                           FlopCounter& counter) const override;

private:
    ModelConfig config_;
    ToyDitWeights weights_;
    std::optional<LatentGrid> anchor_;
};

/// Builds a toy DiT; throws ConfigError unless config.kind == toy_dit.
ToyDit init_toy_dit(const ModelConfig& config, std::optional<LatentGrid> anchor = std::nullopt);

// Building blocks shared with the test oracles.
namespace dit {
inline constexpr double kLayerNormEps = 1e-6;
inline constexpr std::uint64_t kLayerNormFlops = 7;  // mean, variance, normalize
inline constexpr std::uint64_t kModulateFlops = 3;
inline constexpr std::uint64_t kGeluFlops = 10;

/// [sin(t * f_k), cos(t * f_k)] for k < dim / 2, f_k = 1000^(-k / (dim/2)) * 1000.
Tensor timestep_embedding(double t, std::size_t dim);
double gelu(double x);
/// Multi-head scaled dot-product attention of q rows against (k, v).
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, FlopCounter& counter);
}  // namespace dit

}  // namespace spotflow
