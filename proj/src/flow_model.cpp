// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "spotflow/flow_model.hpp"

#include <string>

#include "spotflow/errors.hpp"

namespace spotflow {

void ModelConfig::validate() const {
    if (kind == ModelKind::analytic) return;
    if (blocks == 0) throw ConfigError("model.blocks must be >= 1");
    if (heads == 0 || d_head == 0) throw ConfigError("model.heads and model.d_head must be >= 1");
    if (d_model != heads * d_head) {
        throw ConfigError("model.d_model (" + std::to_string(d_model) + ") must equal heads * d_head (" +
                          std::to_string(heads) + " * " + std::to_string(d_head) + ")");
    }
    if (d_model % 2 != 0) throw ConfigError("model.d_model must be even for the timestep embedding");
    if (mlp_ratio == 0) throw ConfigError("model.mlp_ratio must be >= 1");
    if (h == 0 || w == 0 || c == 0) throw ConfigError("model grid dimensions must be >= 1");
}

LatentGrid analytic_velocity(const LatentGrid& x_t, const LatentGrid& target, double t) {
    if (!(t > 0.0)) throw DomainError("analytic_velocity: t must be > 0, got " + std::to_string(t));
    require_same_shape(x_t, target, "analytic_velocity");
    LatentGrid v(x_t.h(), x_t.w(), x_t.c());
    auto out = v.data();
    auto x = x_t.data();
    auto y = target.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x[i] - y[i]) / t;
    return v;
}

ForwardResult AnalyticModel::forward_full(const LatentGrid& x_t, const LatentGrid& y, const PromptEmbedding&,
                                          double t, FlopCounter& counter) const {
    require_same_shape(x_t, y, "forward_full");
    ForwardResult r{analytic_velocity(x_t, target_, t), {}};
    counter.elementwise_flops += 2ull * x_t.data().size();
    return r;
}

Tensor AnalyticModel::forward_partial(const PartialRequest& req, const ConditionCache&, FlopCounter& counter) const {
    if (!req.routing || !req.x_active) throw DimensionError("forward_partial: incomplete request");
    if (!(req.t > 0.0)) throw DomainError("forward_partial: t must be > 0");
    const auto& ids = req.routing->active;
    if (ids.empty()) throw DomainError("forward_partial: active set is empty; the caller must skip the model call");
    const Tensor& x = *req.x_active;
    if (x.rows() != ids.size() || x.cols() != target_.c()) throw DimensionError("forward_partial: active rows mismatch");
    Tensor v = Tensor::matrix(ids.size(), x.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        auto tgt = target_.token(ids[r]);
        for (std::size_t k = 0; k < x.cols(); ++k) v(r, k) = (x(r, k) - tgt[k]) / req.t;
    }
    counter.elementwise_flops += 2ull * x.size();
    return v;
}

}  // namespace spotflow
