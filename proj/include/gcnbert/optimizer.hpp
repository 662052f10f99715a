#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gcnbert/autodiff.hpp"

namespace gcnbert {

struct AdamOptions {
    double learning_rate = 1e-3;
    double weight_decay = 1e-8;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moments per parameter plus the step counter.
struct AdamState {
    AdamOptions options;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::uint64_t step = 0;

    AdamState() = default;
    AdamState(AdamOptions opts, std::span<const Parameter* const> params);
};

/// Decoupled weight decay (p ← p − lr·wd·p) followed by the bias-corrected
/// Adam update. A non-finite gradient aborts the step before any parameter
/// changes and names the offending parameter.
void adam_step(std::span<Parameter* const> params, std::span<const Tensor> grads, AdamState& state);

/// Rescales grads in place so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::span<Tensor> grads, double max_norm);

}  // namespace gcnbert
