#pragma once

#include <span>
#include <vector>

#include "gcnbert/autodiff.hpp"
#include "gcnbert/config.hpp"
#include "gcnbert/init.hpp"

namespace gcnbert {

/// Learnable state of the spatial encoder.
///
/// One dense K×K adjacency is shared by every layer and block. A lifting
/// layer maps the 2-D keypoint coordinates to the working width F; each of
/// the B residual blocks then holds L square F×F layer weights. The Û head
/// reads the flattened temporal mean Ŝ (K·F values).
struct GcnEncoderParams {
    Parameter adjacency;
    Parameter lift;
    std::vector<std::vector<Parameter>> blocks;
    Parameter head_weight;
    Parameter head_bias;

    static GcnEncoderParams create(const ModelConfig& config, Rng& rng);

    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
};

struct SpatialEncoding {
    Var per_frame;  // T×K×F
    Var pooled;     // K×F, mean over T
    Var u_hat;      // G
};

/// tanh(A·h·W). h is K×F_in for a single frame or T×K×F_in for a stack of
/// frames that share A and W.
Var gcn_layer(Var h, Var adjacency, Var weight);

/// L stacked gcn_layer applications plus the identity shortcut: O = Õ + I.
Var gcn_block(Var input, Var adjacency, std::span<const Var> weights);

/// Lifting layer, residual blocks, temporal mean pooling and the Û head.
/// poses is T×K×2.
SpatialEncoding encode_sequence(Tape& tape, Var poses, const GcnEncoderParams& params);

}  // namespace gcnbert
