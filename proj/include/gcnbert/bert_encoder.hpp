#pragma once

#include <span>
#include <vector>

#include "gcnbert/autodiff.hpp"
#include "gcnbert/config.hpp"
#include "gcnbert/init.hpp"

namespace gcnbert {

struct AttentionHeadParams {
    Parameter query;  // d×d_h
    Parameter key;    // d×d_h
    Parameter value;  // d×d_h
};

struct TransformerLayerParams {
    std::vector<AttentionHeadParams> heads;
    Parameter ffn_w1;  // ffn_in×d_ff
    Parameter ffn_b1;  // d_ff
    Parameter ffn_w2;  // d_ff×d
    Parameter ffn_b2;  // d
    // Only populated when standard residuals are enabled.
    Parameter attn_out;  // d_h×d
    Parameter ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
};

/// Learnable state of the temporal encoder. Row 0 of the positional table
/// belongs to the classification token; rows 1..T to the frames.
struct BertEncoderParams {
    Parameter cls_token;   // K·F
    Parameter positional;  // (T+1)×p in concat mode, (T+1)×d in add mode
    std::vector<TransformerLayerParams> layers;
    Parameter head_weight;  // d×G
    Parameter head_bias;    // G

    static BertEncoderParams create(const ModelConfig& config, Rng& rng);

    // Standard-residual parameters are listed only when they were created.
    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
};

struct HeadVars {
    Var query, key, value;
};

struct FfnVars {
    Var w1, b1, w2, b2;
};

struct LayerVars {
    std::vector<HeadVars> heads;
    FfnVars ffn;
    Var attn_out;
    Var ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
};

struct LayerOptions {
    Real attention_scale = 1;
    bool standard_residuals = false;
};

struct TemporalEncoding {
    Var y_cls;  // 1×d
    Var v_hat;  // G
};

/// Prepends the classification token and attaches position embeddings.
/// spatial: T×K×F, cls: K·F, positional: (T+1)×p (concat) or (T+1)×K·F (add).
Var build_input(Var spatial, Var cls, Var positional, PositionalMode mode);

/// softmax_j(scale·Q(s_i)·K(s_j)) weighted sum of V(s_j), unmasked.
Var attention_head(Var seq, const HeadVars& head, Real scale);

/// Arithmetic mean of the per-head outputs.
Var multi_head(Var seq, std::span<const HeadVars> heads, Real scale);

/// W2·GELU(W1·x + b1) + b2, row by row.
Var pffn(Var x, const FfnVars& ffn);

/// Literal mode: PFFN(MH(x)). Standard mode: y = LN(x + MH(x)·W_o); LN(y + PFFN(y)).
Var transformer_layer(Var seq, const LayerVars& layer, const LayerOptions& options);

LayerVars bind_layer(Tape& tape, const TransformerLayerParams& params, bool standard_residuals);

/// Runs the whole temporal encoder and the V̂ = tanh(y_cls·W + b) head.
TemporalEncoding encode_temporal(Tape& tape, Var spatial, const BertEncoderParams& params,
                                 const ModelConfig& config);

}  // namespace gcnbert
