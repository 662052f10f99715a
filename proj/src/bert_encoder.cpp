#include "gcnbert/bert_encoder.hpp"

namespace gcnbert {

namespace {

constexpr double kEmbeddingStd = 0.02;

}  // namespace

BertEncoderParams BertEncoderParams::create(const ModelConfig& config, Rng& rng) {
    const std::size_t m = config.spatial_width();
    const std::size_t d = config.model_width();
    const std::size_t dh = config.bert.head_dim;
    const std::size_t ff = config.bert.ffn_dim;
    const std::size_t pos_width = config.bert.positional == PositionalMode::Concat ? config.bert.pos_dim : d;

    BertEncoderParams p;
    p.cls_token = {"bert.cls_token", normal_tensor({m}, kEmbeddingStd, rng)};
    p.positional = {"bert.positional", normal_tensor({config.window + 1, pos_width}, kEmbeddingStd, rng)};
    for (std::size_t l = 0; l < config.bert.layers; ++l) {
        const std::string prefix = "bert.layer" + std::to_string(l) + ".";
        TransformerLayerParams layer;
        for (std::size_t h = 0; h < config.bert.heads; ++h) {
            const std::string hp = prefix + "head" + std::to_string(h) + ".";
            layer.heads.push_back({{hp + "query", xavier_uniform(d, dh, rng)},
                                   {hp + "key", xavier_uniform(d, dh, rng)},
                                   {hp + "value", xavier_uniform(d, dh, rng)}});
        }
        if (config.bert.standard_residuals) {
            layer.attn_out = {prefix + "attn_out", xavier_uniform(dh, d, rng)};
            layer.ln1_gamma = {prefix + "ln1.gamma", Tensor::full({d}, 1)};
            layer.ln1_beta = {prefix + "ln1.beta", Tensor({d})};
            layer.ln2_gamma = {prefix + "ln2.gamma", Tensor::full({d}, 1)};
            layer.ln2_beta = {prefix + "ln2.beta", Tensor({d})};
        }
        layer.ffn_w1 = {prefix + "ffn.w1", xavier_uniform(config.ffn_input_width(), ff, rng)};
        layer.ffn_b1 = {prefix + "ffn.b1", Tensor({ff})};
        layer.ffn_w2 = {prefix + "ffn.w2", xavier_uniform(ff, d, rng)};
        layer.ffn_b2 = {prefix + "ffn.b2", Tensor({d})};
        p.layers.push_back(std::move(layer));
    }
    p.head_weight = {"bert.head.weight", xavier_uniform(d, config.classes, rng)};
    p.head_bias = {"bert.head.bias", Tensor({config.classes})};
    return p;
}

std::vector<Parameter*> BertEncoderParams::all() {
    std::vector<Parameter*> out{&cls_token, &positional};
    for (auto& layer : layers) {
        for (auto& head : layer.heads) {
            out.push_back(&head.query);
            out.push_back(&head.key);
            out.push_back(&head.value);
        }
        for (Parameter* p : {&layer.attn_out, &layer.ln1_gamma, &layer.ln1_beta, &layer.ln2_gamma, &layer.ln2_beta,
                             &layer.ffn_w1, &layer.ffn_b1, &layer.ffn_w2, &layer.ffn_b2}) {
            if (!p->name.empty()) out.push_back(p);
        }
    }
    out.push_back(&head_weight);
    out.push_back(&head_bias);
    return out;
}

std::vector<const Parameter*> BertEncoderParams::all() const {
    auto mutable_all = const_cast<BertEncoderParams*>(this)->all();
    return {mutable_all.begin(), mutable_all.end()};
}

Var build_input(Var spatial, Var cls, Var positional, PositionalMode mode) {
    const Shape ss = spatial.shape();
    if (ss.size() != 3) throw ShapeError("build_input: expected T×K×F spatial encoding, got " + shape_to_string(ss));
    const std::size_t frames = ss[0], width = ss[1] * ss[2];
    if (cls.shape() != Shape{width}) {
        throw ShapeError("build_input: classification token " + shape_to_string(cls.shape()) +
                         " does not match frame width " + std::to_string(width));
    }
    if (positional.shape().size() != 2 || positional.shape()[0] != frames + 1) {
        throw ShapeError("build_input: positional table " + shape_to_string(positional.shape()) + " does not cover " +
                         std::to_string(frames) + " frames plus the classification slot");
    }
    Var tokens = concat(reshape(cls, {1, width}), reshape(spatial, {frames, width}), 0);
    if (mode == PositionalMode::Concat) return concat(tokens, positional, 1);
    return add(tokens, positional);
}

Var attention_head(Var seq, const HeadVars& head, Real scale) {
    Var q = matmul(seq, head.query);
    Var k = matmul(seq, head.key);
    Var v = matmul(seq, head.value);
    Var weights = softmax(gcnbert::scale(matmul(q, transpose(k)), scale), 1);
    return matmul(weights, v);
}

Var multi_head(Var seq, std::span<const HeadVars> heads, Real scale) {
    if (heads.empty()) throw ShapeError("multi_head: at least one head is required");
    const std::size_t width = heads.front().value.shape().at(1);
    Var total;
    for (const HeadVars& h : heads) {
        if (h.value.shape().at(1) != width) throw ShapeError("multi_head: heads have unequal widths");
        Var out = attention_head(seq, h, scale);
        total = total.valid() ? add(total, out) : out;
    }
    return heads.size() == 1 ? total : gcnbert::scale(total, Real(1) / static_cast<Real>(heads.size()));
}

Var pffn(Var x, const FfnVars& ffn) {
    Var hidden = gelu(add_bias(matmul(x, ffn.w1), ffn.b1));
    return add_bias(matmul(hidden, ffn.w2), ffn.b2);
}

Var transformer_layer(Var seq, const LayerVars& layer, const LayerOptions& options) {
    Var attended = multi_head(seq, layer.heads, options.attention_scale);
    if (!options.standard_residuals) return pffn(attended, layer.ffn);
    Var y = layer_norm(add(seq, matmul(attended, layer.attn_out)), layer.ln1_gamma, layer.ln1_beta);
    return layer_norm(add(y, pffn(y, layer.ffn)), layer.ln2_gamma, layer.ln2_beta);
}

LayerVars bind_layer(Tape& tape, const TransformerLayerParams& params, bool standard_residuals) {
    LayerVars v;
    for (const auto& h : params.heads) {
        v.heads.push_back({tape.parameter(h.query), tape.parameter(h.key), tape.parameter(h.value)});
    }
    v.ffn = {tape.parameter(params.ffn_w1), tape.parameter(params.ffn_b1), tape.parameter(params.ffn_w2),
             tape.parameter(params.ffn_b2)};
    if (standard_residuals) {
        v.attn_out = tape.parameter(params.attn_out);
        v.ln1_gamma = tape.parameter(params.ln1_gamma);
        v.ln1_beta = tape.parameter(params.ln1_beta);
        v.ln2_gamma = tape.parameter(params.ln2_gamma);
        v.ln2_beta = tape.parameter(params.ln2_beta);
    }
    return v;
}

TemporalEncoding encode_temporal(Tape& tape, Var spatial, const BertEncoderParams& params,
                                 const ModelConfig& config) {
    Var seq = build_input(spatial, tape.parameter(params.cls_token), tape.parameter(params.positional),
                          config.bert.positional);
    const LayerOptions options{config.attention_scale(), config.bert.standard_residuals};
    for (const auto& layer : params.layers) {
        seq = transformer_layer(seq, bind_layer(tape, layer, config.bert.standard_residuals), options);
    }
    TemporalEncoding out;
    out.y_cls = rows(seq, 0, 1);
    Var projected = matmul(out.y_cls, tape.parameter(params.head_weight));
    const std::size_t classes = projected.shape()[1];
    out.v_hat = tanh(add_bias(reshape(projected, {classes}), tape.parameter(params.head_bias)));
    return out;
}

}  // namespace gcnbert
