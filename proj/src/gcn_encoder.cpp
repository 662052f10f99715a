#include "gcnbert/gcn_encoder.hpp"

namespace gcnbert {

GcnEncoderParams GcnEncoderParams::create(const ModelConfig& config, Rng& rng) {
    const std::size_t k = config.keypoints;
    const std::size_t f = config.gcn.width;
    GcnEncoderParams p;
    p.adjacency = {"gcn.adjacency", Tensor::full({k, k}, Real(1) / static_cast<Real>(k))};
    p.lift = {"gcn.lift.weight", xavier_uniform(ModelConfig::kInputFeatures, f, rng)};
    for (std::size_t b = 0; b < config.gcn.blocks; ++b) {
        std::vector<Parameter> layers;
        for (std::size_t l = 0; l < config.gcn.layers_per_block; ++l) {
            layers.push_back({"gcn.block" + std::to_string(b) + ".layer" + std::to_string(l) + ".weight",
                              xavier_uniform(f, f, rng)});
        }
        p.blocks.push_back(std::move(layers));
    }
    p.head_weight = {"gcn.head.weight", xavier_uniform(k * f, config.classes, rng)};
    p.head_bias = {"gcn.head.bias", Tensor({config.classes})};
    return p;
}

std::vector<Parameter*> GcnEncoderParams::all() {
    std::vector<Parameter*> out{&adjacency, &lift};
    for (auto& block : blocks)
        for (auto& w : block) out.push_back(&w);
    out.push_back(&head_weight);
    out.push_back(&head_bias);
    return out;
}

std::vector<const Parameter*> GcnEncoderParams::all() const {
    auto mutable_all = const_cast<GcnEncoderParams*>(this)->all();
    return {mutable_all.begin(), mutable_all.end()};
}

Var gcn_layer(Var h, Var adjacency, Var weight) {
    const Shape hs = h.shape();
    if (weight.shape().size() != 2 || hs.empty() || hs.back() != weight.shape()[0]) {
        throw ShapeError("gcn_layer: features " + shape_to_string(hs) + " incompatible with weight " +
                         shape_to_string(weight.shape()));
    }
    if (hs.size() == 2) return tanh(matmul(matmul(adjacency, h), weight));
    if (hs.size() != 3) throw ShapeError("gcn_layer: expected K×F or T×K×F features, got " + shape_to_string(hs));

    const std::size_t frames = hs[0], nodes = hs[1], out_width = weight.shape()[1];
    Var mixed = matmul_each(adjacency, h);
    Var flat = reshape(mixed, {frames * nodes, hs[2]});
    return tanh(reshape(matmul(flat, weight), {frames, nodes, out_width}));
}

Var gcn_block(Var input, Var adjacency, std::span<const Var> weights) {
    Var h = input;
    for (const Var& w : weights) h = gcn_layer(h, adjacency, w);
    if (h.shape() != input.shape()) {
        throw ShapeError("gcn_block: block output " + shape_to_string(h.shape()) + " cannot be added to input " +
                         shape_to_string(input.shape()));
    }
    return add(h, input);
}

SpatialEncoding encode_sequence(Tape& tape, Var poses, const GcnEncoderParams& params) {
    const std::size_t k = params.adjacency.value.dim(0);
    if (poses.shape().size() != 3 || poses.shape()[1] != k || poses.shape()[2] != ModelConfig::kInputFeatures) {
        throw ShapeError("encode_sequence: expected T×" + std::to_string(k) + "×2 poses, got " +
                         shape_to_string(poses.shape()));
    }
    const Var adjacency = tape.parameter(params.adjacency);
    Var h = gcn_layer(poses, adjacency, tape.parameter(params.lift));
    for (const auto& block : params.blocks) {
        std::vector<Var> weights;
        weights.reserve(block.size());
        for (const Parameter& w : block) weights.push_back(tape.parameter(w));
        h = gcn_block(h, adjacency, weights);
    }

    SpatialEncoding out;
    out.per_frame = h;
    out.pooled = reduce_mean(h, 0);
    const std::size_t flat_width = out.pooled.value().size();
    Var flat = reshape(out.pooled, {1, flat_width});
    Var projected = matmul(flat, tape.parameter(params.head_weight));
    const std::size_t classes = projected.shape()[1];
    out.u_hat = tanh(add_bias(reshape(projected, {classes}), tape.parameter(params.head_bias)));
    return out;
}

}  // namespace gcnbert
