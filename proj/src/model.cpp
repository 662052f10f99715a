#include "gcnbert/model.hpp"

#include "gcnbert/classifier.hpp"

namespace gcnbert {

GcnBertModel::GcnBertModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    if (config_.classes < 2) throw ConfigError("model.classes must be at least 2 to build a model");
    Rng rng(seed);
    gcn = GcnEncoderParams::create(config_, rng);
    bert = BertEncoderParams::create(config_, rng);
}

std::vector<Parameter*> GcnBertModel::parameters() {
    auto out = gcn.all();
    auto rest = bert.all();
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

std::vector<const Parameter*> GcnBertModel::parameters() const {
    auto all = const_cast<GcnBertModel*>(this)->parameters();
    return {all.begin(), all.end()};
}

std::size_t GcnBertModel::parameter_count() const {
    std::size_t n = 0;
    for (const Parameter* p : parameters()) n += p->value.size();
    return n;
}

GcnBertModel::Output GcnBertModel::forward(Tape& tape, const Tensor& poses) const {
    const Shape expected{config_.window, config_.keypoints, ModelConfig::kInputFeatures};
    if (poses.shape() != expected) {
        throw ShapeError("model input " + shape_to_string(poses.shape()) + " does not match configured " +
                         shape_to_string(expected));
    }
    Output out;
    out.spatial = encode_sequence(tape, tape.constant(poses), gcn);
    out.temporal = encode_temporal(tape, out.spatial.per_frame, bert, config_);
    out.logits = fuse(out.spatial.u_hat, out.temporal.v_hat);
    return out;
}

Var GcnBertModel::loss(Tape& tape, const Tensor& poses, std::size_t target) const {
    return classification_loss(forward(tape, poses).logits, target);
}

Tensor GcnBertModel::logits(const Tensor& poses) const {
    Tape tape(false);
    return forward(tape, poses).logits.value();
}

}  // namespace gcnbert
