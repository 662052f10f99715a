#pragma once

#include <cstdint>
#include <vector>

#include "gcnbert/bert_encoder.hpp"
#include "gcnbert/config.hpp"
#include "gcnbert/gcn_encoder.hpp"

namespace gcnbert {

/// Spatial GCN encoder and temporal transformer joined by late fusion.
class GcnBertModel {
public:
    struct Output {
        SpatialEncoding spatial;
        TemporalEncoding temporal;
        Var logits;
    };

    GcnBertModel() = default;
    GcnBertModel(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const noexcept { return config_; }

    // Canonical order: spatial encoder first, then temporal encoder.
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::size_t parameter_count() const;

    /// poses: T×K×2 with T = window and K = keypoints.
    Output forward(Tape& tape, const Tensor& poses) const;
    Var loss(Tape& tape, const Tensor& poses, std::size_t target) const;
    /// Inference without recording gradients.
    Tensor logits(const Tensor& poses) const;

    GcnEncoderParams gcn;
    BertEncoderParams bert;

private:
    ModelConfig config_;
};

}  // namespace gcnbert
