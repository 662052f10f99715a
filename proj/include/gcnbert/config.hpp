#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "gcnbert/tensor.hpp"

namespace gcnbert {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PositionalMode { Concat, Add };

struct GcnConfig {
    std::size_t width = 64;  // working feature width F after the 2→F lifting layer
    std::size_t layers_per_block = 2;
    std::size_t blocks = 2;
};

struct BertConfig {
    PositionalMode positional = PositionalMode::Concat;
    std::size_t pos_dim = 16;  // only used in concat mode
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t head_dim = 64;
    std::size_t ffn_dim = 256;
    // Multiplier applied to Q·Kᵀ before the softmax; empty means 1/sqrt(head_dim).
    std::optional<double> attention_scale;
    bool standard_residuals = false;
};

struct ModelConfig {
    std::size_t keypoints = 55;
    std::size_t window = 50;
    std::size_t classes = 0;  // 0 until bound to a dataset vocabulary
    GcnConfig gcn;
    BertConfig bert;

    static constexpr std::size_t kInputFeatures = 2;

    std::size_t spatial_width() const { return keypoints * gcn.width; }
    std::size_t model_width() const;
    Real attention_scale() const;
    // Width of the tensor entering the position-wise feed-forward network.
    std::size_t ffn_input_width() const;
    void validate() const;
};

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    double weight_decay = 1e-8;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double grad_clip = 0.0;  // global-norm clip; 0 disables
    std::uint64_t seed = 0;
};

/// Every tunable in one flat dotted-key namespace ("gcn.width", "train.seed", ...).
struct RunConfig {
    ModelConfig model;
    TrainConfig train;

    static RunConfig from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;
    static RunConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

}  // namespace gcnbert
