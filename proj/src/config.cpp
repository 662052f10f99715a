#include "gcnbert/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <vector>

namespace gcnbert {

using nlohmann::json;

std::size_t ModelConfig::model_width() const {
    return bert.positional == PositionalMode::Concat ? spatial_width() + bert.pos_dim : spatial_width();
}

Real ModelConfig::attention_scale() const {
    if (bert.attention_scale) return static_cast<Real>(*bert.attention_scale);
    return Real(1) / std::sqrt(static_cast<Real>(bert.head_dim));
}

std::size_t ModelConfig::ffn_input_width() const { return bert.standard_residuals ? model_width() : bert.head_dim; }

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* key) {
        if (v == 0) throw ConfigError(std::string(key) + " must be positive");
    };
    positive(keypoints, "model.keypoints");
    positive(window, "model.window");
    positive(gcn.width, "gcn.width");
    positive(gcn.layers_per_block, "gcn.layers_per_block");
    positive(bert.heads, "bert.heads");
    positive(bert.head_dim, "bert.head_dim");
    positive(bert.ffn_dim, "bert.ffn_dim");
    if (bert.positional == PositionalMode::Concat) positive(bert.pos_dim, "bert.pos_dim");
    if (bert.attention_scale && !(*bert.attention_scale > 0.0)) {
        throw ConfigError("bert.attention_scale must be positive");
    }
    if (classes == 1) throw ConfigError("model.classes must be at least 2");
}

namespace {

struct Field {
    const char* key;
    std::function<json(const RunConfig&)> get;
    std::function<void(RunConfig&, const json&)> set;
};

template <typename T>
T as(const json& v, const char* key) {
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(std::string(key) + " must be a boolean");
        } else if constexpr (std::is_unsigned_v<T>) {
            if (v.is_number_integer() && v.get<long long>() < 0) throw ConfigError(std::string(key) + " must be >= 0");
            if (!v.is_number_integer()) throw ConfigError(std::string(key) + " must be an integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(std::string(key) + " must be a number");
        }
        return v.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

#define GCNBERT_FIELD(KEY, MEMBER, TYPE)                                              \
    Field {                                                                          \
        KEY, [](const RunConfig& c) { return json(c.MEMBER); },                      \
            [](RunConfig& c, const json& v) { c.MEMBER = as<TYPE>(v, KEY); }         \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        GCNBERT_FIELD("model.keypoints", model.keypoints, std::size_t),
        GCNBERT_FIELD("model.window", model.window, std::size_t),
        GCNBERT_FIELD("model.classes", model.classes, std::size_t),
        GCNBERT_FIELD("gcn.width", model.gcn.width, std::size_t),
        GCNBERT_FIELD("gcn.layers_per_block", model.gcn.layers_per_block, std::size_t),
        GCNBERT_FIELD("gcn.blocks", model.gcn.blocks, std::size_t),
        Field{"bert.positional",
              [](const RunConfig& c) {
                  return json(c.model.bert.positional == PositionalMode::Concat ? "concat" : "add");
              },
              [](RunConfig& c, const json& v) {
                  const auto s = v.is_string() ? v.get<std::string>() : std::string();
                  if (s == "concat") {
                      c.model.bert.positional = PositionalMode::Concat;
                  } else if (s == "add") {
                      c.model.bert.positional = PositionalMode::Add;
                  } else {
                      throw ConfigError("bert.positional must be \"concat\" or \"add\"");
                  }
              }},
        GCNBERT_FIELD("bert.pos_dim", model.bert.pos_dim, std::size_t),
        GCNBERT_FIELD("bert.layers", model.bert.layers, std::size_t),
        GCNBERT_FIELD("bert.heads", model.bert.heads, std::size_t),
        GCNBERT_FIELD("bert.head_dim", model.bert.head_dim, std::size_t),
        GCNBERT_FIELD("bert.ffn_dim", model.bert.ffn_dim, std::size_t),
        Field{"bert.attention_scale",
              [](const RunConfig& c) {
                  return c.model.bert.attention_scale ? json(*c.model.bert.attention_scale)
                                                      : json("inv_sqrt_head_dim");
              },
              [](RunConfig& c, const json& v) {
                  if (v.is_string() && v.get<std::string>() == "inv_sqrt_head_dim") {
                      c.model.bert.attention_scale.reset();
                  } else {
                      c.model.bert.attention_scale = as<double>(v, "bert.attention_scale");
                  }
              }},
        GCNBERT_FIELD("bert.standard_residuals", model.bert.standard_residuals, bool),
        GCNBERT_FIELD("train.epochs", train.epochs, std::size_t),
        GCNBERT_FIELD("train.batch_size", train.batch_size, std::size_t),
        GCNBERT_FIELD("train.learning_rate", train.learning_rate, double),
        GCNBERT_FIELD("train.weight_decay", train.weight_decay, double),
        GCNBERT_FIELD("train.beta1", train.beta1, double),
        GCNBERT_FIELD("train.beta2", train.beta2, double),
        GCNBERT_FIELD("train.epsilon", train.epsilon, double),
        GCNBERT_FIELD("train.grad_clip", train.grad_clip, double),
        GCNBERT_FIELD("train.seed", train.seed, std::uint64_t),
    };
    return table;
}

#undef GCNBERT_FIELD

}  // namespace

RunConfig RunConfig::from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object of dotted keys");
    RunConfig cfg;
    for (const auto& [key, value] : doc.items()) {
        const auto& table = fields();
        auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return key == f.key; });
        if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
        it->set(cfg, value);
    }
    if (cfg.train.batch_size == 0) throw ConfigError("train.batch_size must be positive");
    if (!(cfg.train.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
    if (cfg.train.weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
    cfg.model.validate();
    return cfg;
}

json RunConfig::to_json() const {
    json out = json::object();
    for (const Field& f : fields()) out[f.key] = f.get(*this);
    return out;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse config file " + path.string() + ": " + e.what());
    }
    return from_json(doc);
}

void RunConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file " + path.string());
    out << to_json().dump(2) << '\n';
}

}  // namespace gcnbert
