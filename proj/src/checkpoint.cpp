#include "gcnbert/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace gcnbert {

using nlohmann::json;
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "checkpoint payloads assume a little-endian host");

namespace {

constexpr const char* kDtype = sizeof(Real) == 8 ? "f64" : "f32";

template <typename T>
void put(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t offset) {
    T value;
    std::memcpy(&value, in.data() + offset, sizeof(T));
    return value;
}

std::uint32_t crc_of(const char* data, std::size_t size) {
    uLong crc = crc32(0L, Z_NULL, 0);
    std::size_t done = 0;
    while (done < size) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(size - done, 1u << 30));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(data + done), chunk);
        done += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

struct NamedTensor {
    std::string name;
    const Tensor* tensor;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
    std::vector<NamedTensor> tensors;
    const auto params = ckpt.model.parameters();
    for (const Parameter* p : params) tensors.push_back({p->name, &p->value});
    for (std::size_t i = 0; i < ckpt.optimizer.first_moment.size(); ++i) {
        tensors.push_back({"adam.m/" + params.at(i)->name, &ckpt.optimizer.first_moment[i]});
        tensors.push_back({"adam.v/" + params.at(i)->name, &ckpt.optimizer.second_moment[i]});
    }

    std::string payload;
    json directory = json::array();
    for (const auto& [name, t] : tensors) {
        directory.push_back({{"name", name}, {"shape", t->shape()}, {"offset", payload.size()}, {"count", t->size()}});
        payload.append(reinterpret_cast<const char*>(t->data().data()), t->size() * sizeof(Real));
    }

    const auto& o = ckpt.optimizer.options;
    json header{{"format_version", kCheckpointVersion},
                {"dtype", kDtype},
                {"config", ckpt.config.to_json()},
                {"vocabulary", ckpt.vocabulary},
                {"epoch", ckpt.epoch},
                {"best_val_top1", ckpt.best_val_top1},
                {"rng_state", ckpt.rng_state},
                {"optimizer",
                 {{"step", ckpt.optimizer.step},
                  {"learning_rate", o.learning_rate},
                  {"weight_decay", o.weight_decay},
                  {"beta1", o.beta1},
                  {"beta2", o.beta2},
                  {"epsilon", o.epsilon}}},
                {"tensors", std::move(directory)},
                {"payload_bytes", payload.size()},
                {"checksum", crc_of(payload.data(), payload.size())}};
    const std::string header_text = header.dump();

    std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, header_text.size());
    out += header_text;
    out += payload;

    const fs::path tmp = fs::path(path).concat(".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw CheckpointError("cannot write checkpoint " + path.string());
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw CheckpointError("failed writing checkpoint " + path.string());
    }
    fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path, const ModelConfig* expected) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const std::size_t prefix = sizeof(kCheckpointMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t);
    if (bytes.size() < prefix || std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
        throw CheckpointError(path.string() + ": not a checkpoint file");
    }
    const auto version = take<std::uint32_t>(bytes, sizeof(kCheckpointMagic));
    if (version != kCheckpointVersion) {
        throw CheckpointError(path.string() + ": unsupported checkpoint version " + std::to_string(version) +
                              " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    const auto header_len = take<std::uint64_t>(bytes, sizeof(kCheckpointMagic) + sizeof(std::uint32_t));
    if (bytes.size() - prefix < header_len) throw CheckpointError(path.string() + ": checksum error (truncated header)");

    json header;
    try {
        header = json::parse(bytes.substr(prefix, header_len));
    } catch (const json::exception& e) {
        throw CheckpointError(path.string() + ": corrupt header: " + e.what());
    }
    const std::size_t payload_at = prefix + header_len;
    const auto payload_bytes = header.at("payload_bytes").get<std::size_t>();
    const auto stored_crc = header.at("checksum").get<std::uint32_t>();
    if (bytes.size() - payload_at != payload_bytes ||
        crc_of(bytes.data() + payload_at, payload_bytes) != stored_crc) {
        throw CheckpointError(path.string() + ": checksum error (payload corrupt or truncated)");
    }
    const std::string dtype = header.at("dtype").get<std::string>();
    if (dtype != "f64" && dtype != "f32") throw CheckpointError(path.string() + ": unknown dtype " + dtype);
    const std::size_t elem = dtype == "f64" ? 8 : 4;

    Checkpoint ckpt;
    ckpt.config = RunConfig::from_json(header.at("config"));
    ckpt.vocabulary = header.at("vocabulary").get<std::vector<std::string>>();
    ckpt.epoch = header.at("epoch").get<std::size_t>();
    ckpt.best_val_top1 = header.at("best_val_top1").get<double>();
    ckpt.rng_state = header.at("rng_state").get<std::string>();

    ckpt.model = GcnBertModel(ckpt.config.model, 0);

    std::map<std::string, const json*> directory;
    for (const json& entry : header.at("tensors")) directory[entry.at("name").get<std::string>()] = &entry;

    auto read_into = [&](const std::string& name, Tensor& target) {
        const auto it = directory.find(name);
        if (it == directory.end()) throw CheckpointError(path.string() + ": missing tensor " + name);
        const json& e = *it->second;
        const Shape shape = e.at("shape").get<Shape>();
        if (shape != target.shape()) {
            throw ShapeError(path.string() + ": shape mismatch for tensor " + name + ": stored " +
                             shape_to_string(shape) + ", expected " + shape_to_string(target.shape()));
        }
        const auto offset = e.at("offset").get<std::size_t>();
        const auto count = e.at("count").get<std::size_t>();
        if (count != target.size() || offset + count * elem > payload_bytes) {
            throw CheckpointError(path.string() + ": bad directory entry for " + name);
        }
        const char* src = bytes.data() + payload_at + offset;
        for (std::size_t i = 0; i < count; ++i) {
            if (elem == 8) {
                double v;
                std::memcpy(&v, src + i * 8, 8);
                target[i] = static_cast<Real>(v);
            } else {
                float v;
                std::memcpy(&v, src + i * 4, 4);
                target[i] = static_cast<Real>(v);
            }
        }
    };

    if (expected != nullptr) {
        GcnBertModel probe(*expected, 0);
        for (Parameter* p : probe.parameters()) {
            const auto it = directory.find(p->name);
            if (it == directory.end()) throw CheckpointError(path.string() + ": missing tensor " + p->name);
            const Shape shape = it->second->at("shape").get<Shape>();
            if (shape != p->value.shape()) {
                throw ShapeError(path.string() + ": shape mismatch for tensor " + p->name + ": stored " +
                                 shape_to_string(shape) + ", expected " + shape_to_string(p->value.shape()));
            }
        }
    }

    const auto params = ckpt.model.parameters();
    for (Parameter* p : params) read_into(p->name, p->value);

    const json& opt = header.at("optimizer");
    AdamOptions options{opt.at("learning_rate").get<double>(), opt.at("weight_decay").get<double>(),
                        opt.at("beta1").get<double>(), opt.at("beta2").get<double>(),
                        opt.at("epsilon").get<double>()};
    std::vector<const Parameter*> const_params(params.begin(), params.end());
    ckpt.optimizer = AdamState(options, const_params);
    ckpt.optimizer.step = opt.at("step").get<std::uint64_t>();
    if (directory.count("adam.m/" + params.front()->name) == 0) {
        ckpt.optimizer.first_moment.clear();
        ckpt.optimizer.second_moment.clear();
    } else {
        for (std::size_t i = 0; i < params.size(); ++i) {
            read_into("adam.m/" + params[i]->name, ckpt.optimizer.first_moment[i]);
            read_into("adam.v/" + params[i]->name, ckpt.optimizer.second_moment[i]);
        }
    }
    return ckpt;
}

}  // namespace gcnbert
