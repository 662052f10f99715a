#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gcnbert/config.hpp"
#include "gcnbert/model.hpp"
#include "gcnbert/optimizer.hpp"
#include "gcnbert/pose_io.hpp"

namespace gcnbert {

class CheckpointError : public DataError {
public:
    using DataError::DataError;
};

/// Everything needed to resume or reproduce a run.
struct Checkpoint {
    RunConfig config;
    std::vector<std::string> vocabulary;
    GcnBertModel model;
    AdamState optimizer;
    std::size_t epoch = 0;
    double best_val_top1 = 0.0;
    std::string rng_state;
};

inline constexpr char kCheckpointMagic[8] = {'G', 'C', 'N', 'B', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout: 8 magic bytes, u32 format version, u64 header length, JSON header
/// (config, vocabulary, training state, tensor directory with names, shapes
/// and offsets, CRC-32 of the payload), then the raw little-endian payload.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

/// When `expected` is given every stored tensor must match the shape that
/// configuration produces; the error names the first offending tensor.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected = nullptr);

}  // namespace gcnbert
