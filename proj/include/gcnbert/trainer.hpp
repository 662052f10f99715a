#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gcnbert/checkpoint.hpp"
#include "gcnbert/config.hpp"
#include "gcnbert/model.hpp"
#include "gcnbert/optimizer.hpp"
#include "gcnbert/pose_io.hpp"

namespace gcnbert {

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_top1 = 0.0;
    std::optional<double> val_top1;
    std::optional<double> val_top5;
    double wall_ms = 0.0;

    nlohmann::json to_json() const;
};

/// Gradients of the mean loss over a batch, reduced in sample order so the
/// result does not depend on the number of threads.
struct BatchResult {
    std::vector<Tensor> grads;
    double loss_sum = 0.0;
    std::size_t correct = 0;
};

BatchResult batch_gradients(const GcnBertModel& model, std::span<const Tensor> poses,
                            std::span<const std::size_t> targets);

/// Owns the model, optimizer and run RNG for one training run.
class Trainer {
public:
    Trainer(RunConfig config, std::vector<std::string> vocabulary, std::vector<LoadedClip> train,
            std::vector<LoadedClip> validation);

    /// One pass over the shuffled training split followed by validation.
    EpochRecord run_epoch();

    std::size_t epoch() const noexcept { return epoch_; }
    const GcnBertModel& model() const noexcept { return model_; }
    const RunConfig& config() const noexcept { return config_; }
    const std::vector<LoadedClip>& train_clips() const noexcept { return train_; }
    double best_val_top1() const noexcept { return best_val_top1_; }
    // True when the most recent epoch set a new best validation top-1 (or
    // there is no validation split).
    bool last_epoch_improved() const noexcept { return improved_; }

    Checkpoint checkpoint() const;

private:
    RunConfig config_;
    std::vector<std::string> vocabulary_;
    std::vector<LoadedClip> train_;
    std::vector<LoadedClip> validation_;
    GcnBertModel model_;
    AdamState optimizer_;
    Rng rng_;
    std::size_t epoch_ = 0;
    double best_val_top1_ = 0.0;
    bool improved_ = false;
};

struct TrainOutcome {
    Checkpoint last;
    std::vector<EpochRecord> log;
};

/// Full run: binds the class count to the manifest vocabulary, trains for
/// config.train.epochs epochs, and writes last.ckpt, best.ckpt (highest
/// validation top-1; the last epoch when there is no validation split),
/// train_log.jsonl and config.json into out_dir.
TrainOutcome train(const DatasetManifest& manifest, RunConfig config, const std::filesystem::path& out_dir,
                   const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace gcnbert
