#include "gcnbert/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gcnbert/classifier.hpp"
#include "gcnbert/evaluator.hpp"
#include "gcnbert/kernels.hpp"

namespace gcnbert {

using nlohmann::json;
namespace fs = std::filesystem;

json EpochRecord::to_json() const {
    return json{{"epoch", epoch},
                {"train_loss", train_loss},
                {"train_top1", train_top1},
                {"val_top1", val_top1 ? json(*val_top1) : json(nullptr)},
                {"val_top5", val_top5 ? json(*val_top5) : json(nullptr)},
                {"wall_ms", wall_ms}};
}

namespace {

struct SampleGradients {
    std::vector<Tensor> grads;
    double loss = 0.0;
    bool correct = false;
};

SampleGradients sample_gradients(const GcnBertModel& model, const Tensor& poses, std::size_t target) {
    Tape tape(true);
    const auto out = model.forward(tape, poses);
    const Var loss = classification_loss(out.logits, target);
    tape.backward(loss);
    SampleGradients s;
    s.loss = static_cast<double>(loss.value()[0]);
    s.correct = rank_classes(out.logits.value().data()).front() == target;
    for (const Parameter* p : model.parameters()) {
        auto g = tape.gradient_of(*p);
        s.grads.push_back(g ? std::move(*g) : Tensor(p->value.shape()));
    }
    return s;
}

}  // namespace

BatchResult batch_gradients(const GcnBertModel& model, std::span<const Tensor> poses,
                            std::span<const std::size_t> targets) {
    if (poses.size() != targets.size() || poses.empty()) throw ShapeError("batch_gradients: empty or ragged batch");
    BatchResult result;
    for (const Parameter* p : model.parameters()) result.grads.emplace_back(p->value.shape());

    const std::size_t chunk = static_cast<std::size_t>(std::max(1, kernels::max_threads()));
    const Real inv_batch = Real(1) / static_cast<Real>(poses.size());
    std::vector<SampleGradients> slots(std::min(chunk, poses.size()));
    std::vector<std::exception_ptr> errors(slots.size());

    for (std::size_t begin = 0; begin < poses.size(); begin += chunk) {
        const std::size_t count = std::min(chunk, poses.size() - begin);
        const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static) if (count > 1)
        for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            try {
                slots[i] = sample_gradients(model, poses[begin + i], targets[begin + i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
        for (std::size_t i = 0; i < count; ++i) {
            if (errors[i]) std::rethrow_exception(errors[i]);
            result.loss_sum += slots[i].loss;
            result.correct += slots[i].correct ? 1 : 0;
            for (std::size_t p = 0; p < result.grads.size(); ++p) {
                auto dst = result.grads[p].data();
                const auto src = slots[i].grads[p].data();
                for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j] * inv_batch;
            }
        }
    }
    return result;
}

Trainer::Trainer(RunConfig config, std::vector<std::string> vocabulary, std::vector<LoadedClip> train,
                 std::vector<LoadedClip> validation)
    : config_(std::move(config)),
      vocabulary_(std::move(vocabulary)),
      train_(std::move(train)),
      validation_(std::move(validation)),
      model_(config_.model, config_.train.seed),
      rng_(config_.train.seed ^ 0x9E3779B97F4A7C15ULL) {
    if (train_.empty()) throw DataError("training split is empty");
    const auto& t = config_.train;
    const auto params = model_.parameters();
    optimizer_ = AdamState({t.learning_rate, t.weight_decay, t.beta1, t.beta2, t.epsilon},
                           std::vector<const Parameter*>(params.begin(), params.end()));
}

EpochRecord Trainer::run_epoch() {
    const auto started = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(train_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng_);

    const std::size_t batch = config_.train.batch_size;
    const auto params = model_.parameters();
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
        const std::size_t end = std::min(order.size(), begin + batch);
        std::vector<Tensor> poses;
        std::vector<std::size_t> targets;
        for (std::size_t i = begin; i < end; ++i) {
            const LoadedClip& clip = train_[order[i]];
            poses.push_back(sample_window(clip.frames, SampleMode::Train, config_.model.window, rng_));
            targets.push_back(clip.gloss_id);
        }
        BatchResult br = batch_gradients(model_, poses, targets);
        if (!std::isfinite(br.loss_sum)) {
            throw NumericError("non-finite training loss at epoch " + std::to_string(epoch_ + 1) + ", batch starting " +
                               "with clip '" + train_[order[begin]].source_id + "'");
        }
        if (config_.train.grad_clip > 0.0) clip_global_norm(br.grads, config_.train.grad_clip);
        adam_step(params, br.grads, optimizer_);
        loss_sum += br.loss_sum;
        correct += br.correct;
    }

    EpochRecord rec;
    rec.epoch = ++epoch_;
    rec.train_loss = loss_sum / static_cast<double>(train_.size());
    rec.train_top1 = 100.0 * static_cast<double>(correct) / static_cast<double>(train_.size());
    if (!validation_.empty()) {
        const EvalReport report = evaluate(model_, validation_);
        rec.val_top1 = report.top_k_accuracy.at(1);
        rec.val_top5 = report.top_k_accuracy.at(5);
        improved_ = epoch_ == 1 || *rec.val_top1 > best_val_top1_;
        if (improved_) best_val_top1_ = *rec.val_top1;
    } else {
        improved_ = true;
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return rec;
}

Checkpoint Trainer::checkpoint() const {
    std::ostringstream rng_state;
    rng_state << rng_;
    Checkpoint c;
    c.config = config_;
    c.vocabulary = vocabulary_;
    c.model = model_;
    c.optimizer = optimizer_;
    c.epoch = epoch_;
    c.best_val_top1 = best_val_top1_;
    c.rng_state = rng_state.str();
    return c;
}

TrainOutcome train(const DatasetManifest& manifest, RunConfig config, const fs::path& out_dir,
                   const std::function<void(const EpochRecord&)>& on_epoch) {
    if (config.model.classes == 0) {
        config.model.classes = manifest.class_count();
    } else if (config.model.classes != manifest.class_count()) {
        throw ConfigError("model.classes is " + std::to_string(config.model.classes) + " but the manifest has " +
                          std::to_string(manifest.class_count()) + " glosses");
    }
    auto train_clips = load_split(manifest, Split::Train);
    if (train_clips.empty()) throw DataError("training split is empty");
    auto val_clips = load_split(manifest, Split::Validation);

    fs::create_directories(out_dir);
    config.save(out_dir / "config.json");
    std::ofstream log(out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log) throw DataError("cannot write " + (out_dir / "train_log.jsonl").string());

    Trainer trainer(config, manifest.vocabulary, std::move(train_clips), std::move(val_clips));
    TrainOutcome outcome;
    for (std::size_t e = 0; e < config.train.epochs; ++e) {
        EpochRecord rec = trainer.run_epoch();
        log << rec.to_json().dump() << '\n';
        log.flush();
        const Checkpoint ckpt = trainer.checkpoint();
        save_checkpoint(ckpt, out_dir / "last.ckpt");
        if (trainer.last_epoch_improved()) save_checkpoint(ckpt, out_dir / "best.ckpt");
        outcome.log.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    outcome.last = trainer.checkpoint();
    if (config.train.epochs == 0) {
        save_checkpoint(outcome.last, out_dir / "last.ckpt");
        save_checkpoint(outcome.last, out_dir / "best.ckpt");
    }
    return outcome;
}

}  // namespace gcnbert
