#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gcnbert/checkpoint.hpp"
#include "gcnbert/model.hpp"
#include "gcnbert/pose_io.hpp"

namespace gcnbert {

struct SampleOutcome {
    std::size_t target = 0;
    std::vector<std::size_t> ranking;  // full ranking of all G classes
};

struct ConfusionPair {
    std::size_t truth = 0;
    std::size_t predicted = 0;
    std::size_t count = 0;
};

struct EvalReport {
    std::map<std::size_t, double> top_k_accuracy;  // k → percent
    std::vector<double> per_class_top1;            // percent; 0 for classes without samples
    std::vector<std::size_t> per_class_count;
    std::vector<ConfusionPair> confusion_pairs;    // top-1 mistakes, most frequent first
    std::size_t sample_count = 0;

    nlohmann::json to_json(std::span<const std::string> vocabulary) const;
    static EvalReport from_json(const nlohmann::json& doc);
    std::string to_table(std::span<const std::string> vocabulary, std::size_t max_pairs = 10) const;
};

inline constexpr std::size_t kReportedK[] = {1, 5, 10};

/// Aggregates per-sample rankings. A sample is a top-k hit iff its target is
/// among the first min(k, G) ranked classes.
EvalReport summarize(std::span<const SampleOutcome> outcomes, std::size_t classes,
                     std::span<const std::size_t> ks = kReportedK);

/// Ranks every clip using the centred evaluation window. Clips are scored in
/// parallel; the result order matches the input.
std::vector<SampleOutcome> infer(const GcnBertModel& model, std::span<const LoadedClip> clips);

EvalReport evaluate(const GcnBertModel& model, std::span<const LoadedClip> clips);

/// Loads the split and evaluates; the manifest must have as many classes as the checkpoint.
EvalReport evaluate(const Checkpoint& checkpoint, const DatasetManifest& manifest, Split split);

double round_to_hundredths(double value);

}  // namespace gcnbert
