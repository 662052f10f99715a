#include "gcnbert/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "gcnbert/classifier.hpp"

namespace gcnbert {

using nlohmann::json;

double round_to_hundredths(double value) { return std::round(value * 100.0) / 100.0; }

EvalReport summarize(std::span<const SampleOutcome> outcomes, std::size_t classes, std::span<const std::size_t> ks) {
    if (outcomes.empty()) throw DataError("cannot evaluate an empty split");
    EvalReport report;
    report.sample_count = outcomes.size();
    report.per_class_top1.assign(classes, 0.0);
    report.per_class_count.assign(classes, 0);
    std::vector<std::size_t> class_hits(classes, 0);
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> confusions;
    std::map<std::size_t, std::size_t> hits;

    for (const SampleOutcome& s : outcomes) {
        if (s.target >= classes || s.ranking.size() != classes) {
            throw DataError("sample outcome does not match a " + std::to_string(classes) + "-class model");
        }
        for (std::size_t k : ks) {
            const std::size_t kk = std::min(k, classes);
            if (std::find(s.ranking.begin(), s.ranking.begin() + static_cast<std::ptrdiff_t>(kk), s.target) !=
                s.ranking.begin() + static_cast<std::ptrdiff_t>(kk)) {
                ++hits[k];
            }
        }
        ++report.per_class_count[s.target];
        if (s.ranking.front() == s.target) {
            ++class_hits[s.target];
        } else {
            ++confusions[{s.target, s.ranking.front()}];
        }
    }
    const double n = static_cast<double>(outcomes.size());
    for (std::size_t k : ks) report.top_k_accuracy[k] = 100.0 * static_cast<double>(hits[k]) / n;
    for (std::size_t c = 0; c < classes; ++c) {
        if (report.per_class_count[c] > 0) {
            report.per_class_top1[c] =
                100.0 * static_cast<double>(class_hits[c]) / static_cast<double>(report.per_class_count[c]);
        }
    }
    for (const auto& [pair, count] : confusions) report.confusion_pairs.push_back({pair.first, pair.second, count});
    std::stable_sort(report.confusion_pairs.begin(), report.confusion_pairs.end(),
                     [](const ConfusionPair& a, const ConfusionPair& b) { return a.count > b.count; });
    return report;
}

std::vector<SampleOutcome> infer(const GcnBertModel& model, std::span<const LoadedClip> clips) {
    std::vector<SampleOutcome> out(clips.size());
    std::vector<std::exception_ptr> errors(clips.size());
    const std::size_t window = model.config().window;
    const auto n = static_cast<std::ptrdiff_t>(clips.size());

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        try {
            Rng unused(0);
            const Tensor poses = sample_window(clips[i].frames, SampleMode::Eval, window, unused);
            const Tensor logits = model.logits(poses);
            out[i] = {clips[i].gloss_id, rank_classes(logits.data())};
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

EvalReport evaluate(const GcnBertModel& model, std::span<const LoadedClip> clips) {
    if (clips.empty()) throw DataError("cannot evaluate an empty split");
    const std::size_t classes = model.config().classes;
    for (const LoadedClip& c : clips) {
        if (c.gloss_id >= classes) {
            throw DataError("clip '" + c.source_id + "' has gloss id " + std::to_string(c.gloss_id) +
                            " but the model has " + std::to_string(classes) + " classes");
        }
    }
    const auto outcomes = infer(model, clips);
    return summarize(outcomes, classes);
}

EvalReport evaluate(const Checkpoint& checkpoint, const DatasetManifest& manifest, Split split) {
    if (manifest.class_count() != checkpoint.model.config().classes) {
        throw DataError("class count mismatch: manifest has " + std::to_string(manifest.class_count()) +
                        " glosses, checkpoint was trained for " + std::to_string(checkpoint.model.config().classes));
    }
    const auto clips = load_split(manifest, split);
    if (clips.empty()) throw DataError("split '" + split_name(split) + "' is empty");
    return evaluate(checkpoint.model, clips);
}

json EvalReport::to_json(std::span<const std::string> vocabulary) const {
    auto gloss = [&](std::size_t id) { return id < vocabulary.size() ? vocabulary[id] : std::to_string(id); };
    json top = json::object();
    for (const auto& [k, acc] : top_k_accuracy) top["top" + std::to_string(k)] = round_to_hundredths(acc);
    json per_class = json::array();
    for (std::size_t c = 0; c < per_class_top1.size(); ++c) {
        per_class.push_back({{"gloss", gloss(c)},
                             {"gloss_id", c},
                             {"samples", per_class_count[c]},
                             {"top1", round_to_hundredths(per_class_top1[c])}});
    }
    json pairs = json::array();
    for (const auto& p : confusion_pairs) {
        pairs.push_back({{"truth", gloss(p.truth)},
                         {"truth_id", p.truth},
                         {"predicted", gloss(p.predicted)},
                         {"predicted_id", p.predicted},
                         {"count", p.count}});
    }
    return {{"sample_count", sample_count},
            {"top_k_accuracy", std::move(top)},
            {"per_class", std::move(per_class)},
            {"confusion_pairs", std::move(pairs)}};
}

EvalReport EvalReport::from_json(const json& doc) {
    EvalReport r;
    r.sample_count = doc.at("sample_count").get<std::size_t>();
    for (const auto& [key, value] : doc.at("top_k_accuracy").items()) {
        r.top_k_accuracy[std::stoul(key.substr(3))] = value.get<double>();
    }
    for (const json& c : doc.at("per_class")) {
        r.per_class_top1.push_back(c.at("top1").get<double>());
        r.per_class_count.push_back(c.at("samples").get<std::size_t>());
    }
    for (const json& p : doc.at("confusion_pairs")) {
        r.confusion_pairs.push_back(
            {p.at("truth_id").get<std::size_t>(), p.at("predicted_id").get<std::size_t>(), p.at("count").get<std::size_t>()});
    }
    return r;
}

std::string EvalReport::to_table(std::span<const std::string> vocabulary, std::size_t max_pairs) const {
    auto gloss = [&](std::size_t id) { return id < vocabulary.size() ? vocabulary[id] : std::to_string(id); };
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof(line), "samples: %zu\n", sample_count);
    os << line;
    for (const auto& [k, acc] : top_k_accuracy) {
        std::snprintf(line, sizeof(line), "top-%-3zu %6.2f%%\n", k, acc);
        os << line;
    }
    if (!confusion_pairs.empty()) {
        os << "most confused (truth -> predicted):\n";
        for (std::size_t i = 0; i < std::min(max_pairs, confusion_pairs.size()); ++i) {
            const auto& p = confusion_pairs[i];
            os << "  " << gloss(p.truth) << " -> " << gloss(p.predicted) << "  x" << p.count << '\n';
        }
    }
    return os.str();
}

}  // namespace gcnbert
