#pragma once

#include <vector>

#include "gcnbert/config.hpp"
#include "gcnbert/synth.hpp"

namespace testing {

// Small enough that an epoch over a few dozen clips takes well under a second.
inline gcnbert::RunConfig tiny_run_config(std::size_t classes, std::size_t window = 8) {
    gcnbert::RunConfig c;
    c.model.window = window;
    c.model.classes = classes;
    c.model.gcn.width = 2;
    c.model.gcn.blocks = 1;
    c.model.gcn.layers_per_block = 1;
    c.model.bert.pos_dim = 2;
    c.model.bert.layers = 1;
    c.model.bert.heads = 1;
    c.model.bert.head_dim = 4;
    c.model.bert.ffn_dim = 8;
    c.train.batch_size = 4;
    c.train.epochs = 1;
    return c;
}

inline gcnbert::SynthSpec tiny_synth(std::size_t classes, std::size_t per_class, std::size_t frames = 10) {
    gcnbert::SynthSpec s;
    s.classes = classes;
    s.samples_per_class = per_class;
    s.frame_count = frames;
    return s;
}

inline std::vector<gcnbert::LoadedClip> synth_clips(const gcnbert::SynthSpec& spec) {
    std::vector<gcnbert::LoadedClip> out;
    for (std::size_t c = 0; c < spec.classes; ++c)
        for (std::size_t s = 0; s < spec.samples_per_class; ++s)
            out.push_back({gcnbert::normalized_clip(gcnbert::synth_clip(spec, c, s), spec.frame_width,
                                                    spec.frame_height),
                           c, gcnbert::synth_video_id(c, s)});
    return out;
}

// Flattened raw coordinates of every frame of a clip.
inline std::vector<double> flatten(const gcnbert::LoadedClip& clip) {
    std::vector<double> v;
    for (const auto& f : clip.frames) v.insert(v.end(), f.data().begin(), f.data().end());
    return v;
}

inline std::vector<std::vector<double>> class_centroids(const std::vector<gcnbert::LoadedClip>& clips,
                                                        std::size_t classes) {
    std::vector<std::vector<double>> sum(classes);
    std::vector<std::size_t> count(classes, 0);
    for (const auto& c : clips) {
        const auto v = flatten(c);
        if (sum[c.gloss_id].empty()) sum[c.gloss_id].assign(v.size(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) sum[c.gloss_id][i] += v[i];
        ++count[c.gloss_id];
    }
    for (std::size_t g = 0; g < classes; ++g)
        for (double& x : sum[g]) x /= static_cast<double>(count[g]);
    return sum;
}

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

// Percentage of `test` clips whose nearest training centroid is their own class.
inline double nearest_centroid_accuracy(const std::vector<gcnbert::LoadedClip>& train,
                                        const std::vector<gcnbert::LoadedClip>& test, std::size_t classes) {
    const auto centroids = class_centroids(train, classes);
    std::size_t hits = 0;
    for (const auto& c : test) {
        const auto v = flatten(c);
        std::size_t best = 0;
        for (std::size_t g = 1; g < classes; ++g)
            if (squared_distance(v, centroids[g]) < squared_distance(v, centroids[best])) best = g;
        hits += best == c.gloss_id;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(test.size());
}

}  // namespace testing
