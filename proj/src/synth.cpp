#include "gcnbert/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>

namespace gcnbert {

namespace fs = std::filesystem;

void SynthSpec::validate() const {
    if (classes < 2) throw std::invalid_argument("synth: need at least 2 classes, got " + std::to_string(classes));
    if (samples_per_class == 0) throw std::invalid_argument("synth: samples_per_class must be positive");
    if (frame_count == 0) throw std::invalid_argument("synth: frame_count must be positive");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw std::invalid_argument("synth: noise_sigma must be a finite value >= 0");
    }
    if (!(frame_width > 0.0) || !(frame_height > 0.0)) throw std::invalid_argument("synth: frame size must be positive");
}

std::string synth_gloss_name(std::size_t cls) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "gloss_%03zu", cls);
    return buf;
}

std::string synth_video_id(std::size_t cls, std::size_t sample) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "synth_c%03zu_s%03zu", cls, sample);
    return buf;
}

namespace {

using Point = std::array<double, 2>;

// Resting upper body in normalized coordinates (y grows downwards).
constexpr std::array<Point, kUpperBodyPoints> kRestBody = {{
    {0.00, -0.55},   // nose
    {0.00, -0.30},   // neck
    {-0.25, -0.28},  // right shoulder
    {-0.35, 0.05},   // right elbow
    {-0.20, 0.25},   // right wrist
    {0.25, -0.28},   // left shoulder
    {0.35, 0.05},    // left elbow
    {0.20, 0.25},    // left wrist
    {0.00, 0.40},    // mid hip
    {-0.12, 0.40},   // right hip
    {-0.14, 0.75},   // right knee
    {-0.15, 0.98},   // right ankle
    {0.12, 0.40},    // left hip
}};

// Angular spread of the five fingers around the hand's pointing direction.
constexpr std::array<double, 5> kFingerAngle = {-1.1, -0.45, 0.0, 0.4, 0.8};

void place_hand(Point wrist, double direction, double curl, double mirror, Tensor& out, std::size_t base_row) {
    out.at(base_row, 0) = wrist[0];
    out.at(base_row, 1) = wrist[1];
    for (std::size_t f = 0; f < 5; ++f) {
        const double angle = direction + mirror * kFingerAngle[f];
        Point p = wrist;
        double seg_angle = angle;
        for (std::size_t j = 0; j < 4; ++j) {
            const double len = (j == 0 ? 0.035 : 0.025);
            p[0] += len * std::cos(seg_angle);
            p[1] += len * std::sin(seg_angle);
            seg_angle += mirror * curl * 0.6;
            const std::size_t row = base_row + 1 + f * 4 + j;
            out.at(row, 0) = p[0];
            out.at(row, 1) = p[1];
        }
    }
}

}  // namespace

Tensor synth_class_frame(std::size_t cls, std::size_t t, std::size_t frame_count) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    // Class-dependent motion: frequency in cycles per clip and phase offsets.
    const double freq = 1.0 + 0.5 * static_cast<double>(cls % 5);
    const double phase = two_pi * static_cast<double>(cls) * 0.61803398875;
    const double side = (cls / 5) % 2 == 0 ? 1.0 : -1.0;
    const double s = static_cast<double>(t) / static_cast<double>(frame_count);
    const double wave = two_pi * freq * s + phase;

    Tensor out({kModelKeypoints, 2});
    for (std::size_t k = 0; k < kUpperBodyPoints; ++k) {
        out.at(k, 0) = kRestBody[k][0];
        out.at(k, 1) = kRestBody[k][1];
    }
    const Point r_wrist = {kRestBody[4][0] + 0.18 * std::sin(wave), kRestBody[4][1] - 0.25 + side * 0.18 * std::cos(wave)};
    const Point l_wrist = {kRestBody[7][0] + 0.10 * std::sin(wave + phase),
                           kRestBody[7][1] - 0.05 * static_cast<double>(cls % 3) + 0.08 * std::cos(2.0 * wave)};
    out.at(4, 0) = r_wrist[0];
    out.at(4, 1) = r_wrist[1];
    out.at(7, 0) = l_wrist[0];
    out.at(7, 1) = l_wrist[1];
    // Elbows follow the wrists halfway from the shoulders.
    out.at(3, 0) = 0.5 * (kRestBody[2][0] + r_wrist[0]) - 0.08;
    out.at(3, 1) = 0.5 * (kRestBody[2][1] + r_wrist[1]) + 0.1;
    out.at(6, 0) = 0.5 * (kRestBody[5][0] + l_wrist[0]) + 0.08;
    out.at(6, 1) = 0.5 * (kRestBody[5][1] + l_wrist[1]) + 0.1;

    const double curl = 0.5 + 0.5 * std::sin(two_pi * freq * s + 1.7 * phase);
    const double r_dir = -std::numbers::pi / 2.0 + 0.4 * std::sin(wave + 0.3 * static_cast<double>(cls));
    const double l_dir = -std::numbers::pi / 2.0 - 0.3 * std::cos(wave);
    place_hand(l_wrist, l_dir, 0.3 * curl, -1.0, out, kUpperBodyPoints);
    place_hand(r_wrist, r_dir, curl, 1.0, out, kUpperBodyPoints + kHandPoints);
    return out;
}

Split synth_split(std::size_t sample, std::size_t samples_per_class) {
    const auto n = static_cast<double>(samples_per_class);
    const auto n_train = static_cast<std::size_t>(std::llround(0.70 * n));
    const auto n_val = static_cast<std::size_t>(std::llround(0.15 * n));
    if (sample < n_train) return Split::Train;
    if (sample < n_train + n_val) return Split::Validation;
    return Split::Test;
}

KeypointClip synth_clip(const SynthSpec& spec, std::size_t cls, std::size_t sample) {
    spec.validate();
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(cls), static_cast<std::uint32_t>(sample)};
    Rng rng(seq);
    std::normal_distribution<double> noise(0.0, 1.0);

    KeypointClip clip;
    clip.frame_width = spec.frame_width;
    clip.frame_height = spec.frame_height;
    for (std::size_t t = 0; t < spec.frame_count; ++t) {
        const Tensor clean = synth_class_frame(cls, t, spec.frame_count);
        RawFramePose pose;
        pose.frame_width = spec.frame_width;
        pose.frame_height = spec.frame_height;
        auto to_pixels = [&](std::size_t row) {
            const double x = std::clamp(clean.at(row, 0) + spec.noise_sigma * noise(rng), -1.0, 1.0);
            const double y = std::clamp(clean.at(row, 1) + spec.noise_sigma * noise(rng), -1.0, 1.0);
            return Keypoint{(x + 1.0) * 0.5 * spec.frame_width, (y + 1.0) * 0.5 * spec.frame_height, 1.0};
        };
        for (std::size_t k = 0; k < kUpperBodyPoints; ++k) pose.body[k] = to_pixels(k);
        for (std::size_t k = 0; k < kHandPoints; ++k) pose.left_hand[k] = to_pixels(kUpperBodyPoints + k);
        for (std::size_t k = 0; k < kHandPoints; ++k) {
            pose.right_hand[k] = to_pixels(kUpperBodyPoints + kHandPoints + k);
        }
        clip.frames.push_back(pose);
    }
    return clip;
}

DatasetManifest generate_synth_dataset(const SynthSpec& spec, const fs::path& out_dir) {
    spec.validate();
    const fs::path clip_dir = out_dir / "clips";
    fs::create_directories(clip_dir);

    DatasetManifest manifest;
    for (std::size_t c = 0; c < spec.classes; ++c) manifest.vocabulary.push_back(synth_gloss_name(c));
    const auto total = static_cast<std::ptrdiff_t>(spec.classes * spec.samples_per_class);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(total));
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < total; ++i) {
        const auto c = static_cast<std::size_t>(i) / spec.samples_per_class;
        const auto s = static_cast<std::size_t>(i) % spec.samples_per_class;
        try {
            write_keypoint_clip(clip_dir / (synth_video_id(c, s) + ".json"), synth_clip(spec, c, s));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    for (std::size_t c = 0; c < spec.classes; ++c) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
            ManifestEntry e;
            e.gloss = manifest.vocabulary[c];
            e.video_id = synth_video_id(c, s);
            e.split = synth_split(s, spec.samples_per_class);
            e.keypoint_path = clip_dir / (e.video_id + ".json");
            e.frame_width = spec.frame_width;
            e.frame_height = spec.frame_height;
            e.gloss_id = c;
            manifest.splits[e.split].push_back(e);
        }
    }
    save_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

}  // namespace gcnbert
