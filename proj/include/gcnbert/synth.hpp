#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "gcnbert/pose_io.hpp"

namespace gcnbert {

/// Parameters of a synthetic gloss dataset. Each class moves the wrists,
/// elbows and fingers along its own sinusoidal trajectory; samples differ only
/// by i.i.d. Gaussian noise added to every coordinate.
struct SynthSpec {
    std::size_t classes = 10;
    std::size_t samples_per_class = 20;
    std::size_t frame_count = 60;
    double noise_sigma = 0.02;  // normalized-coordinate units
    std::uint64_t seed = 0;
    double frame_width = 256.0;
    double frame_height = 256.0;

    void validate() const;
};

std::string synth_gloss_name(std::size_t cls);
std::string synth_video_id(std::size_t cls, std::size_t sample);

/// Noise-free normalized coordinates of class `cls` at frame t: 55×2.
Tensor synth_class_frame(std::size_t cls, std::size_t t, std::size_t frame_count);

/// One sample in pixel units, ready for write_keypoint_clip.
KeypointClip synth_clip(const SynthSpec& spec, std::size_t cls, std::size_t sample);

/// Per class: the first 70% of samples go to train, the next 15% to
/// validation, the rest to test (20 samples → 14/3/3).
Split synth_split(std::size_t sample, std::size_t samples_per_class);

/// Writes clips/<video_id>.json and manifest.json under out_dir.
DatasetManifest generate_synth_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace gcnbert
