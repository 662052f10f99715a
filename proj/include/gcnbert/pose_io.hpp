#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "gcnbert/init.hpp"
#include "gcnbert/tensor.hpp"

namespace gcnbert {

/// Base class for every problem with input files: unreadable, malformed, or
/// inconsistent with the manifest.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public DataError {
public:
    using DataError::DataError;
};

class NoPersonError : public FormatError {
public:
    using FormatError::FormatError;
};

inline constexpr std::size_t kBodyPoints = 25;
inline constexpr std::size_t kHandPoints = 21;
inline constexpr std::size_t kUpperBodyPoints = 13;
inline constexpr std::size_t kModelKeypoints = kUpperBodyPoints + 2 * kHandPoints;  // 55

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double confidence = 0.0;  // 0 means missing
};

/// One person from one OpenPose frame (BODY_25 plus both hands, pixel units).
struct RawFramePose {
    std::array<Keypoint, kBodyPoints> body{};
    std::array<Keypoint, kHandPoints> left_hand{};
    std::array<Keypoint, kHandPoints> right_hand{};
    double frame_width = 0.0;
    double frame_height = 0.0;
};

using SelectedKeypoints = std::array<Keypoint, kModelKeypoints>;

/// Person 0 of an OpenPose frame document. Absent hand arrays yield
/// zero-confidence keypoints.
RawFramePose parse_openpose_frame(const nlohmann::json& document);

/// Body 0–12, then left hand 0–20, then right hand 0–20.
SelectedKeypoints select_keypoints(const RawFramePose& raw);

/// Maps pixels to [-1, 1]: x' = 2x/W - 1, y' = 2y/H - 1. Missing keypoints
/// become (0, 0). Returns 55×2.
Tensor normalize_frame(const SelectedKeypoints& selected, double frame_width, double frame_height);

/// Inverse of normalize_frame for a single present keypoint.
std::array<double, 2> denormalize_point(double x, double y, double frame_width, double frame_height);

enum class SampleMode { Train, Eval };

/// Frame indices of a fixed-length window. Clips at least `window` long get a
/// contiguous run (uniform random start in train mode, centred in eval mode);
/// shorter clips are repeated cyclically from frame 0.
std::vector<std::size_t> window_indices(std::size_t length, SampleMode mode, std::size_t window, Rng& rng);

/// Stacks the selected frames (each K×2) into a window×K×2 tensor.
Tensor sample_window(std::span<const Tensor> frames, SampleMode mode, std::size_t window, Rng& rng);

struct PoseSequence {
    Tensor coords;  // T×K×2
    std::size_t gloss_id = 0;
    std::string source_id;
};

/// A clip on disk is either one document holding a "frames" array (optionally
/// with "frame_width"/"frame_height"), a single OpenPose frame document, or a
/// directory of per-frame OpenPose documents read in filename order.
struct KeypointClip {
    std::vector<RawFramePose> frames;
    double frame_width = 0.0;  // 0 when the file does not say
    double frame_height = 0.0;
};

KeypointClip load_keypoint_clip(const std::filesystem::path& path);
void write_keypoint_clip(const std::filesystem::path& path, const KeypointClip& clip);
nlohmann::json openpose_frame_document(const RawFramePose& pose);

/// Parses, selects and normalizes every frame of a clip.
std::vector<Tensor> normalized_clip(const KeypointClip& clip, double frame_width, double frame_height);

enum class Split { Train, Validation, Test };

std::string split_name(Split split);
Split parse_split(const std::string& name);

struct ManifestEntry {
    std::string gloss;
    std::string video_id;
    Split split = Split::Train;
    std::filesystem::path keypoint_path;  // absolute after load
    double frame_width = 0.0;
    double frame_height = 0.0;
    std::size_t gloss_id = 0;
};

struct DatasetManifest {
    std::vector<std::string> vocabulary;  // sorted; index is gloss_id
    std::map<Split, std::vector<ManifestEntry>> splits;

    std::size_t class_count() const { return vocabulary.size(); }
    const std::vector<ManifestEntry>& entries(Split split) const;
};

/// Loads a manifest. Relative keypoint paths resolve against the manifest's
/// directory. The vocabulary is the sorted set of gloss strings, or the
/// optional explicit "vocabulary" array (sorted) which must then cover every
/// entry.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes a manifest, storing keypoint paths relative to the manifest's
/// directory when possible.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Builds a manifest from the public WLASL index (a JSON list of
/// {gloss, instances: [{video_id, split}]}) keeping the first `class_count`
/// glosses. Keypoints are expected under pose_root/<video_id>.
DatasetManifest import_wlasl_index(const std::filesystem::path& index_path, std::size_t class_count,
                                   const std::filesystem::path& pose_root, double frame_width = 256.0,
                                   double frame_height = 256.0);

struct LoadedClip {
    std::vector<Tensor> frames;  // each K×2, normalized
    std::size_t gloss_id = 0;
    std::string source_id;
};

/// Loads and normalizes every clip of one split (files are read in parallel).
std::vector<LoadedClip> load_split(const DatasetManifest& manifest, Split split);

}  // namespace gcnbert
