#include "gcnbert/pose_io.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <set>

namespace gcnbert {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <std::size_t N>
void read_block(const json& person, const char* key, std::array<Keypoint, N>& out, bool required) {
    const auto it = person.find(key);
    if (it == person.end() || it->is_null() || (it->is_array() && it->empty())) {
        if (required) throw FormatError(std::string("missing ") + key);
        return;  // zero-confidence default
    }
    if (!it->is_array() || it->size() != 3 * N) {
        throw FormatError(std::string(key) + " must hold " + std::to_string(3 * N) + " numbers, got " +
                          std::to_string(it->is_array() ? it->size() : 0));
    }
    for (std::size_t i = 0; i < N; ++i) {
        const json& xs = (*it)[3 * i];
        const json& ys = (*it)[3 * i + 1];
        const json& cs = (*it)[3 * i + 2];
        if (!xs.is_number() || !ys.is_number() || !cs.is_number()) {
            throw FormatError(std::string(key) + " contains a non-numeric value");
        }
        Keypoint kp{xs.get<double>(), ys.get<double>(), cs.get<double>()};
        if (kp.confidence < 0.0 || kp.confidence > 1.0) {
            throw FormatError(std::string(key) + " confidence outside [0, 1]");
        }
        out[i] = kp;
    }
}

template <std::size_t N>
json write_block(const std::array<Keypoint, N>& points) {
    json arr = json::array();
    for (const Keypoint& kp : points) {
        arr.push_back(kp.x);
        arr.push_back(kp.y);
        arr.push_back(kp.confidence);
    }
    return arr;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("cannot parse " + path.string() + ": " + e.what());
    }
}

RawFramePose parse_or_missing(const json& doc) {
    try {
        return parse_openpose_frame(doc);
    } catch (const NoPersonError&) {
        // Frames where the detector found nobody count as fully missing.
        return RawFramePose{};
    }
}

}  // namespace

RawFramePose parse_openpose_frame(const json& document) {
    if (!document.is_object() || !document.contains("people") || !document["people"].is_array()) {
        throw FormatError("keypoint document has no people array");
    }
    const json& people = document["people"];
    if (people.empty()) throw NoPersonError("keypoint document contains no person");
    const json& person = people[0];
    if (!person.is_object()) throw FormatError("people[0] is not an object");
    RawFramePose pose;
    read_block(person, "pose_keypoints_2d", pose.body, true);
    read_block(person, "hand_left_keypoints_2d", pose.left_hand, false);
    read_block(person, "hand_right_keypoints_2d", pose.right_hand, false);
    return pose;
}

SelectedKeypoints select_keypoints(const RawFramePose& raw) {
    SelectedKeypoints out{};
    auto it = std::copy_n(raw.body.begin(), kUpperBodyPoints, out.begin());
    it = std::copy(raw.left_hand.begin(), raw.left_hand.end(), it);
    std::copy(raw.right_hand.begin(), raw.right_hand.end(), it);
    return out;
}

Tensor normalize_frame(const SelectedKeypoints& selected, double frame_width, double frame_height) {
    if (!(frame_width > 0.0) || !(frame_height > 0.0)) {
        throw DataError("frame dimensions must be positive, got " + std::to_string(frame_width) + "x" +
                        std::to_string(frame_height));
    }
    Tensor out({kModelKeypoints, 2});
    for (std::size_t i = 0; i < kModelKeypoints; ++i) {
        const Keypoint& kp = selected[i];
        if (kp.confidence == 0.0) continue;
        out.at(i, 0) = static_cast<Real>(std::clamp(2.0 * kp.x / frame_width - 1.0, -1.0, 1.0));
        out.at(i, 1) = static_cast<Real>(std::clamp(2.0 * kp.y / frame_height - 1.0, -1.0, 1.0));
    }
    return out;
}

std::array<double, 2> denormalize_point(double x, double y, double frame_width, double frame_height) {
    return {(x + 1.0) * frame_width / 2.0, (y + 1.0) * frame_height / 2.0};
}

std::vector<std::size_t> window_indices(std::size_t length, SampleMode mode, std::size_t window, Rng& rng) {
    if (length == 0) throw DataError("cannot sample a window from an empty clip");
    std::vector<std::size_t> idx(window);
    if (length < window) {
        for (std::size_t i = 0; i < window; ++i) idx[i] = i % length;
        return idx;
    }
    std::size_t start = (length - window) / 2;
    if (mode == SampleMode::Train) {
        std::uniform_int_distribution<std::size_t> dist(0, length - window);
        start = dist(rng);
    }
    for (std::size_t i = 0; i < window; ++i) idx[i] = start + i;
    return idx;
}

Tensor sample_window(std::span<const Tensor> frames, SampleMode mode, std::size_t window, Rng& rng) {
    const auto idx = window_indices(frames.size(), mode, window, rng);
    const Shape& fs0 = frames.front().shape();
    const std::size_t per_frame = frames.front().size();
    Tensor out({window, fs0.at(0), fs0.at(1)});
    for (std::size_t t = 0; t < window; ++t) {
        const Tensor& f = frames[idx[t]];
        if (f.shape() != fs0) throw ShapeError("sample_window: frames have inconsistent shapes");
        std::copy(f.storage().begin(), f.storage().end(), out.storage().begin() + static_cast<std::ptrdiff_t>(t * per_frame));
    }
    return out;
}

KeypointClip load_keypoint_clip(const fs::path& path) {
    KeypointClip clip;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(path)) {
            if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) clip.frames.push_back(parse_or_missing(read_json_file(f)));
    } else {
        const json doc = read_json_file(path);
        if (doc.is_object() && doc.contains("frames")) {
            if (!doc["frames"].is_array()) throw FormatError(path.string() + ": frames must be an array");
            for (const json& frame : doc["frames"]) clip.frames.push_back(parse_or_missing(frame));
            clip.frame_width = doc.value("frame_width", 0.0);
            clip.frame_height = doc.value("frame_height", 0.0);
        } else {
            clip.frames.push_back(parse_openpose_frame(doc));
        }
    }
    if (clip.frames.empty()) throw FormatError(path.string() + ": clip contains no frames");
    for (RawFramePose& f : clip.frames) {
        f.frame_width = clip.frame_width;
        f.frame_height = clip.frame_height;
    }
    return clip;
}

json openpose_frame_document(const RawFramePose& pose) {
    json person = json::object();
    person["person_id"] = json::array({-1});
    person["pose_keypoints_2d"] = write_block(pose.body);
    person["hand_left_keypoints_2d"] = write_block(pose.left_hand);
    person["hand_right_keypoints_2d"] = write_block(pose.right_hand);
    return json{{"version", 1.3}, {"people", json::array({person})}};
}

void write_keypoint_clip(const fs::path& path, const KeypointClip& clip) {
    json doc = json::object();
    doc["frame_width"] = clip.frame_width;
    doc["frame_height"] = clip.frame_height;
    json frames = json::array();
    for (const RawFramePose& f : clip.frames) frames.push_back(openpose_frame_document(f));
    doc["frames"] = std::move(frames);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << doc.dump() << '\n';
}

std::vector<Tensor> normalized_clip(const KeypointClip& clip, double frame_width, double frame_height) {
    std::vector<Tensor> out;
    out.reserve(clip.frames.size());
    for (const RawFramePose& f : clip.frames) {
        out.push_back(normalize_frame(select_keypoints(f), frame_width, frame_height));
    }
    return out;
}

std::string split_name(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "unknown";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "validation" || name == "val") return Split::Validation;
    if (name == "test") return Split::Test;
    throw DataError("unknown split name '" + name + "'");
}

const std::vector<ManifestEntry>& DatasetManifest::entries(Split split) const {
    static const std::vector<ManifestEntry> kEmpty;
    const auto it = splits.find(split);
    return it == splits.end() ? kEmpty : it->second;
}

namespace {

void assign_vocabulary(DatasetManifest& manifest, std::vector<std::string> explicit_vocabulary,
                       const std::string& origin) {
    std::set<std::string> seen;
    for (const auto& [split, list] : manifest.splits)
        for (const auto& e : list) seen.insert(e.gloss);
    if (explicit_vocabulary.empty()) {
        manifest.vocabulary.assign(seen.begin(), seen.end());
    } else {
        std::sort(explicit_vocabulary.begin(), explicit_vocabulary.end());
        explicit_vocabulary.erase(std::unique(explicit_vocabulary.begin(), explicit_vocabulary.end()),
                                  explicit_vocabulary.end());
        manifest.vocabulary = std::move(explicit_vocabulary);
    }
    for (auto& [split, list] : manifest.splits) {
        for (auto& e : list) {
            const auto it = std::lower_bound(manifest.vocabulary.begin(), manifest.vocabulary.end(), e.gloss);
            if (it == manifest.vocabulary.end() || *it != e.gloss) {
                throw DataError(origin + ": gloss '" + e.gloss + "' is not in the vocabulary");
            }
            e.gloss_id = static_cast<std::size_t>(it - manifest.vocabulary.begin());
        }
    }
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path) {
    if (!fs::exists(path)) throw DataError("manifest not found: " + path.string());
    const json doc = read_json_file(path);
    const json* entries = nullptr;
    if (doc.is_array()) {
        entries = &doc;
    } else if (doc.is_object() && doc.contains("entries") && doc["entries"].is_array()) {
        entries = &doc["entries"];
    } else {
        throw FormatError(path.string() + ": manifest must be an entry list or an object with \"entries\"");
    }

    const fs::path base = fs::absolute(path).parent_path();
    DatasetManifest manifest;
    std::set<std::pair<std::string, Split>> seen;
    for (const json& item : *entries) {
        ManifestEntry e;
        try {
            e.gloss = item.at("gloss").get<std::string>();
            e.video_id = item.at("video_id").get<std::string>();
            e.split = parse_split(item.at("split").get<std::string>());
            e.keypoint_path = item.at("keypoint_path").get<std::string>();
            e.frame_width = item.value("frame_width", 0.0);
            e.frame_height = item.value("frame_height", 0.0);
        } catch (const json::exception& ex) {
            throw FormatError(path.string() + ": malformed manifest entry: " + ex.what());
        }
        if (e.keypoint_path.is_relative()) e.keypoint_path = (base / e.keypoint_path).lexically_normal();
        if (!seen.emplace(e.video_id, e.split).second) {
            throw DataError(path.string() + ": duplicate entry for video '" + e.video_id + "' in split " +
                            split_name(e.split));
        }
        manifest.splits[e.split].push_back(std::move(e));
    }
    std::vector<std::string> vocab;
    if (doc.is_object() && doc.contains("vocabulary")) vocab = doc["vocabulary"].get<std::vector<std::string>>();
    assign_vocabulary(manifest, std::move(vocab), path.string());
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
    const fs::path base = fs::absolute(path).parent_path();
    json entries = json::array();
    for (const auto& [split, list] : manifest.splits) {
        for (const auto& e : list) {
            fs::path p = fs::absolute(e.keypoint_path).lexically_normal();
            {
                const fs::path rel = p.lexically_relative(base);
                if (!rel.empty() && *rel.begin() != "..") p = rel;
            }
            entries.push_back({{"gloss", e.gloss},
                               {"video_id", e.video_id},
                               {"split", split_name(split)},
                               {"keypoint_path", p.generic_string()},
                               {"frame_width", e.frame_width},
                               {"frame_height", e.frame_height}});
        }
    }
    json doc{{"vocabulary", manifest.vocabulary}, {"entries", std::move(entries)}};
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << doc.dump(1) << '\n';
}

DatasetManifest import_wlasl_index(const fs::path& index_path, std::size_t class_count, const fs::path& pose_root,
                                   double frame_width, double frame_height) {
    const json doc = read_json_file(index_path);
    if (!doc.is_array()) throw FormatError(index_path.string() + ": WLASL index must be a JSON list");
    if (class_count > doc.size()) {
        throw DataError(index_path.string() + ": requested " + std::to_string(class_count) + " glosses, index has " +
                        std::to_string(doc.size()));
    }
    DatasetManifest manifest;
    std::set<std::pair<std::string, Split>> seen;
    for (std::size_t c = 0; c < class_count; ++c) {
        const json& item = doc[c];
        const std::string gloss = item.at("gloss").get<std::string>();
        for (const json& inst : item.at("instances")) {
            ManifestEntry e;
            e.gloss = gloss;
            e.video_id = inst.at("video_id").get<std::string>();
            e.split = parse_split(inst.at("split").get<std::string>());
            e.keypoint_path = pose_root / e.video_id;
            e.frame_width = frame_width;
            e.frame_height = frame_height;
            if (!seen.emplace(e.video_id, e.split).second) {
                throw DataError(index_path.string() + ": duplicate entry for video '" + e.video_id + "'");
            }
            manifest.splits[e.split].push_back(std::move(e));
        }
    }
    assign_vocabulary(manifest, {}, index_path.string());
    return manifest;
}

std::vector<LoadedClip> load_split(const DatasetManifest& manifest, Split split) {
    const auto& entries = manifest.entries(split);
    std::vector<LoadedClip> out(entries.size());
    std::vector<std::exception_ptr> errors(entries.size());
    const auto n = static_cast<std::ptrdiff_t>(entries.size());

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const ManifestEntry& e = entries[static_cast<std::size_t>(i)];
        try {
            const KeypointClip clip = load_keypoint_clip(e.keypoint_path);
            const double w = e.frame_width > 0.0 ? e.frame_width : clip.frame_width;
            const double h = e.frame_height > 0.0 ? e.frame_height : clip.frame_height;
            out[static_cast<std::size_t>(i)] = {normalized_clip(clip, w, h), e.gloss_id, e.video_id};
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const std::exception& ex) {
            throw DataError("video '" + entries[i].video_id + "': " + ex.what());
        }
    }
    return out;
}

}  // namespace gcnbert
