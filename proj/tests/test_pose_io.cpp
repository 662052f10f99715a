#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <set>

#include "gcnbert/pose_io.hpp"
#include "support.hpp"

using namespace gcnbert;
using nlohmann::json;
using testing::TempDir;

namespace {

json block(std::size_t points, double base, double confidence = 1.0) {
    json arr = json::array();
    for (std::size_t i = 0; i < points; ++i) {
        arr.push_back(base + static_cast<double>(i));
        arr.push_back(base + 100.0 + static_cast<double>(i));
        arr.push_back(confidence);
    }
    return arr;
}

json frame_doc(bool with_left = true, bool with_right = true) {
    json person{{"pose_keypoints_2d", block(25, 0.0)}};
    if (with_left) person["hand_left_keypoints_2d"] = block(21, 1000.0);
    if (with_right) person["hand_right_keypoints_2d"] = block(21, 2000.0);
    return json{{"people", json::array({person})}};
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("parse_openpose_frame") {
    const RawFramePose full = parse_openpose_frame(frame_doc());
    CHECK(full.body[24].x == 24.0);
    CHECK(full.body[24].y == 124.0);
    CHECK(full.left_hand[20].x == 1020.0);
    CHECK(full.right_hand[0].confidence == 1.0);

    const RawFramePose no_left = parse_openpose_frame(frame_doc(false, true));
    for (const Keypoint& kp : no_left.left_hand) CHECK(kp.confidence == 0.0);
    CHECK(no_left.right_hand[3].x == 2003.0);

    CHECK_THROWS_AS(parse_openpose_frame(json{{"people", json::array()}}), NoPersonError);
    CHECK_THROWS_AS(parse_openpose_frame(json{{"frames", 1}}), FormatError);

    json short_body = frame_doc();
    short_body["people"][0]["pose_keypoints_2d"] = block(18, 0.0);
    CHECK_THROWS_AS(parse_openpose_frame(short_body), FormatError);
    json short_hand = frame_doc();
    short_hand["people"][0]["hand_right_keypoints_2d"] = block(20, 0.0);
    CHECK_THROWS_AS(parse_openpose_frame(short_hand), FormatError);
    json bad_conf = frame_doc();
    bad_conf["people"][0]["pose_keypoints_2d"][2] = 1.5;
    CHECK_THROWS_AS(parse_openpose_frame(bad_conf), FormatError);

    // Only the first person is used.
    json two = frame_doc();
    json other = two["people"][0];
    other["pose_keypoints_2d"] = block(25, 500.0);
    two["people"].push_back(other);
    CHECK(parse_openpose_frame(two).body[0].x == 0.0);
}

TEST_CASE("select_keypoints ordering contract") {
    const RawFramePose raw = parse_openpose_frame(frame_doc());
    const SelectedKeypoints sel = select_keypoints(raw);
    CHECK(sel.size() == 55);
    for (std::size_t i = 0; i < 13; ++i) CHECK(sel[i].x == static_cast<double>(i));
    for (std::size_t i = 0; i < 21; ++i) {
        CHECK(sel[13 + i].x == 1000.0 + static_cast<double>(i));
        CHECK(sel[34 + i].x == 2000.0 + static_cast<double>(i));
    }
    // Body keypoints 13..24 (legs and feet) never appear.
    for (const Keypoint& kp : sel) CHECK_FALSE((kp.x >= 13.0 && kp.x <= 24.0));

    RawFramePose swapped = raw;
    std::swap(swapped.left_hand, swapped.right_hand);
    const SelectedKeypoints sel2 = select_keypoints(swapped);
    CHECK(sel2[13].x == 2000.0);
    CHECK(sel2[34].x == 1000.0);
}

TEST_CASE("normalize_frame") {
    SelectedKeypoints sel{};
    const double W = 640, H = 480;
    sel[0] = {W / 2, H / 2, 0.9};
    sel[1] = {0, 0, 1.0};
    sel[2] = {W, H, 1.0};
    sel[3] = {123, 77, 0.0};  // missing
    const Tensor out = normalize_frame(sel, W, H);
    CHECK(out.shape() == Shape{55, 2});
    CHECK(out.at(0, 0) == 0.0);
    CHECK(out.at(0, 1) == 0.0);
    CHECK(out.at(1, 0) == -1.0);
    CHECK(out.at(1, 1) == -1.0);
    CHECK(out.at(2, 0) == 1.0);
    CHECK(out.at(2, 1) == 1.0);
    CHECK(out.at(3, 0) == 0.0);
    CHECK(out.at(3, 1) == 0.0);
    CHECK_THROWS_AS(normalize_frame(sel, 0, H), DataError);
    CHECK_THROWS_AS(normalize_frame(sel, W, -1), DataError);

    // Always 55×2 and inside [-1, 1], whatever is missing.
    const Tensor empty = normalize_frame(SelectedKeypoints{}, W, H);
    CHECK(empty == Tensor({55, 2}));
}

TEST_CASE("normalization is invertible for present keypoints") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const double W = 100 + 1000 * u(rng), H = 100 + 1000 * u(rng);
        SelectedKeypoints sel{};
        for (auto& kp : sel) kp = {W * u(rng), H * u(rng), 0.5};
        const Tensor n = normalize_frame(sel, W, H);
        for (std::size_t i = 0; i < 55; ++i) {
            const auto back = denormalize_point(n.at(i, 0), n.at(i, 1), W, H);
            CHECK(std::abs(back[0] - sel[i].x) < 1e-9);
            CHECK(std::abs(back[1] - sel[i].y) < 1e-9);
        }
    }
}

TEST_CASE("window sampling rules") {
    Rng rng(0);
    std::vector<std::size_t> expected(50);
    for (std::size_t i = 0; i < 50; ++i) expected[i] = i;
    CHECK(window_indices(50, SampleMode::Train, 50, rng) == expected);
    CHECK(window_indices(50, SampleMode::Eval, 50, rng) == expected);

    std::vector<std::size_t> cyclic;
    for (std::size_t i = 0; i < 30; ++i) cyclic.push_back(i);
    for (std::size_t i = 0; i < 20; ++i) cyclic.push_back(i);
    CHECK(window_indices(30, SampleMode::Train, 50, rng) == cyclic);
    CHECK(window_indices(30, SampleMode::Eval, 50, rng) == cyclic);

    std::vector<std::size_t> centred;
    for (std::size_t i = 15; i < 65; ++i) centred.push_back(i);
    CHECK(window_indices(80, SampleMode::Eval, 50, rng) == centred);

    std::set<std::size_t> starts;
    for (int draw = 0; draw < 1000; ++draw) {
        const auto idx = window_indices(80, SampleMode::Train, 50, rng);
        REQUIRE(idx.size() == 50);
        for (std::size_t i = 1; i < 50; ++i) CHECK(idx[i] == idx[0] + i);
        starts.insert(idx[0]);
    }
    CHECK(starts.size() == 31);
    CHECK(*starts.begin() == 0);
    CHECK(*starts.rbegin() == 30);

    CHECK_THROWS_AS(window_indices(0, SampleMode::Eval, 50, rng), DataError);
    for (std::size_t len : {1u, 7u, 49u, 50u, 51u, 200u}) {
        CHECK(window_indices(len, SampleMode::Train, 50, rng).size() == 50);
    }
}

TEST_CASE("sample_window stacks frames") {
    std::vector<Tensor> frames;
    for (int f = 0; f < 5; ++f) frames.push_back(Tensor::full({55, 2}, static_cast<Real>(f)));
    Rng rng(0);
    const Tensor w = sample_window(frames, SampleMode::Eval, 8, rng);
    CHECK(w.shape() == Shape{8, 55, 2});
    CHECK(w[7 * 110] == 2.0);  // frame index 7 % 5
}

TEST_CASE("clip files in every accepted layout") {
    TempDir dir("clips");
    // Directory of per-frame documents, read in filename order.
    const auto frames_dir = dir / "frames";
    std::filesystem::create_directories(frames_dir);
    for (int f = 0; f < 3; ++f) {
        json doc = frame_doc();
        doc["people"][0]["pose_keypoints_2d"][0] = 10.0 * f;
        write_text(frames_dir / ("v_" + std::to_string(f) + "_keypoints.json"), doc.dump());
    }
    write_text(frames_dir / "v_3_keypoints.json", json{{"people", json::array()}}.dump());
    const KeypointClip from_dir = load_keypoint_clip(frames_dir);
    REQUIRE(from_dir.frames.size() == 4);
    CHECK(from_dir.frames[2].body[0].x == 20.0);
    CHECK(from_dir.frames[3].body[0].confidence == 0.0);

    // One clip document; written and read back losslessly.
    KeypointClip clip = from_dir;
    clip.frame_width = 320;
    clip.frame_height = 240;
    write_keypoint_clip(dir / "clip.json", clip);
    const KeypointClip again = load_keypoint_clip(dir / "clip.json");
    REQUIRE(again.frames.size() == 4);
    CHECK(again.frame_width == 320);
    CHECK(again.frames[1].body[0].x == 10.0);
    CHECK(again.frames[1].right_hand[20].y == clip.frames[1].right_hand[20].y);

    // A single frame document.
    write_text(dir / "single.json", frame_doc().dump());
    CHECK(load_keypoint_clip(dir / "single.json").frames.size() == 1);

    write_text(dir / "empty.json", "");
    CHECK_THROWS_AS(load_keypoint_clip(dir / "empty.json"), FormatError);
    write_text(dir / "noframes.json", json{{"frames", json::array()}}.dump());
    CHECK_THROWS_AS(load_keypoint_clip(dir / "noframes.json"), FormatError);
    CHECK_THROWS_AS(load_keypoint_clip(dir / "missing.json"), DataError);
}

TEST_CASE("manifest loading") {
    TempDir dir("manifest");
    const json toy = json::array({
        {{"gloss", "book"}, {"video_id", "v1"}, {"split", "train"}, {"keypoint_path", "a.json"}},
        {{"gloss", "apple"}, {"video_id", "v2"}, {"split", "train"}, {"keypoint_path", "b.json"}},
        {{"gloss", "book"}, {"video_id", "v3"}, {"split", "val"}, {"keypoint_path", "c.json"}},
        {{"gloss", "apple"}, {"video_id", "v4"}, {"split", "test"}, {"keypoint_path", "/abs/d.json"}},
    });
    write_text(dir / "m.json", toy.dump());
    const DatasetManifest m = load_manifest(dir / "m.json");
    CHECK(m.class_count() == 2);
    CHECK(m.vocabulary == std::vector<std::string>{"apple", "book"});
    REQUIRE(m.entries(Split::Train).size() == 2);
    CHECK(m.entries(Split::Train)[0].gloss_id == 1);
    CHECK(m.entries(Split::Train)[1].gloss_id == 0);
    CHECK(m.entries(Split::Validation).size() == 1);
    CHECK(m.entries(Split::Test)[0].keypoint_path == "/abs/d.json");
    CHECK(m.entries(Split::Train)[0].keypoint_path == dir.path() / "a.json");

    json bad_split = toy;
    bad_split[0]["split"] = "dev";
    write_text(dir / "bad_split.json", bad_split.dump());
    CHECK_THROWS_AS(load_manifest(dir / "bad_split.json"), DataError);

    json dup = toy;
    dup.push_back(toy[0]);
    write_text(dir / "dup.json", dup.dump());
    CHECK_THROWS_AS(load_manifest(dir / "dup.json"), DataError);

    // Same video in two different splits is allowed.
    json cross = toy;
    cross.push_back(toy[0]);
    cross.back()["split"] = "test";
    write_text(dir / "cross.json", cross.dump());
    CHECK_NOTHROW(load_manifest(dir / "cross.json"));

    const json with_vocab{{"vocabulary", {"apple", "cat"}}, {"entries", toy}};
    write_text(dir / "vocab.json", with_vocab.dump());
    CHECK_THROWS_AS(load_manifest(dir / "vocab.json"), DataError);

    CHECK_THROWS_AS(load_manifest(dir / "nope.json"), DataError);
}

TEST_CASE("manifest round trip") {
    TempDir dir("roundtrip");
    DatasetManifest m;
    m.vocabulary = {"a", "b", "c"};
    for (std::size_t i = 0; i < 9; ++i) {
        ManifestEntry e;
        e.gloss = m.vocabulary[i % 3];
        e.gloss_id = i % 3;
        e.video_id = "vid" + std::to_string(i);
        e.split = static_cast<Split>(i % 3);
        e.keypoint_path = dir.path() / "clips" / (e.video_id + ".json");
        e.frame_width = 256;
        e.frame_height = 200 + static_cast<double>(i);
        m.splits[e.split].push_back(e);
    }
    save_manifest(m, dir / "manifest.json");
    const DatasetManifest back = load_manifest(dir / "manifest.json");
    CHECK(back.vocabulary == m.vocabulary);
    for (Split s : {Split::Train, Split::Validation, Split::Test}) {
        REQUIRE(back.entries(s).size() == m.entries(s).size());
        for (std::size_t i = 0; i < m.entries(s).size(); ++i) {
            const auto& a = m.entries(s)[i];
            const auto& b = back.entries(s)[i];
            CHECK(a.gloss == b.gloss);
            CHECK(a.gloss_id == b.gloss_id);
            CHECK(a.video_id == b.video_id);
            CHECK(a.keypoint_path == b.keypoint_path);
            CHECK(a.frame_width == b.frame_width);
            CHECK(a.frame_height == b.frame_height);
        }
    }
}

TEST_CASE("split names") {
    CHECK(parse_split("train") == Split::Train);
    CHECK(parse_split("val") == Split::Validation);
    CHECK(parse_split("validation") == Split::Validation);
    CHECK(parse_split("test") == Split::Test);
    CHECK_THROWS_AS(parse_split("holdout"), DataError);
}

TEST_CASE("WLASL index import keeps the first N glosses") {
    TempDir dir("wlasl");
    const json index = json::array({
        {{"gloss", "book"},
         {"instances", json::array({{{"video_id", "1"}, {"split", "train"}}, {{"video_id", "2"}, {"split", "val"}}})}},
        {{"gloss", "drink"}, {"instances", json::array({{{"video_id", "3"}, {"split", "test"}}})}},
        {{"gloss", "computer"}, {"instances", json::array({{{"video_id", "4"}, {"split", "train"}}})}},
    });
    write_text(dir / "index.json", index.dump());
    const DatasetManifest m = import_wlasl_index(dir / "index.json", 2, dir / "poses");
    CHECK(m.vocabulary == std::vector<std::string>{"book", "drink"});
    CHECK(m.entries(Split::Train).size() == 1);
    CHECK(m.entries(Split::Validation).size() == 1);
    CHECK(m.entries(Split::Test).size() == 1);
    CHECK_THROWS_AS(import_wlasl_index(dir / "index.json", 4, dir / "poses"), DataError);
}

TEST_CASE("load_split names the failing video") {
    TempDir dir("split");
    const json manifest = json::array({
        {{"gloss", "a"}, {"video_id", "good"}, {"split", "train"}, {"keypoint_path", "good.json"},
         {"frame_width", 100}, {"frame_height", 100}},
        {{"gloss", "b"}, {"video_id", "broken"}, {"split", "train"}, {"keypoint_path", "broken.json"},
         {"frame_width", 100}, {"frame_height", 100}},
    });
    write_text(dir / "m.json", manifest.dump());
    write_text(dir / "good.json", frame_doc().dump());
    write_text(dir / "broken.json", "{not json");
    const DatasetManifest m = load_manifest(dir / "m.json");
    try {
        load_split(m, Split::Train);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("broken") != std::string::npos);
    }
    write_text(dir / "broken.json", frame_doc().dump());
    const auto clips = load_split(m, Split::Train);
    REQUIRE(clips.size() == 2);
    CHECK(clips[1].gloss_id == 1);
    CHECK(clips[0].frames[0].shape() == Shape{55, 2});
}
