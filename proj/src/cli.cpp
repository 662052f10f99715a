#include "gcnbert/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gcnbert/checkpoint.hpp"
#include "gcnbert/classifier.hpp"
#include "gcnbert/evaluator.hpp"
#include "gcnbert/gradcheck_suite.hpp"
#include "gcnbert/kernels.hpp"
#include "gcnbert/synth.hpp"
#include "gcnbert/trainer.hpp"

namespace gcnbert {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure : std::runtime_error {
    Failure(int code, const std::string& what) : std::runtime_error(what), code(code) {}
    int code;
};

void error_record(std::ostream& err, const std::string& command, const std::string& kind, int code,
                  const std::string& message) {
    err << json{{"error", kind}, {"command", command}, {"exit_code", code}, {"message", message}}.dump() << std::endl;
}

fs::path manifest_path(const fs::path& data) {
    if (!fs::exists(data)) throw DataError("data path does not exist: " + data.string());
    if (fs::is_directory(data)) {
        const fs::path m = data / "manifest.json";
        if (!fs::exists(m)) throw DataError("no manifest.json in data directory " + data.string());
        return m;
    }
    return data;
}

RunConfig load_run_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    if (!fs::exists(path)) throw ConfigError("config file does not exist: " + path);
    return RunConfig::load(path);
}

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    std::string out;

    std::string data;
    std::string checkpoint;
    std::string split = "test";
    std::string clip;
    std::size_t k = 5;
    double frame_width = 0.0;
    double frame_height = 0.0;
    bool json_output = false;
    double threshold = 1e-4;

    SynthSpec synth;

    std::string wlasl_index;
    std::string pose_root;
    std::size_t wlasl_classes = 100;
};

int cmd_train(const Options& o, std::ostream& out) {
    RunConfig config = load_run_config(o.config);
    if (o.seed) config.train.seed = *o.seed;
    const DatasetManifest manifest = load_manifest(manifest_path(o.data));
    const fs::path out_dir = o.out.empty() ? fs::path("run") : fs::path(o.out);
    train(manifest, config, out_dir, [&out](const EpochRecord& rec) { out << rec.to_json().dump() << std::endl; });
    out << json{{"status", "done"}, {"out", out_dir.string()}}.dump() << std::endl;
    return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    const DatasetManifest manifest = load_manifest(manifest_path(o.data));
    const Split split = parse_split(o.split);
    const EvalReport report = evaluate(ckpt, manifest, split);
    json doc = report.to_json(ckpt.vocabulary);
    doc["split"] = split_name(split);
    doc["checkpoint"] = o.checkpoint;
    doc["config"] = ckpt.config.to_json();
    const fs::path report_path =
        o.out.empty() ? fs::path(o.checkpoint).parent_path() / ("eval_" + split_name(split) + ".json") : fs::path(o.out);
    {
        std::ofstream f(report_path);
        if (!f) throw DataError("cannot write report " + report_path.string());
        f << doc.dump(1) << '\n';
    }
    if (o.json_output) {
        out << doc.dump() << std::endl;
    } else {
        out << report.to_table(ckpt.vocabulary);
        out << "report written to " << report_path.string() << std::endl;
    }
    return kExitOk;
}

int cmd_predict(const Options& o, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    const KeypointClip clip = load_keypoint_clip(o.clip);
    const double w = o.frame_width > 0.0 ? o.frame_width : (clip.frame_width > 0.0 ? clip.frame_width : 256.0);
    const double h = o.frame_height > 0.0 ? o.frame_height : (clip.frame_height > 0.0 ? clip.frame_height : 256.0);
    const std::vector<Tensor> frames = normalized_clip(clip, w, h);
    Rng unused(0);
    const Tensor poses = sample_window(frames, SampleMode::Eval, ckpt.config.model.window, unused);
    const Tensor logits = ckpt.model.logits(poses);
    const std::vector<std::size_t> top = predict(logits.data(), o.k);
    const std::vector<double> probs = softmax_probabilities(logits.data());
    json list = json::array();
    for (std::size_t cls : top) {
        list.push_back(json{{"gloss", ckpt.vocabulary.at(cls)}, {"probability", probs[cls]}});
    }
    if (o.json_output) {
        out << list.dump() << std::endl;
    } else {
        char line[256];
        for (std::size_t i = 0; i < top.size(); ++i) {
            std::snprintf(line, sizeof line, "%zu\t%s\t%.6f\n", i + 1, ckpt.vocabulary.at(top[i]).c_str(),
                          probs[top[i]]);
            out << line;
        }
    }
    return kExitOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
    SynthSpec spec = o.synth;
    if (o.seed) spec.seed = *o.seed;
    if (o.out.empty()) throw std::invalid_argument("synth: --out is required");
    const DatasetManifest m = generate_synth_dataset(spec, o.out);
    out << json{{"classes", m.class_count()},
                {"train", m.entries(Split::Train).size()},
                {"validation", m.entries(Split::Validation).size()},
                {"test", m.entries(Split::Test).size()},
                {"manifest", (fs::path(o.out) / "manifest.json").string()}}
               .dump()
        << std::endl;
    return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
    const RunConfig config = load_run_config(o.config);
    const ModelConfig toy = gradcheck_toy_config(config.model);
    auto cases = model_gradcheck_cases(toy, o.seed.value_or(0));
    const GradCheckReport report = run_gradcheck(cases, o.threshold);
    if (o.json_output) {
        out << report.to_json().dump() << std::endl;
    } else {
        out << report.to_table();
    }
    if (!report.passed()) {
        std::string names;
        for (const auto& f : report.failures()) names += (names.empty() ? "" : ",") + f;
        throw Failure(kExitNumeric, "gradient check above threshold in: " + names);
    }
    return kExitOk;
}

int cmd_import_wlasl(const Options& o, std::ostream& out) {
    if (o.out.empty()) throw std::invalid_argument("import-wlasl: --out is required");
    const DatasetManifest m = import_wlasl_index(o.wlasl_index, o.wlasl_classes, o.pose_root);
    save_manifest(m, o.out);
    out << json{{"classes", m.class_count()},
                {"train", m.entries(Split::Train).size()},
                {"validation", m.entries(Split::Validation).size()},
                {"test", m.entries(Split::Test).size()}}
               .dump()
        << std::endl;
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Pose-based word-level sign language recognition (GCN + BERT)"};
    app.require_subcommand(1, 1);
    Options o;

    auto common = [&o](CLI::App* sub, bool uses_out = true) {
        sub->add_option("--config", o.config, "Run configuration (flat dotted-key JSON)");
        sub->add_option_function<std::uint64_t>("--seed", [&o](std::uint64_t s) { o.seed = s; }, "Seed override");
        sub->add_option("--threads", o.threads, "OpenMP threads (1 = bit-reproducible path)")
            ->check(CLI::NonNegativeNumber);
        if (uses_out) sub->add_option("--out", o.out, "Output path");
    };

    auto* train_cmd = app.add_subcommand("train", "Train on a dataset manifest");
    common(train_cmd);
    train_cmd->add_option("data", o.data, "Dataset directory or manifest file")->required();

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    common(eval_cmd);
    eval_cmd->add_option("checkpoint", o.checkpoint, "Checkpoint file")->required();
    eval_cmd->add_option("data", o.data, "Dataset directory or manifest file")->required();
    eval_cmd->add_option("--split", o.split, "train, validation or test");
    eval_cmd->add_flag("--json", o.json_output, "Print the report as JSON");

    auto* predict_cmd = app.add_subcommand("predict", "Top-k glosses for one keypoint clip");
    common(predict_cmd, false);
    predict_cmd->add_option("checkpoint", o.checkpoint, "Checkpoint file")->required();
    predict_cmd->add_option("clip", o.clip, "Keypoint clip (file or directory of frames)")->required();
    predict_cmd->add_option("-k", o.k, "Number of glosses to print")->check(CLI::PositiveNumber);
    predict_cmd->add_option("--frame-width", o.frame_width, "Frame width in pixels (default: from clip, else 256)");
    predict_cmd->add_option("--frame-height", o.frame_height, "Frame height in pixels");
    predict_cmd->add_flag("--json", o.json_output, "Print JSON");

    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic gloss dataset");
    common(synth_cmd);
    synth_cmd->add_option("--classes", o.synth.classes, "Number of glosses");
    synth_cmd->add_option("--per-class", o.synth.samples_per_class, "Samples per gloss");
    synth_cmd->add_option("--frames", o.synth.frame_count, "Frames per clip");
    synth_cmd->add_option("--noise", o.synth.noise_sigma, "Gaussian noise sigma in normalized units");

    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every layer at toy sizes");
    common(grad_cmd, false);
    grad_cmd->add_flag("--json", o.json_output, "Print JSON");
    grad_cmd->add_option("--threshold", o.threshold, "Largest accepted relative error")->check(CLI::PositiveNumber);

    auto* import_cmd = app.add_subcommand("import-wlasl", "Build a manifest from a WLASL index file");
    common(import_cmd);
    import_cmd->add_option("--index", o.wlasl_index, "WLASL_v0.3.json")->required();
    import_cmd->add_option("--poses", o.pose_root, "Directory with <video_id> keypoint clips")->required();
    import_cmd->add_option("--classes", o.wlasl_classes, "Keep the first N glosses (100, 300, ...)");

    std::string command = "gcnbert";
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        error_record(err, command, "usage", kExitUsage, e.what());
        return kExitUsage;
    }
    const CLI::App* sub = app.get_subcommands().front();
    command = sub->get_name();
    kernels::set_threads(o.threads);

    try {
        if (sub == train_cmd) return cmd_train(o, out);
        if (sub == eval_cmd) return cmd_eval(o, out);
        if (sub == predict_cmd) return cmd_predict(o, out);
        if (sub == synth_cmd) return cmd_synth(o, out);
        if (sub == grad_cmd) return cmd_gradcheck(o, out);
        if (sub == import_cmd) return cmd_import_wlasl(o, out);
    } catch (const Failure& e) {
        error_record(err, command, e.code == kExitNumeric ? "numeric" : "failure", e.code, e.what());
        return e.code;
    } catch (const NumericError& e) {
        error_record(err, command, "numeric", kExitNumeric, e.what());
        return kExitNumeric;
    } catch (const DataError& e) {
        error_record(err, command, "data", kExitData, e.what());
        return kExitData;
    } catch (const ShapeError& e) {
        error_record(err, command, "data", kExitData, e.what());
        return kExitData;
    } catch (const ConfigError& e) {
        error_record(err, command, "usage", kExitUsage, e.what());
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        error_record(err, command, "usage", kExitUsage, e.what());
        return kExitUsage;
    } catch (const std::out_of_range& e) {
        error_record(err, command, "usage", kExitUsage, e.what());
        return kExitUsage;
    } catch (const nlohmann::json::exception& e) {
        error_record(err, command, "data", kExitData, e.what());
        return kExitData;
    } catch (const std::exception& e) {
        error_record(err, command, "data", kExitData, e.what());
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace gcnbert
