#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "json_config.hpp"
#include "log.hpp"
#include "mprof/bench.hpp"
#include "mprof/classic.hpp"
#include "mprof/eval.hpp"
#include "mprof/ingest.hpp"
#include "mprof/nn/train.hpp"
#include "mprof/profile.hpp"
#include "mprof/synth.hpp"

namespace mprof::cli {

namespace fs = std::filesystem;

namespace {

struct BuildProfileArgs {
    std::string manifest;
    std::string out;
    std::string belt = "medium";
    int channels = 1;
};

struct SynthArgs {
    int count = 100;
    std::uint64_t seed = 0;
    std::string out;
    int width = 256;
    int height = 256;
    double noise = 6.0;
    std::vector<double> mix{0.25, 0.25, 0.25, 0.25};
    double second_event_prob = 0.25;
    bool position_critical = false;
};

struct TrainArgs {
    std::string data;
    std::string out;
    std::string log;
    std::uint64_t seed = 0;
    int epochs = 20;
    int batch_size = 8;
    double lr = 1e-3;
    double weight_decay = 1e-3;
    int max_steps = 0;
    int threads = 0;
    bool mirror_augment = false;
    bool no_coordconv = false;
    int input_width = 256;
    int input_height = 256;
};

struct DetectArgs {
    std::string method = "neural";
    std::string checkpoint;
    std::string params;
    std::vector<std::string> profiles;
    std::string data;
    std::string split = "test";
    std::string out;
    double conf = 0.2;
    double nms = 0.5;
};

struct EvalArgs {
    std::string dets;
    std::string gt;
    double iou = 0.3;
    double conf = 0.2;
    std::string classes = "LR,LL,OR,OL";
    std::string out;
    std::string csv;
    std::string dataset_id;
};

struct BenchArgs {
    int width = 1280;
    int belt_height = 65;
    int channels = 1;
    int iterations = 1000;
    std::uint64_t seed = 0;
    std::string out;
};

void print_error(std::string_view code, std::string_view message) {
    Json j;
    j["error"] = {{"code", code}, {"message", message}};
    std::fprintf(stderr, "%s\n", j.dump().c_str());
}

CLI::App* add_subcommand(CLI::App& app, const std::string& name, const std::string& description,
                         std::string& config_path) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("--config", config_path, "JSON object of flag values; flags given on the command line win");
    return sub;
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
    for (const auto& a : args)
        if (a == flag || a.starts_with(flag + "=")) return true;
    return false;
}

// Replaces `--config FILE` by the flags it holds. Keys already given on the
// command line are skipped; unknown keys surface as unknown flags.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string path;
    auto it = std::find_if(args.begin(), args.end(),
                           [](const std::string& a) { return a == "--config" || a.starts_with("--config="); });
    if (it == args.end()) return args;
    if (*it == "--config") {
        if (std::next(it) == args.end()) throw CLI::ArgumentMismatch("--config requires a file path");
        path = *std::next(it);
        it = args.erase(it, std::next(it, 2));
    } else {
        path = it->substr(std::string("--config=").size());
        it = args.erase(it);
    }
    Json j;
    try {
        j = read_json_file(path);
    } catch (const Error& e) {
        throw CLI::ConversionError(std::string("cannot read config: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<std::string> injected;
    for (const auto& [key, value] : j.items()) {
        // keys name long flags; snake_case spellings are accepted too
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        if (has_flag(args, flag)) continue;
        auto scalar = [&](const Json& v) -> std::string {
            if (v.is_string()) return v.get<std::string>();
            if (v.is_number()) return v.dump();
            if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
            throw CLI::ConversionError("config value for '" + key + "' must be a scalar or an array");
        };
        if (value.is_boolean()) {
            injected.push_back(flag + "=" + scalar(value));
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& v : value) joined += (joined.empty() ? "" : ",") + scalar(v);
            injected.push_back(flag);
            injected.push_back(joined);
        } else {
            injected.push_back(flag);
            injected.push_back(scalar(value));
        }
    }
    args.insert(it, injected.begin(), injected.end());
    return args;
}

void log_resolved(const CLI::App* sub) {
    info(sub->get_name() + " config " + resolved_config(sub).dump());
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::fwrite(text.data(), 1, text.size(), stdout);
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << text;
}

std::vector<ManeuverClass> parse_class_list(const std::string& text) {
    std::vector<ManeuverClass> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(parse_class(item));
    }
    if (out.empty()) throw Error(ErrorCode::UsageError, "empty class list");
    return out;
}

int run_build_profile(const BuildProfileArgs& a) {
    const VideoManifest manifest = load_manifest(a.manifest);
    auto source = open_source(manifest);
    const MotionProfile p = build_profile(*source, manifest, parse_belt(a.belt), a.channels);
    export_profile(p, a.out);
    info("wrote " + a.out + " (" + std::to_string(p.dims.width) + "x" + std::to_string(p.dims.height) + ")");
    return 0;
}

int run_synth(const SynthArgs& a) {
    if (a.mix.size() != kNumClasses) throw Error(ErrorCode::UsageError, "--mix needs 4 weights (LR,LL,OR,OL)");
    DatasetConfig cfg;
    cfg.count = a.count;
    cfg.seed = a.seed;
    cfg.dims = {a.width, a.height, 1};
    cfg.noise_sigma = a.noise;
    std::copy(a.mix.begin(), a.mix.end(), cfg.class_mix.begin());
    cfg.second_event_prob = a.second_event_prob;
    cfg.position_critical = a.position_critical;
    const DatasetIndex index = make_dataset(cfg, a.out);
    for (const auto& w : index.warnings) warn(w);
    info("wrote " + std::to_string(index.entries.size()) + " samples to " + a.out + " (train " +
         std::to_string(index.count_in("train")) + ", val " + std::to_string(index.count_in("val")) +
         ", test " + std::to_string(index.count_in("test")) + ")");
    return 0;
}

int run_train(const TrainArgs& a) {
    nn::DetectorConfig det;
    det.coordconv = !a.no_coordconv;
    det.input_width = a.input_width;
    det.input_height = a.input_height;
    det.validate();
    nn::TrainConfig tc;
    tc.seed = a.seed;
    tc.max_epochs = a.epochs;
    tc.batch_size = a.batch_size;
    tc.lr = a.lr;
    tc.weight_decay = a.weight_decay;
    tc.max_steps = a.max_steps;
    tc.threads = a.threads;
    tc.mirror_augment = a.mirror_augment;
    tc.validate();
    const auto result = nn::train_on_dataset(a.data, det, tc, [](const nn::LossRecord& r) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "epoch %d %s loss %.6f", r.epoch, r.split.c_str(), r.loss);
        info(buf);
    });
    nn::save_checkpoint(a.out, result.checkpoint);
    const std::string log_path = a.log.empty() ? a.out + ".loss.csv" : a.log;
    nn::write_loss_log(log_path, result.log);
    info("best epoch " + std::to_string(result.best_epoch) + ", " + std::to_string(result.steps) +
         " steps; wrote " + a.out + " and " + log_path);
    return 0;
}

int run_detect(const DetectArgs& a) {
    std::vector<MotionProfile> profiles;
    for (const auto& p : a.profiles) profiles.push_back(import_profile(p));
    if (!a.data.empty())
        for (auto& s : load_split(a.data, a.split)) profiles.push_back(std::move(s.profile));
    if (profiles.empty()) throw Error(ErrorCode::UsageError, "no input: pass --profile or --data");

    std::vector<DetectionRecord> out;
    if (a.method == "neural") {
        if (a.checkpoint.empty()) throw Error(ErrorCode::UsageError, "--checkpoint is required for --method neural");
        const auto ckpt = nn::load_checkpoint(a.checkpoint);
        nn::Detector<float> detector(ckpt.config);
        detector.set_parameters(ckpt.parameters);
        const nn::InferOptions opts{a.conf, a.nms};
        for (const auto& p : profiles)
            for (const auto& b : nn::infer(p, detector, opts)) out.push_back({p.provenance.video_id, b});
    } else if (a.method == "classic") {
        classic::ClassicParams params;
        if (!a.params.empty()) params = classic::params_from_json(read_json_file(a.params));
        info("classic params " + classic::params_to_json(params).dump());
        for (const auto& p : profiles)
            for (const auto& b : classic::detect_classic(p, p.provenance.v_x, params))
                out.push_back({p.provenance.video_id, b});
    } else {
        throw Error(ErrorCode::UsageError, "unknown --method '" + a.method + "' (neural | classic)");
    }
    write_detections_jsonl(a.out, out);
    info("wrote " + std::to_string(out.size()) + " detections for " + std::to_string(profiles.size()) +
         " profiles to " + a.out);
    return 0;
}

int run_eval(const EvalArgs& a) {
    eval::EvalOptions opts;
    opts.iou_thresh = a.iou;
    opts.conf_thresh = a.conf;
    opts.classes = parse_class_list(a.classes);
    opts.dataset_id = a.dataset_id;
    const auto report = eval::evaluate_files(a.dets, a.gt, opts);
    for (const auto& w : report.warnings) warn(w);
    write_output(a.out, report_to_json(report).dump(2) + "\n");
    if (!a.csv.empty()) write_output(a.csv, report_to_csv(report));
    char buf[64];
    std::snprintf(buf, sizeof buf, "mAP %.4f", report.map);
    info(buf);
    return 0;
}

int run_bench(const BenchArgs& a) {
    BenchOptions opts;
    opts.width = a.width;
    opts.belt_height = a.belt_height;
    opts.channels = a.channels;
    opts.iterations = a.iterations;
    opts.seed = a.seed;
    const auto report = bench_strip(opts);
    write_output(a.out, bench_to_json(report).dump(2) + "\n");
    char buf[160];
    std::snprintf(buf, sizeof buf, "mean %.4f ms, p95 %.4f ms, %.0f strips/s, %.4f of the 60 fps budget",
                  report.mean_ms, report.p95_ms, report.strips_per_second, report.budget_ratio);
    info(buf);
    return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"Motion-profile maneuver detection toolkit", "mprof"};
    app.require_subcommand(1);
    app.fallthrough(false);
    std::string config_path;  // consumed by expand_config before parsing

    BuildProfileArgs bp;
    auto* bp_cmd = add_subcommand(app, "build-profile", "Build a motion profile from a video manifest", config_path);
    bp_cmd->add_option("--manifest", bp.manifest, "Video manifest JSON")->required();
    bp_cmd->add_option("--out", bp.out, "Output profile (.pgm for gray, .ppm for color)")->required();
    bp_cmd->add_option("--belt", bp.belt, "Pixel belt: far | medium | close | lo:hi")->capture_default_str();
    bp_cmd->add_option("--channels", bp.channels, "1 = luma profile, 3 = color profile")
        ->check(CLI::IsMember({1, 3}))
        ->capture_default_str();

    SynthArgs sy;
    auto* sy_cmd = add_subcommand(app, "synth", "Generate a synthetic labeled dataset", config_path);
    sy_cmd->add_option("--count", sy.count, "Number of samples")->check(CLI::PositiveNumber)->capture_default_str();
    sy_cmd->add_option("--seed", sy.seed, "Generator seed")->capture_default_str();
    sy_cmd->add_option("--out", sy.out, "Output directory")->required();
    sy_cmd->add_option("--width", sy.width, "Profile width")->check(CLI::PositiveNumber)->capture_default_str();
    sy_cmd->add_option("--height", sy.height, "Profile height (rows = time)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sy_cmd->add_option("--noise", sy.noise, "Gaussian noise sigma in 8-bit units")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sy_cmd->add_option("--mix", sy.mix, "Class weights LR,LL,OR,OL")->delimiter(',')->capture_default_str();
    sy_cmd->add_option("--second-event-prob", sy.second_event_prob, "Probability of a second event per sample")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    sy_cmd->add_flag("--position-critical", sy.position_critical,
                     "Overtakes only; right traces are translated copies of left ones")
        ->capture_default_str();

    TrainArgs tr;
    auto* tr_cmd = add_subcommand(app, "train", "Train the detector on a synthetic dataset", config_path);
    tr_cmd->add_option("--data", tr.data, "Dataset directory (uses the train and val splits)")->required();
    tr_cmd->add_option("--out", tr.out, "Output checkpoint")->required();
    tr_cmd->add_option("--log", tr.log, "Loss log CSV (default: <out>.loss.csv)");
    tr_cmd->add_option("--seed", tr.seed, "Initialization and shuffle seed")->capture_default_str();
    tr_cmd->add_option("--epochs", tr.epochs, "Maximum epochs")->check(CLI::Range(1, 20))->capture_default_str();
    tr_cmd->add_option("--batch-size", tr.batch_size, "Samples per optimizer step")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    tr_cmd->add_option("--lr", tr.lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    tr_cmd->add_option("--weight-decay", tr.weight_decay, "L2 weight decay on kernels")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    tr_cmd->add_option("--max-steps", tr.max_steps, "Stop after this many steps (0 = no limit)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    tr_cmd->add_option("--threads", tr.threads, "Gradient worker threads (0 = all cores)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    tr_cmd->add_flag("--mirror-augment", tr.mirror_augment, "Random horizontal flips with class swap")->capture_default_str();
    tr_cmd->add_flag("--no-coordconv", tr.no_coordconv, "Plain convolutions in the backbone")->capture_default_str();
    tr_cmd->add_option("--input-width", tr.input_width, "Detector input width")->capture_default_str();
    tr_cmd->add_option("--input-height", tr.input_height, "Detector input height")->capture_default_str();

    DetectArgs de;
    auto* de_cmd = add_subcommand(app, "detect", "Detect maneuvers in motion profiles", config_path);
    de_cmd->add_option("--method", de.method, "neural | classic")
        ->check(CLI::IsMember({"neural", "classic"}))
        ->capture_default_str();
    de_cmd->add_option("--checkpoint", de.checkpoint, "Detector checkpoint (neural)");
    de_cmd->add_option("--params", de.params, "Classic parameter JSON (classic)");
    de_cmd->add_option("--profile", de.profiles, "Profile file; repeatable");
    de_cmd->add_option("--data", de.data, "Dataset directory");
    de_cmd->add_option("--split", de.split, "Dataset split: train | val | test | all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}))
        ->capture_default_str();
    de_cmd->add_option("--out", de.out, "Detections JSONL")->required();
    de_cmd->add_option("--conf", de.conf, "Confidence threshold (neural)")->capture_default_str();
    de_cmd->add_option("--nms", de.nms, "NMS IoU threshold (neural)")->capture_default_str();

    EvalArgs ev;
    auto* ev_cmd = add_subcommand(app, "eval", "Score detections against ground truth", config_path);
    ev_cmd->add_option("--dets", ev.dets, "Detections JSONL")->required();
    ev_cmd->add_option("--gt", ev.gt, "Ground-truth JSONL")->required();
    ev_cmd->add_option("--iou", ev.iou, "Matching IoU threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    ev_cmd->add_option("--conf", ev.conf, "Confidence cut for precision/recall/F1")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    ev_cmd->add_option("--classes", ev.classes, "Comma-separated classes to score")->capture_default_str();
    ev_cmd->add_option("--out", ev.out, "Report JSON (default: stdout)");
    ev_cmd->add_option("--csv", ev.csv, "Optional CSV summary");
    ev_cmd->add_option("--dataset-id", ev.dataset_id, "Identifier recorded in the report");

    BenchArgs be;
    auto* be_cmd = add_subcommand(app, "bench", "Time per-frame strip extraction", config_path);
    be_cmd->add_option("--width", be.width, "Frame width")->check(CLI::PositiveNumber)->capture_default_str();
    be_cmd->add_option("--belt-height", be.belt_height, "Belt rows")->check(CLI::PositiveNumber)->capture_default_str();
    be_cmd->add_option("--channels", be.channels, "1 or 3")->check(CLI::IsMember({1, 3}))->capture_default_str();
    be_cmd->add_option("--iterations", be.iterations, "Timed iterations (>= 100)")->capture_default_str();
    be_cmd->add_option("--seed", be.seed, "Frame content seed")->capture_default_str();
    be_cmd->add_option("--out", be.out, "Report JSON (default: stdout)");

    try {
        std::vector<std::string> tail(args.begin() + (args.empty() ? 0 : 1), args.end());
        tail = expand_config(std::move(tail));
        std::vector<std::string> reversed(tail.rbegin(), tail.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("UsageError", e.what());
        std::fprintf(stderr, "%s", app.help().c_str());
        return 2;
    }

    try {
        for (CLI::App* sub : app.get_subcommands()) log_resolved(sub);
        if (*bp_cmd) return run_build_profile(bp);
        if (*sy_cmd) return run_synth(sy);
        if (*tr_cmd) return run_train(tr);
        if (*de_cmd) return run_detect(de);
        if (*ev_cmd) return run_eval(ev);
        if (*be_cmd) return run_bench(be);
    } catch (const Error& e) {
        print_error(to_string(e.code()), e.what());
        return e.code() == ErrorCode::UsageError ? 2 : 1;
    } catch (const std::exception& e) {
        print_error("InternalError", e.what());
        return 1;
    }
    return 2;
}

int dispatch(int argc, const char* const* argv) {
    return dispatch(std::vector<std::string>(argv, argv + argc));
}

}  // namespace mprof::cli
