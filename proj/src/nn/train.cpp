#include "mprof/nn/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "mprof/synth.hpp"

namespace mprof::nn {

namespace fs = std::filesystem;

void save_checkpoint(const fs::path& path, const DetectorCheckpoint& ckpt) {
    const Detector<float> probe(ckpt.config);
    if (ckpt.parameters.size() != probe.parameter_count())
        throw Error(ErrorCode::CheckpointMismatch, "parameter count does not match the config");
    Json header;
    header["format"] = "mprof-detector";
    header["version"] = ckpt.version;
    header["seed"] = ckpt.seed;
    header["config"] = config_to_json(ckpt.config);
    header["anchors"] = config_to_json(ckpt.config)["anchors"];
    header["parameter_count"] = ckpt.parameters.size();
    header["config_hash"] = config_hash(ckpt.config);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << header.dump() << '\n';
    std::vector<char> bytes(ckpt.parameters.size() * 4);
    for (std::size_t i = 0; i < ckpt.parameters.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(ckpt.parameters[i]);
        for (int b = 0; b < 4; ++b) bytes[i * 4 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

DetectorCheckpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, "checkpoint not found: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::Corrupt, "empty checkpoint " + path.string());
    Json header;
    try {
        header = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::Corrupt, "unreadable checkpoint header: " + std::string(e.what()));
    }
    DetectorCheckpoint ckpt;
    std::size_t count = 0;
    try {
        if (header.at("format").get<std::string>() != "mprof-detector")
            throw Error(ErrorCode::Corrupt, "not a detector checkpoint");
        ckpt.version = header.at("version").get<int>();
        if (ckpt.version != kCheckpointVersion)
            throw Error(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(ckpt.version) +
                                                        ", expected " + std::to_string(kCheckpointVersion));
        ckpt.config = config_from_json(header.at("config"));
        if (header.at("config_hash").get<std::string>() != config_hash(ckpt.config))
            throw Error(ErrorCode::VersionMismatch, "config hash does not match the stored config");
        if (header.at("anchors") != config_to_json(ckpt.config)["anchors"])
            throw Error(ErrorCode::Corrupt, "anchor list disagrees with the config");
        ckpt.seed = header.at("seed").get<std::uint64_t>();
        count = header.at("parameter_count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Corrupt, std::string("bad checkpoint header: ") + e.what());
    }
    if (count != Detector<float>(ckpt.config).parameter_count())
        throw Error(ErrorCode::Corrupt, "parameter count disagrees with the config");

    std::vector<char> bytes(count * 4);
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size())
        throw Error(ErrorCode::Corrupt, "truncated checkpoint " + path.string());
    if (in.peek() != std::char_traits<char>::eof())
        throw Error(ErrorCode::Corrupt, "trailing bytes in checkpoint " + path.string());
    ckpt.parameters.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + static_cast<std::size_t>(b)])) << (8 * b);
        ckpt.parameters[i] = std::bit_cast<float>(bits);
    }
    return ckpt;
}

TensorF resize_bilinear(const TensorF& x, int out_h, int out_w) {
    if (x.h() == out_h && x.w() == out_w) return x;
    TensorF y(x.n(), x.c(), out_h, out_w);
    const double sy = static_cast<double>(x.h()) / out_h;
    const double sx = static_cast<double>(x.w()) / out_w;
    for (int i = 0; i < out_h; ++i) {
        const double fy = std::clamp((i + 0.5) * sy - 0.5, 0.0, x.h() - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, x.h() - 1);
        const double wy = fy - y0;
        for (int j = 0; j < out_w; ++j) {
            const double fx = std::clamp((j + 0.5) * sx - 0.5, 0.0, x.w() - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, x.w() - 1);
            const double wx = fx - x0;
            for (int n = 0; n < x.n(); ++n) {
                for (int c = 0; c < x.c(); ++c) {
                    const double top = x(n, c, y0, x0) * (1 - wx) + x(n, c, y0, x1) * wx;
                    const double bot = x(n, c, y1, x0) * (1 - wx) + x(n, c, y1, x1) * wx;
                    y(n, c, i, j) = static_cast<float>(top * (1 - wy) + bot * wy);
                }
            }
        }
    }
    return y;
}

TensorF profile_to_input(const MotionProfile& profile, const DetectorConfig& cfg) {
    const auto& d = profile.dims;
    d.validate();
    if (cfg.input_channels == 3 && d.channels != 3)
        throw Error(ErrorCode::CheckpointMismatch, "detector expects color profiles");
    TensorF x(1, cfg.input_channels, d.height, d.width);
    for (int t = 0; t < d.height; ++t) {
        for (int col = 0; col < d.width; ++col) {
            if (cfg.input_channels == d.channels) {
                for (int c = 0; c < d.channels; ++c)
                    x(0, c, t, col) = static_cast<float>(profile.at(t, col, c)) / 255.0f;
            } else {
                const double luma = 0.299 * profile.at(t, col, 0) + 0.587 * profile.at(t, col, 1) +
                                    0.114 * profile.at(t, col, 2);
                x(0, 0, t, col) = static_cast<float>(luma / 255.0);
            }
        }
    }
    return resize_bilinear(x, cfg.input_height, cfg.input_width);
}

TrainExample make_example(const MotionProfile& profile, const std::vector<DetectionBox>& gt,
                          const DetectorConfig& cfg) {
    TrainExample ex;
    ex.input = profile_to_input(profile, cfg);
    const double sx = static_cast<double>(cfg.input_width) / profile.dims.width;
    const double sy = static_cast<double>(cfg.input_height) / profile.dims.height;
    for (auto b : gt) {
        b.x_min *= sx;
        b.x_max *= sx;
        b.t_min *= sy;
        b.t_max *= sy;
        ex.gt.push_back(b);
    }
    return ex;
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
    if (max_epochs < 1) throw Error(ErrorCode::InvalidArgument, "max_epochs must be >= 1");
    if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
    if (weight_decay < 0.0 || max_steps < 0 || threads < 0)
        throw Error(ErrorCode::InvalidArgument, "invalid training configuration");
}

Json train_config_to_json(const TrainConfig& cfg) {
    Json j;
    j["optimizer"] = "adam";
    j["lr"] = cfg.lr;
    j["weight_decay"] = cfg.weight_decay;
    j["max_epochs"] = cfg.max_epochs;
    j["batch_size"] = cfg.batch_size;
    j["seed"] = cfg.seed;
    j["loss_weights"] = {cfg.loss_weights.objectness, cfg.loss_weights.classification,
                         cfg.loss_weights.box};
    j["mirror_augment"] = cfg.mirror_augment;
    j["max_steps"] = cfg.max_steps;
    return j;
}

namespace {

TrainExample mirrored_example(const TrainExample& ex) {
    TrainExample m;
    m.input = ex.input;
    const int w = ex.input.w();
    for (int c = 0; c < ex.input.c(); ++c)
        for (int i = 0; i < ex.input.h(); ++i)
            for (int j = 0; j < w; ++j) m.input(0, c, i, w - 1 - j) = ex.input(0, c, i, j);
    for (const auto& b : ex.gt) m.gt.push_back(mirror_box(b, w));
    return m;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers with a static
// partition. Results must be written to per-index slots by the caller.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    const int workers = std::max(1, std::min(n, threads));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int i = w; i < n; i += workers) fn(i);
        });
    }
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

double evaluate_loss(const Detector<float>& detector, const std::vector<TrainExample>& examples,
                     const LossWeights& weights) {
    if (examples.empty()) return 0.0;
    double total = 0.0;
    for (const auto& ex : examples) {
        const TensorF raw = detector.forward(ex.input);
        total += yolo_loss(raw, {assign_targets(ex.gt, detector.config())}, detector.config(), weights).total;
    }
    return total / static_cast<double>(examples.size());
}

TrainResult train(const std::vector<TrainExample>& train_set, const std::vector<TrainExample>& val_set,
                  const DetectorConfig& det_cfg, const TrainConfig& cfg,
                  const std::function<void(const LossRecord&)>& on_record) {
    cfg.validate();
    if (train_set.empty()) throw Error(ErrorCode::EmptySplit, "training split is empty");

    Detector<float> model(det_cfg);
    model.initialize(cfg.seed);
    const std::size_t nparams = model.parameter_count();
    const auto mask = model.decay_mask();
    AdamState<float> adam(nparams);
    AdamHyper hyper;
    hyper.lr = cfg.lr;
    hyper.weight_decay = cfg.weight_decay;
    const int threads = resolve_threads(cfg.threads);

    TrainResult result;
    auto record = [&](int epoch, const char* split, double loss) {
        result.log.push_back({epoch, split, loss});
        if (on_record) on_record(result.log.back());
    };
    const bool has_val = !val_set.empty();
    record(0, "train", evaluate_loss(model, train_set, cfg.loss_weights));
    double best = std::numeric_limits<double>::infinity();
    if (has_val) {
        best = evaluate_loss(model, val_set, cfg.loss_weights);
        record(0, "val", best);
    }
    std::vector<float> best_params = model.parameters();

    std::mt19937_64 order_rng(cfg.seed ^ 0xA5A5A5A5DEADBEEFULL);
    std::vector<int> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::vector<float>> sample_grads(static_cast<std::size_t>(cfg.batch_size),
                                                 std::vector<float>(nparams));
    std::vector<double> sample_loss(static_cast<std::size_t>(cfg.batch_size));
    std::vector<float> grad(nparams);

    bool stop = false;
    for (int epoch = 1; epoch <= cfg.max_epochs && !stop; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        std::vector<std::uint8_t> flips(order.size(), 0);
        if (cfg.mirror_augment)
            for (auto& f : flips) f = static_cast<std::uint8_t>(order_rng() & 1U);

        double epoch_loss = 0.0;
        int epoch_samples = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const int batch = static_cast<int>(std::min<std::size_t>(cfg.batch_size, order.size() - start));
            parallel_for(batch, threads, [&](int b) {
                const std::size_t k = start + static_cast<std::size_t>(b);
                const TrainExample& src = train_set[static_cast<std::size_t>(order[k])];
                const TrainExample ex = flips[k] ? mirrored_example(src) : src;
                Detector<float>::Activations acts;
                const TensorF raw = model.forward(ex.input, &acts);
                const auto loss = yolo_loss(raw, {assign_targets(ex.gt, det_cfg)}, det_cfg, cfg.loss_weights);
                auto& g = sample_grads[static_cast<std::size_t>(b)];
                std::fill(g.begin(), g.end(), 0.0f);
                model.backward(acts, loss.grad, g);
                sample_loss[static_cast<std::size_t>(b)] = loss.total;
            });
            // fixed reduction order keeps training bit-deterministic
            std::fill(grad.begin(), grad.end(), 0.0f);
            const float inv = 1.0f / static_cast<float>(batch);
            for (int b = 0; b < batch; ++b) {
                const auto& g = sample_grads[static_cast<std::size_t>(b)];
                for (std::size_t i = 0; i < nparams; ++i) grad[i] += g[i];
                epoch_loss += sample_loss[static_cast<std::size_t>(b)];
            }
            for (auto& v : grad) v *= inv;
            epoch_samples += batch;

            auto params = model.parameters();
            adam_step<float>(params, grad, adam, hyper, mask);
            model.set_parameters(params);
            ++result.steps;
            if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) {
                stop = true;
                break;
            }
        }
        result.epochs_run = epoch;
        record(epoch, "train", epoch_loss / std::max(epoch_samples, 1));
        const double select = has_val ? evaluate_loss(model, val_set, cfg.loss_weights)
                                      : epoch_loss / std::max(epoch_samples, 1);
        if (has_val) record(epoch, "val", select);
        if (select < best) {
            best = select;
            best_params = model.parameters();
            result.best_epoch = epoch;
        }
    }

    result.checkpoint.config = det_cfg;
    result.checkpoint.seed = cfg.seed;
    result.checkpoint.parameters = std::move(best_params);
    return result;
}

TrainResult train_on_dataset(const fs::path& dataset_dir, const DetectorConfig& det_cfg,
                             const TrainConfig& train_cfg,
                             const std::function<void(const LossRecord&)>& on_record) {
    auto load = [&](const std::string& split) {
        std::vector<TrainExample> out;
        for (const auto& s : load_split(dataset_dir, split))
            out.push_back(make_example(s.profile, s.ground_truth, det_cfg));
        return out;
    };
    const auto train_set = load("train");
    if (train_set.empty())
        throw Error(ErrorCode::EmptySplit, "dataset " + dataset_dir.string() + " has no training samples");
    return train(train_set, load("val"), det_cfg, train_cfg, on_record);
}

void write_loss_log(const fs::path& path, const std::vector<LossRecord>& log) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << "epoch,split,loss\n";
    char buf[64];
    for (const auto& r : log) {
        std::snprintf(buf, sizeof buf, "%.9g", r.loss);
        out << r.epoch << ',' << r.split << ',' << buf << '\n';
    }
}

std::vector<DetectionBox> infer(const MotionProfile& profile, const Detector<float>& detector,
                                const InferOptions& options) {
    const auto& cfg = detector.config();
    const TensorF x = profile_to_input(profile, cfg);
    const TensorF raw = detector.forward(x);
    auto boxes = decode_head(raw, cfg.anchors, cfg.stride(), options.conf_thresh, cfg.input_width,
                             cfg.input_height);
    boxes = nms(std::move(boxes), options.nms_thresh);
    const double sx = static_cast<double>(profile.dims.width) / cfg.input_width;
    const double sy = static_cast<double>(profile.dims.height) / cfg.input_height;
    for (auto& b : boxes) {
        b.x_min = std::clamp(b.x_min * sx, 0.0, static_cast<double>(profile.dims.width));
        b.x_max = std::clamp(b.x_max * sx, 0.0, static_cast<double>(profile.dims.width));
        b.t_min = std::clamp(b.t_min * sy, 0.0, static_cast<double>(profile.dims.height));
        b.t_max = std::clamp(b.t_max * sy, 0.0, static_cast<double>(profile.dims.height));
    }
    return boxes;
}

std::vector<DetectionBox> infer(const MotionProfile& profile, const DetectorCheckpoint& ckpt,
                                const InferOptions& options) {
    Detector<float> detector(ckpt.config);
    detector.set_parameters(ckpt.parameters);
    return infer(profile, detector, options);
}

}  // namespace mprof::nn
