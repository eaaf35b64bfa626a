#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mprof/nn/detector.hpp"
#include "mprof/profile.hpp"

namespace mprof::nn {

inline constexpr int kCheckpointVersion = 1;

struct DetectorCheckpoint {
    DetectorConfig config;
    int version = kCheckpointVersion;
    std::uint64_t seed = 0;
    std::vector<float> parameters;  // declared layer order: weights then bias per layer

    bool operator==(const DetectorCheckpoint&) const = default;
};

/// One-line JSON header followed by little-endian float32 parameters.
void save_checkpoint(const std::filesystem::path& path, const DetectorCheckpoint& ckpt);
/// Throws MissingFile, Corrupt, VersionMismatch.
DetectorCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Half-pixel-center bilinear resize of a single-sample tensor.
TensorF resize_bilinear(const TensorF& x, int out_h, int out_w);

/// Profile -> (1, C, H, W) detector input in [0, 1]. Color profiles are
/// reduced to luma for single-channel detectors.
TensorF profile_to_input(const MotionProfile& profile, const DetectorConfig& cfg);

struct TrainExample {
    TensorF input;                  // (1, C, H, W)
    std::vector<DetectionBox> gt;   // input-window coordinates
};

TrainExample make_example(const MotionProfile& profile, const std::vector<DetectionBox>& gt,
                          const DetectorConfig& cfg);

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 1e-3;
    int max_epochs = 20;
    int batch_size = 8;
    std::uint64_t seed = 0;
    LossWeights loss_weights;
    /// Random horizontal flips with left/right class swap.
    bool mirror_augment = false;
    /// Stop after this many optimizer steps (0 = no limit).
    int max_steps = 0;
    /// Worker threads for per-sample gradients (0 = hardware concurrency).
    int threads = 0;

    void validate() const;
};

Json train_config_to_json(const TrainConfig& cfg);

struct LossRecord {
    int epoch = 0;
    std::string split;
    double loss = 0.0;
};

struct TrainResult {
    DetectorCheckpoint checkpoint;  // parameters of the best validation epoch
    std::vector<LossRecord> log;    // epoch 0 = before the first step
    int best_epoch = 0;
    int epochs_run = 0;
    int steps = 0;
};

/// Mean per-sample loss of the detector over the examples.
double evaluate_loss(const Detector<float>& detector, const std::vector<TrainExample>& examples,
                     const LossWeights& weights = {});

/// Deterministic in (examples, configs). Throws EmptySplit without training data.
TrainResult train(const std::vector<TrainExample>& train_set, const std::vector<TrainExample>& val_set,
                  const DetectorConfig& det_cfg, const TrainConfig& train_cfg,
                  const std::function<void(const LossRecord&)>& on_record = {});

/// Trains on the "train" split of a dataset directory, selecting on "val".
TrainResult train_on_dataset(const std::filesystem::path& dataset_dir, const DetectorConfig& det_cfg,
                             const TrainConfig& train_cfg,
                             const std::function<void(const LossRecord&)>& on_record = {});

void write_loss_log(const std::filesystem::path& path, const std::vector<LossRecord>& log);

struct InferOptions {
    double conf_thresh = 0.2;
    double nms_thresh = 0.5;
};

/// Detections in profile coordinates. Throws CheckpointMismatch.
std::vector<DetectionBox> infer(const MotionProfile& profile, const DetectorCheckpoint& ckpt,
                                const InferOptions& options = {});
std::vector<DetectionBox> infer(const MotionProfile& profile, const Detector<float>& detector,
                                const InferOptions& options = {});

}  // namespace mprof::nn
