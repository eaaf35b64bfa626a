#pragma once

// Toy one-stage detector: five stride-2 CoordConv blocks followed by a 1x1
// YOLO-style head predicting, per grid cell and anchor,
// (t_x, t_y, t_w, t_h, objectness, 4 class logits).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mprof/core.hpp"
#include "mprof/nn/layers.hpp"
#include "mprof/records.hpp"

namespace mprof::nn {

struct Anchor {
    double w = 0.0;  // columns
    double h = 0.0;  // rows
    bool operator==(const Anchor&) const = default;
};

inline constexpr int kBoxFields = 5;  // t_x, t_y, t_w, t_h, objectness
inline constexpr int kSlotChannels = kBoxFields + kNumClasses;

struct DetectorConfig {
    int input_width = 256;
    int input_height = 256;
    int input_channels = 1;
    std::vector<int> channels{8, 16, 32, 64, 64};
    bool coordconv = true;
    double leaky_slope = 0.1;
    std::vector<Anchor> anchors{{128, 32}, {128, 96}, {128, 192}};

    int stride() const { return 1 << channels.size(); }
    int grid_width() const { return input_width / stride(); }
    int grid_height() const { return input_height / stride(); }
    int num_anchors() const { return static_cast<int>(anchors.size()); }
    int head_channels() const { return num_anchors() * kSlotChannels; }
    int num_slots() const { return num_anchors() * grid_width() * grid_height(); }

    /// Throws InvalidArgument.
    void validate() const;
    bool operator==(const DetectorConfig&) const = default;
};

Json config_to_json(const DetectorConfig& cfg);
DetectorConfig config_from_json(const Json& j);
/// FNV-1a over the canonical JSON form, as 16 hex digits.
std::string config_hash(const DetectorConfig& cfg);

template <class T>
class Detector {
public:
    explicit Detector(DetectorConfig config);

    /// Kaiming-uniform weights, U(-sqrt(6 / fan_in), +sqrt(6 / fan_in)), zero
    /// biases except objectness, which starts at logit(0.01).
    void initialize(std::uint64_t seed);

    struct Activations {
        std::vector<Tensor<T>> inputs;   // input of every conv layer (last = head input)
        std::vector<Tensor<T>> pre_act;  // block outputs before the activation
    };

    /// x: (N, input_channels, input_height, input_width) -> raw head output.
    Tensor<T> forward(const Tensor<T>& x, Activations* acts = nullptr) const;
    /// Accumulates parameter gradients into `grad` (flat layout of parameters()).
    /// Returns the gradient with respect to the input.
    Tensor<T> backward(const Activations& acts, const Tensor<T>& grad_out, std::span<T> grad) const;

    std::size_t parameter_count() const;
    std::vector<T> parameters() const;
    void set_parameters(std::span<const T> flat);
    /// 1 for convolution kernels (decayed), 0 for biases.
    std::vector<std::uint8_t> decay_mask() const;

    const DetectorConfig& config() const { return config_; }
    std::vector<ConvLayer<T>>& layers() { return layers_; }
    const std::vector<ConvLayer<T>>& layers() const { return layers_; }

private:
    DetectorConfig config_;
    std::vector<ConvLayer<T>> layers_;  // blocks, then head
};

/// Slot s = (a * grid_h + row) * grid_w + col; channel of field f for anchor a
/// is a * kSlotChannels + f.
struct Targets {
    int num_slots = 0;
    std::vector<std::uint8_t> positive;  // per slot
    std::vector<float> box;              // per slot: t_x, t_y, t_w, t_h
    std::vector<std::uint8_t> cls;       // per slot: one-hot over classes
};

/// Cell containing the box center, anchor with the best shape IoU (first on
/// ties); a later box in list order overwrites an occupied slot. Offsets are
/// the inverse of decode_head (fractional offsets clamped to [0.01, 0.99]).
Targets assign_targets(const std::vector<DetectionBox>& gt, const DetectorConfig& cfg);

/// Decodes one sample of raw head output (1, A*9, gh, gw). Emits one box per
/// (slot, class) whose score sigmoid(obj) * sigmoid(cls) exceeds conf_thresh,
/// clamped to [0, window_w] x [0, window_h]. Throws ShapeMismatch.
template <class T>
std::vector<DetectionBox> decode_head(const Tensor<T>& raw, const std::vector<Anchor>& anchors,
                                      int stride, double conf_thresh, double window_w,
                                      double window_h);

/// Class-wise greedy suppression; output ordered by descending score
/// (stable for equal scores).
std::vector<DetectionBox> nms(std::vector<DetectionBox> dets, double iou_thresh = 0.5);

struct LossWeights {
    double objectness = 1.0;
    double classification = 1.0;
    double box = 1.0;
};

template <class T>
struct LossResult {
    double total = 0.0;
    double objectness = 0.0;
    double classification = 0.0;
    double box = 0.0;
    Tensor<T> grad;  // d total / d raw
};

/// BCE on objectness over all slots + BCE on class logits and squared error
/// on (t_x, t_y, t_w, t_h) over positive slots; summed per sample, averaged
/// over the batch. Throws ShapeMismatch.
template <class T>
LossResult<T> yolo_loss(const Tensor<T>& raw, const std::vector<Targets>& targets,
                        const DetectorConfig& cfg, const LossWeights& weights = {});

}  // namespace mprof::nn
