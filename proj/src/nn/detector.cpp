#include "mprof/nn/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace mprof::nn {

void DetectorConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
    if (channels.empty()) fail("detector needs at least one backbone block");
    for (int c : channels)
        if (c < 1) fail("backbone channel counts must be positive");
    if (input_channels != 1 && input_channels != 3) fail("input channels must be 1 or 3");
    if (input_width < stride() || input_height < stride() || input_width % stride() != 0 ||
        input_height % stride() != 0)
        fail("input size must be a multiple of the total stride " + std::to_string(stride()));
    if (anchors.empty()) fail("detector needs at least one anchor");
    for (const auto& a : anchors)
        if (!(a.w > 0.0) || !(a.h > 0.0)) fail("anchors must be positive");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) fail("leaky slope must lie in (0, 1)");
}

Json config_to_json(const DetectorConfig& cfg) {
    Json j;
    j["input_width"] = cfg.input_width;
    j["input_height"] = cfg.input_height;
    j["input_channels"] = cfg.input_channels;
    j["channels"] = cfg.channels;
    j["coordconv"] = cfg.coordconv;
    j["leaky_slope"] = cfg.leaky_slope;
    Json anchors = Json::array();
    for (const auto& a : cfg.anchors) anchors.push_back({a.w, a.h});
    j["anchors"] = anchors;
    return j;
}

DetectorConfig config_from_json(const Json& j) {
    DetectorConfig cfg;
    try {
        cfg.input_width = j.at("input_width").get<int>();
        cfg.input_height = j.at("input_height").get<int>();
        cfg.input_channels = j.at("input_channels").get<int>();
        cfg.channels = j.at("channels").get<std::vector<int>>();
        cfg.coordconv = j.at("coordconv").get<bool>();
        cfg.leaky_slope = j.at("leaky_slope").get<double>();
        cfg.anchors.clear();
        for (const auto& a : j.at("anchors")) cfg.anchors.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Corrupt, std::string("bad detector config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string config_hash(const DetectorConfig& cfg) {
    const std::string text = config_to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

template <class T>
Detector<T>::Detector(DetectorConfig config) : config_(std::move(config)) {
    config_.validate();
    int in = config_.input_channels;
    for (int out : config_.channels) {
        layers_.push_back(ConvLayer<T>::make(in, out, 3, 2, 1, config_.coordconv));
        in = out;
    }
    layers_.push_back(ConvLayer<T>::make(in, config_.head_channels(), 1, 1, 0, false));
}

template <class T>
void Detector<T>::initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& layer : layers_) {
        const double fan_in = static_cast<double>(layer.in_channels) * layer.kernel * layer.kernel;
        const double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& w : layer.weights) w = static_cast<T>(dist(rng));
        std::fill(layer.bias.begin(), layer.bias.end(), T{});
    }
    auto& head = layers_.back();
    const T prior = static_cast<T>(std::log(0.01 / 0.99));
    for (int a = 0; a < config_.num_anchors(); ++a)
        head.bias[static_cast<std::size_t>(a * kSlotChannels + 4)] = prior;
}

template <class T>
Tensor<T> Detector<T>::forward(const Tensor<T>& x, Activations* acts) const {
    if (x.c() != config_.input_channels || x.h() != config_.input_height ||
        x.w() != config_.input_width)
        throw Error(ErrorCode::ShapeMismatch, "detector input " + x.shape_string() +
                                                  " does not match the configured input");
    const T slope = static_cast<T>(config_.leaky_slope);
    if (acts) {
        acts->inputs.clear();
        acts->pre_act.clear();
    }
    Tensor<T> h = x;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        Tensor<T> z = conv2d_forward(h, layers_[l]);
        Tensor<T> a = leaky_relu_forward(z, slope);
        if (acts) {
            acts->inputs.push_back(std::move(h));
            acts->pre_act.push_back(std::move(z));
        }
        h = std::move(a);
    }
    Tensor<T> out = conv2d_forward(h, layers_.back());
    if (acts) acts->inputs.push_back(std::move(h));
    return out;
}

template <class T>
Tensor<T> Detector<T>::backward(const Activations& acts, const Tensor<T>& grad_out, std::span<T> grad) const {
    if (grad.size() != parameter_count())
        throw Error(ErrorCode::ShapeMismatch, "gradient buffer has the wrong size");
    if (acts.inputs.size() != layers_.size() || acts.pre_act.size() + 1 != layers_.size())
        throw Error(ErrorCode::ShapeMismatch, "activations do not match the detector");

    std::vector<std::size_t> offsets(layers_.size() + 1, 0);
    for (std::size_t l = 0; l < layers_.size(); ++l)
        offsets[l + 1] = offsets[l] + layers_[l].parameter_count();

    auto accumulate = [&](std::size_t l, const ConvGrads<T>& g) {
        T* dst = grad.data() + offsets[l];
        for (std::size_t i = 0; i < g.grad_w.size(); ++i) dst[i] += g.grad_w[i];
        dst += g.grad_w.size();
        for (std::size_t i = 0; i < g.grad_b.size(); ++i) dst[i] += g.grad_b[i];
    };

    const T slope = static_cast<T>(config_.leaky_slope);
    const std::size_t head = layers_.size() - 1;
    ConvGrads<T> g = conv2d_backward(acts.inputs[head], layers_[head], grad_out);
    accumulate(head, g);
    Tensor<T> upstream = std::move(g.grad_x);
    for (std::size_t l = head; l-- > 0;) {
        const Tensor<T> dz = leaky_relu_backward(acts.pre_act[l], upstream, slope);
        g = conv2d_backward(acts.inputs[l], layers_[l], dz);
        accumulate(l, g);
        upstream = std::move(g.grad_x);
    }
    return upstream;
}

template <class T>
std::size_t Detector<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.parameter_count();
    return n;
}

template <class T>
std::vector<T> Detector<T>::parameters() const {
    std::vector<T> flat;
    flat.reserve(parameter_count());
    for (const auto& l : layers_) {
        flat.insert(flat.end(), l.weights.begin(), l.weights.end());
        flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    }
    return flat;
}

template <class T>
void Detector<T>::set_parameters(std::span<const T> flat) {
    if (flat.size() != parameter_count())
        throw Error(ErrorCode::CheckpointMismatch, "parameter count " + std::to_string(flat.size()) +
                                                       " does not match the detector (" +
                                                       std::to_string(parameter_count()) + ")");
    std::size_t i = 0;
    for (auto& l : layers_) {
        for (auto& w : l.weights) w = flat[i++];
        for (auto& b : l.bias) b = flat[i++];
    }
}

template <class T>
std::vector<std::uint8_t> Detector<T>::decay_mask() const {
    std::vector<std::uint8_t> mask;
    mask.reserve(parameter_count());
    for (const auto& l : layers_) {
        mask.insert(mask.end(), l.weights.size(), 1);
        mask.insert(mask.end(), l.bias.size(), 0);
    }
    return mask;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

// Stable binary cross-entropy on a logit.
double bce_logits(double z, double y) {
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

double shape_iou(double w1, double h1, double w2, double h2) {
    const double inter = std::min(w1, w2) * std::min(h1, h2);
    return inter / (w1 * h1 + w2 * h2 - inter);
}

}  // namespace

Targets assign_targets(const std::vector<DetectionBox>& gt, const DetectorConfig& cfg) {
    const int gw = cfg.grid_width();
    const int gh = cfg.grid_height();
    const double stride = cfg.stride();
    Targets t;
    t.num_slots = cfg.num_slots();
    t.positive.assign(static_cast<std::size_t>(t.num_slots), 0);
    t.box.assign(static_cast<std::size_t>(t.num_slots) * 4, 0.0f);
    t.cls.assign(static_cast<std::size_t>(t.num_slots) * kNumClasses, 0);
    constexpr double kEps = 0.01;

    for (const auto& b : gt) {
        if (!b.valid()) continue;
        const double cx = 0.5 * (b.x_min + b.x_max);
        const double cy = 0.5 * (b.t_min + b.t_max);
        const int col = std::clamp(static_cast<int>(std::floor(cx / stride)), 0, gw - 1);
        const int row = std::clamp(static_cast<int>(std::floor(cy / stride)), 0, gh - 1);
        int best = 0;
        double best_iou = -1.0;
        for (int a = 0; a < cfg.num_anchors(); ++a) {
            const auto& an = cfg.anchors[static_cast<std::size_t>(a)];
            const double s = shape_iou(b.width(), b.height(), an.w, an.h);
            if (s > best_iou) {
                best_iou = s;
                best = a;
            }
        }
        const auto& an = cfg.anchors[static_cast<std::size_t>(best)];
        const std::size_t slot = (static_cast<std::size_t>(best) * gh + row) * gw + col;
        t.positive[slot] = 1;
        const double fx = std::clamp(cx / stride - col, kEps, 1.0 - kEps);
        const double fy = std::clamp(cy / stride - row, kEps, 1.0 - kEps);
        t.box[slot * 4 + 0] = static_cast<float>(logit(fx));
        t.box[slot * 4 + 1] = static_cast<float>(logit(fy));
        t.box[slot * 4 + 2] = static_cast<float>(std::log(b.width() / an.w));
        t.box[slot * 4 + 3] = static_cast<float>(std::log(b.height() / an.h));
        for (int c = 0; c < kNumClasses; ++c) t.cls[slot * kNumClasses + static_cast<std::size_t>(c)] = 0;
        t.cls[slot * kNumClasses + static_cast<std::size_t>(code(b.cls))] = 1;
    }
    return t;
}

template <class T>
std::vector<DetectionBox> decode_head(const Tensor<T>& raw, const std::vector<Anchor>& anchors,
                                      int stride, double conf_thresh, double window_w,
                                      double window_h) {
    const int num_anchors = static_cast<int>(anchors.size());
    if (raw.n() != 1 || raw.c() != num_anchors * kSlotChannels)
        throw Error(ErrorCode::ShapeMismatch, "head output " + raw.shape_string() + " does not match " +
                                                  std::to_string(num_anchors) + " anchors");
    std::vector<DetectionBox> out;
    for (int a = 0; a < num_anchors; ++a) {
        const int base = a * kSlotChannels;
        const auto& an = anchors[static_cast<std::size_t>(a)];
        for (int row = 0; row < raw.h(); ++row) {
            for (int col = 0; col < raw.w(); ++col) {
                const double obj = sigmoid(raw(0, base + 4, row, col));
                if (!(obj > conf_thresh)) continue;  // score <= obj
                const double cx = (col + sigmoid(raw(0, base + 0, row, col))) * stride;
                const double cy = (row + sigmoid(raw(0, base + 1, row, col))) * stride;
                const double w = an.w * std::exp(static_cast<double>(raw(0, base + 2, row, col)));
                const double h = an.h * std::exp(static_cast<double>(raw(0, base + 3, row, col)));
                DetectionBox box;
                box.x_min = std::clamp(cx - w / 2, 0.0, window_w);
                box.x_max = std::clamp(cx + w / 2, 0.0, window_w);
                box.t_min = std::clamp(cy - h / 2, 0.0, window_h);
                box.t_max = std::clamp(cy + h / 2, 0.0, window_h);
                if (!box.valid()) continue;
                for (int c = 0; c < kNumClasses; ++c) {
                    const double score = obj * sigmoid(raw(0, base + kBoxFields + c, row, col));
                    if (score > conf_thresh) {
                        box.cls = class_from_code(c);
                        box.score = score;
                        out.push_back(box);
                    }
                }
            }
        }
    }
    return out;
}

std::vector<DetectionBox> nms(std::vector<DetectionBox> dets, double iou_thresh) {
    std::stable_sort(dets.begin(), dets.end(),
                     [](const DetectionBox& a, const DetectionBox& b) { return a.score > b.score; });
    std::vector<DetectionBox> kept;
    std::vector<bool> removed(dets.size(), false);
    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (removed[i]) continue;
        kept.push_back(dets[i]);
        for (std::size_t j = i + 1; j < dets.size(); ++j) {
            if (!removed[j] && dets[j].cls == dets[i].cls && iou(dets[i], dets[j]) > iou_thresh)
                removed[j] = true;
        }
    }
    return kept;
}

template <class T>
LossResult<T> yolo_loss(const Tensor<T>& raw, const std::vector<Targets>& targets,
                        const DetectorConfig& cfg, const LossWeights& weights) {
    const int gw = cfg.grid_width();
    const int gh = cfg.grid_height();
    if (raw.c() != cfg.head_channels() || raw.h() != gh || raw.w() != gw ||
        static_cast<std::size_t>(raw.n()) != targets.size())
        throw Error(ErrorCode::ShapeMismatch, "loss input " + raw.shape_string() +
                                                  " does not match the detector head/targets");
    LossResult<T> r;
    r.grad = Tensor<T>(raw.n(), raw.c(), raw.h(), raw.w());
    const double inv_n = 1.0 / raw.n();
    for (int n = 0; n < raw.n(); ++n) {
        const Targets& t = targets[static_cast<std::size_t>(n)];
        if (t.num_slots != cfg.num_slots())
            throw Error(ErrorCode::ShapeMismatch, "targets built for a different detector");
        for (int a = 0; a < cfg.num_anchors(); ++a) {
            const int base = a * kSlotChannels;
            for (int row = 0; row < gh; ++row) {
                for (int col = 0; col < gw; ++col) {
                    const std::size_t slot = (static_cast<std::size_t>(a) * gh + row) * gw + col;
                    const bool pos = t.positive[slot] != 0;
                    const double zo = raw(n, base + 4, row, col);
                    const double yo = pos ? 1.0 : 0.0;
                    r.objectness += weights.objectness * bce_logits(zo, yo) * inv_n;
                    r.grad(n, base + 4, row, col) =
                        static_cast<T>(weights.objectness * (sigmoid(zo) - yo) * inv_n);
                    if (!pos) continue;
                    for (int c = 0; c < kNumClasses; ++c) {
                        const double zc = raw(n, base + kBoxFields + c, row, col);
                        const double yc = t.cls[slot * kNumClasses + static_cast<std::size_t>(c)];
                        r.classification += weights.classification * bce_logits(zc, yc) * inv_n;
                        r.grad(n, base + kBoxFields + c, row, col) =
                            static_cast<T>(weights.classification * (sigmoid(zc) - yc) * inv_n);
                    }
                    for (int k = 0; k < 4; ++k) {
                        const double d = static_cast<double>(raw(n, base + k, row, col)) -
                                         t.box[slot * 4 + static_cast<std::size_t>(k)];
                        r.box += weights.box * d * d * inv_n;
                        r.grad(n, base + k, row, col) = static_cast<T>(weights.box * 2.0 * d * inv_n);
                    }
                }
            }
        }
    }
    r.total = r.objectness + r.classification + r.box;
    return r;
}

template class Detector<float>;
template class Detector<double>;
template std::vector<DetectionBox> decode_head<float>(const Tensor<float>&, const std::vector<Anchor>&,
                                                      int, double, double, double);
template std::vector<DetectionBox> decode_head<double>(const Tensor<double>&, const std::vector<Anchor>&,
                                                       int, double, double, double);
template LossResult<float> yolo_loss<float>(const Tensor<float>&, const std::vector<Targets>&,
                                            const DetectorConfig&, const LossWeights&);
template LossResult<double> yolo_loss<double>(const Tensor<double>&, const std::vector<Targets>&,
                                              const DetectorConfig&, const LossWeights&);

}  // namespace mprof::nn
