#pragma once

// Convolution, CoordConv augmentation, activations and the optimizer.
// Templated on the scalar so gradient checks can run in double while
// training runs in float.

#include <cstdint>
#include <span>
#include <vector>

#include "mprof/nn/tensor.hpp"

namespace mprof::nn {

/// Two channels holding normalized pixel coordinates:
/// channel 0 = x = col / max(w-1, 1), channel 1 = y = row / max(h-1, 1).
template <class T>
Tensor<T> coord_channels(int h, int w);

/// Concatenates the coordinate channels after the data channels.
template <class T>
Tensor<T> add_coord_channels(const Tensor<T>& x);

template <class T>
struct ConvLayer {
    int out_channels = 0;
    int in_channels = 0;  // including the two coordinate channels when coordconv is set
    int kernel = 3;
    int stride = 1;
    int padding = 0;
    bool coordconv = false;
    std::vector<T> weights;  // out x in x k x k
    std::vector<T> bias;     // out

    /// Channels expected from the caller (coordinates are appended internally).
    int data_channels() const { return in_channels - (coordconv ? 2 : 0); }
    std::size_t weight_index(int o, int i, int ky, int kx) const {
        return ((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx;
    }
    T& weight(int o, int i, int ky, int kx) { return weights[weight_index(o, i, ky, kx)]; }
    const T& weight(int o, int i, int ky, int kx) const { return weights[weight_index(o, i, ky, kx)]; }

    int output_size(int in) const { return (in + 2 * padding - kernel) / stride + 1; }
    std::size_t parameter_count() const { return weights.size() + bias.size(); }

    /// Zero-initialized layer taking `data_channels` caller channels.
    static ConvLayer make(int data_channels, int out_channels, int kernel, int stride, int padding,
                          bool coordconv);
    /// Throws ShapeMismatch.
    void validate() const;
};

/// Cross-correlation with zero padding. Output spatial size is
/// floor((in + 2p - k) / s) + 1. Throws ShapeMismatch.
template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const ConvLayer<T>& layer);

template <class T>
struct ConvGrads {
    Tensor<T> grad_x;  // w.r.t. the caller's data channels
    std::vector<T> grad_w;
    std::vector<T> grad_b;
};

template <class T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const ConvLayer<T>& layer, const Tensor<T>& upstream);

template <class T>
Tensor<T> leaky_relu_forward(const Tensor<T>& x, T slope = T(0.1));

/// Gradient is 1 for x > 0 and `slope` for x <= 0.
template <class T>
Tensor<T> leaky_relu_backward(const Tensor<T>& x, const Tensor<T>& upstream, T slope = T(0.1));

/// Converts a plain convolution into a CoordConv one. The two new input
/// slices are initialized, per output filter and kernel tap, to the mean of
/// the original input-channel weights; existing slices are kept.
template <class T>
ConvLayer<T> inflate_weights(const ConvLayer<T>& layer);

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-3;
};

template <class T>
struct AdamState {
    std::vector<T> m;
    std::vector<T> v;
    long step = 0;

    explicit AdamState(std::size_t n = 0) : m(n, T{}), v(n, T{}) {}
};

/// One bias-corrected Adam update. Weight decay is added to the gradient
/// (L2 form) for entries whose mask byte is non-zero; an empty mask decays
/// every entry.
template <class T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state,
               const AdamHyper& hyper, std::span<const std::uint8_t> decay_mask = {});

}  // namespace mprof::nn
