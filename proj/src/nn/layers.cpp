#include "mprof/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace mprof::nn {

template <class T>
Tensor<T> coord_channels(int h, int w) {
    if (h < 1 || w < 1) throw Error(ErrorCode::ShapeMismatch, "coordinate map needs h, w >= 1");
    Tensor<T> out(1, 2, h, w);
    const T dx = static_cast<T>(std::max(w - 1, 1));
    const T dy = static_cast<T>(std::max(h - 1, 1));
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            out(0, 0, i, j) = static_cast<T>(j) / dx;
            out(0, 1, i, j) = static_cast<T>(i) / dy;
        }
    }
    return out;
}

template <class T>
Tensor<T> add_coord_channels(const Tensor<T>& x) {
    const Tensor<T> coords = coord_channels<T>(x.h(), x.w());
    Tensor<T> out(x.n(), x.c() + 2, x.h(), x.w());
    const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
    for (int n = 0; n < x.n(); ++n) {
        auto dst = out.sample(n);
        auto src = x.sample(n);
        std::copy(src.begin(), src.end(), dst.begin());
        std::copy(coords.values().begin(), coords.values().end(),
                  dst.begin() + static_cast<std::ptrdiff_t>(plane * x.c()));
    }
    return out;
}

template <class T>
ConvLayer<T> ConvLayer<T>::make(int data_channels, int out_channels, int kernel, int stride,
                                int padding, bool coordconv) {
    ConvLayer<T> l;
    l.out_channels = out_channels;
    l.in_channels = data_channels + (coordconv ? 2 : 0);
    l.kernel = kernel;
    l.stride = stride;
    l.padding = padding;
    l.coordconv = coordconv;
    l.weights.assign(static_cast<std::size_t>(out_channels) * l.in_channels * kernel * kernel, T{});
    l.bias.assign(static_cast<std::size_t>(out_channels), T{});
    l.validate();
    return l;
}

template <class T>
void ConvLayer<T>::validate() const {
    if (out_channels < 1 || data_channels() < 1 || kernel < 1 || stride < 1 || padding < 0)
        throw Error(ErrorCode::ShapeMismatch, "invalid convolution geometry");
    if (weights.size() != static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel ||
        bias.size() != static_cast<std::size_t>(out_channels))
        throw Error(ErrorCode::ShapeMismatch, "convolution parameter buffers have the wrong size");
}

namespace {

template <class T>
void check_input(const Tensor<T>& x, const ConvLayer<T>& layer) {
    layer.validate();
    if (x.c() != layer.data_channels())
        throw Error(ErrorCode::ShapeMismatch, "convolution expects " +
                                                  std::to_string(layer.data_channels()) +
                                                  " input channels, got " + std::to_string(x.c()));
    if (layer.output_size(x.h()) < 1 || layer.output_size(x.w()) < 1)
        throw Error(ErrorCode::ShapeMismatch, "input " + x.shape_string() + " smaller than the kernel");
}

// Input of one sample with coordinate channels appended when requested.
template <class T>
std::vector<T> layer_input(const Tensor<T>& x, int n, const ConvLayer<T>& layer) {
    auto src = x.sample(n);
    std::vector<T> a(src.begin(), src.end());
    if (layer.coordconv) {
        const Tensor<T> coords = coord_channels<T>(x.h(), x.w());
        a.insert(a.end(), coords.values().begin(), coords.values().end());
    }
    return a;
}

// cols[(c * k + ky) * k + kx][oy * ow + ox]
template <class T>
void im2col(const T* in, int channels, int h, int w, const ConvLayer<T>& l, int oh, int ow,
            std::vector<T>& cols) {
    const int k = l.kernel;
    const std::size_t p = static_cast<std::size_t>(oh) * ow;
    cols.assign(static_cast<std::size_t>(channels) * k * k * p, T{});
    for (int c = 0; c < channels; ++c) {
        const T* plane = in + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* row = cols.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * p;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * l.stride - l.padding + ky;
                    if (iy < 0 || iy >= h) continue;
                    const T* src = plane + static_cast<std::size_t>(iy) * w;
                    T* dst = row + static_cast<std::size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * l.stride - l.padding + kx;
                        if (ix >= 0 && ix < w) dst[ox] = src[ix];
                    }
                }
            }
        }
    }
}

template <class T>
void col2im(const std::vector<T>& cols, int channels, int h, int w, const ConvLayer<T>& l, int oh,
            int ow, T* out) {
    const int k = l.kernel;
    const std::size_t p = static_cast<std::size_t>(oh) * ow;
    for (int c = 0; c < channels; ++c) {
        T* plane = out + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* row = cols.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * p;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * l.stride - l.padding + ky;
                    if (iy < 0 || iy >= h) continue;
                    T* dst = plane + static_cast<std::size_t>(iy) * w;
                    const T* src = row + static_cast<std::size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * l.stride - l.padding + kx;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

// Dot product with independent partial sums so the compiler can vectorize
// without reassociating a single accumulator.
template <class T>
T dot(const T* a, const T* b, std::size_t n) {
    T acc[8] = {};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (int j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
    T tail{};
    for (; i < n; ++i) tail += a[i] * b[i];
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <class T>
T sum(const T* a, std::size_t n) {
    T acc[8] = {};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (int j = 0; j < 8; ++j) acc[j] += a[i + j];
    T tail{};
    for (; i < n; ++i) tail += a[i];
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

}  // namespace

template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const ConvLayer<T>& layer) {
    check_input(x, layer);
    const int oh = layer.output_size(x.h());
    const int ow = layer.output_size(x.w());
    const std::size_t p = static_cast<std::size_t>(oh) * ow;
    const std::size_t kdim = static_cast<std::size_t>(layer.in_channels) * layer.kernel * layer.kernel;
    Tensor<T> y(x.n(), layer.out_channels, oh, ow);
    std::vector<T> cols;
    for (int n = 0; n < x.n(); ++n) {
        const auto a = layer_input(x, n, layer);
        im2col(a.data(), layer.in_channels, x.h(), x.w(), layer, oh, ow, cols);
        T* out = y.sample(n).data();
        for (int o = 0; o < layer.out_channels; ++o) {
            T* yrow = out + static_cast<std::size_t>(o) * p;
            std::fill(yrow, yrow + p, layer.bias[static_cast<std::size_t>(o)]);
            const T* wrow = layer.weights.data() + static_cast<std::size_t>(o) * kdim;
            for (std::size_t kk = 0; kk < kdim; ++kk) {
                const T wv = wrow[kk];
                if (wv == T{}) continue;
                const T* crow = cols.data() + kk * p;
                for (std::size_t i = 0; i < p; ++i) yrow[i] += wv * crow[i];
            }
        }
    }
    return y;
}

template <class T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const ConvLayer<T>& layer, const Tensor<T>& upstream) {
    check_input(x, layer);
    const int oh = layer.output_size(x.h());
    const int ow = layer.output_size(x.w());
    if (upstream.n() != x.n() || upstream.c() != layer.out_channels || upstream.h() != oh ||
        upstream.w() != ow)
        throw Error(ErrorCode::ShapeMismatch, "upstream gradient " + upstream.shape_string() +
                                                  " does not match the convolution output");
    const std::size_t p = static_cast<std::size_t>(oh) * ow;
    const std::size_t kdim = static_cast<std::size_t>(layer.in_channels) * layer.kernel * layer.kernel;

    ConvGrads<T> g;
    g.grad_x = Tensor<T>(x.n(), x.c(), x.h(), x.w());
    g.grad_w.assign(layer.weights.size(), T{});
    g.grad_b.assign(layer.bias.size(), T{});

    std::vector<T> cols;
    std::vector<T> gcols(kdim * p);
    std::vector<T> ga(static_cast<std::size_t>(layer.in_channels) * x.h() * x.w());
    for (int n = 0; n < x.n(); ++n) {
        const auto a = layer_input(x, n, layer);
        im2col(a.data(), layer.in_channels, x.h(), x.w(), layer, oh, ow, cols);
        const T* up = upstream.sample(n).data();
        for (int o = 0; o < layer.out_channels; ++o) {
            const T* urow = up + static_cast<std::size_t>(o) * p;
            g.grad_b[static_cast<std::size_t>(o)] += sum(urow, p);
            T* gw = g.grad_w.data() + static_cast<std::size_t>(o) * kdim;
            for (std::size_t kk = 0; kk < kdim; ++kk) gw[kk] += dot(urow, cols.data() + kk * p, p);
        }
        std::fill(gcols.begin(), gcols.end(), T{});
        for (std::size_t kk = 0; kk < kdim; ++kk) {
            T* grow = gcols.data() + kk * p;
            for (int o = 0; o < layer.out_channels; ++o) {
                const T wv = layer.weights[static_cast<std::size_t>(o) * kdim + kk];
                if (wv == T{}) continue;
                const T* urow = up + static_cast<std::size_t>(o) * p;
                for (std::size_t i = 0; i < p; ++i) grow[i] += wv * urow[i];
            }
        }
        std::fill(ga.begin(), ga.end(), T{});
        col2im(gcols, layer.in_channels, x.h(), x.w(), layer, oh, ow, ga.data());
        auto gx = g.grad_x.sample(n);
        std::copy(ga.begin(), ga.begin() + static_cast<std::ptrdiff_t>(gx.size()), gx.begin());
    }
    return g;
}

template <class T>
Tensor<T> leaky_relu_forward(const Tensor<T>& x, T slope) {
    Tensor<T> y = x;
    for (auto& v : y.values()) v = v > T{} ? v : slope * v;
    return y;
}

template <class T>
Tensor<T> leaky_relu_backward(const Tensor<T>& x, const Tensor<T>& upstream, T slope) {
    if (!x.same_shape(upstream))
        throw Error(ErrorCode::ShapeMismatch, "leaky_relu_backward shape mismatch");
    Tensor<T> g = upstream;
    const auto& xv = x.values();
    auto& gv = g.values();
    for (std::size_t i = 0; i < gv.size(); ++i)
        if (!(xv[i] > T{})) gv[i] *= slope;
    return g;
}

template <class T>
ConvLayer<T> inflate_weights(const ConvLayer<T>& layer) {
    layer.validate();
    if (layer.coordconv) throw Error(ErrorCode::InvalidArgument, "layer already has coordinate channels");
    ConvLayer<T> out = ConvLayer<T>::make(layer.in_channels, layer.out_channels, layer.kernel,
                                          layer.stride, layer.padding, true);
    out.bias = layer.bias;
    const int k = layer.kernel;
    for (int o = 0; o < layer.out_channels; ++o) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T total{};
                for (int i = 0; i < layer.in_channels; ++i) {
                    const T w = layer.weight(o, i, ky, kx);
                    out.weight(o, i, ky, kx) = w;
                    total += w;
                }
                const T mean = total / static_cast<T>(layer.in_channels);
                out.weight(o, layer.in_channels, ky, kx) = mean;
                out.weight(o, layer.in_channels + 1, ky, kx) = mean;
            }
        }
    }
    return out;
}

template <class T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state,
               const AdamHyper& hyper, std::span<const std::uint8_t> decay_mask) {
    if (grads.size() != params.size() || state.m.size() != params.size() ||
        state.v.size() != params.size() || (!decay_mask.empty() && decay_mask.size() != params.size()))
        throw Error(ErrorCode::ShapeMismatch, "adam_step buffer sizes disagree");
    ++state.step;
    const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = static_cast<double>(grads[i]);
        if (decay_mask.empty() || decay_mask[i] != 0) g += hyper.weight_decay * static_cast<double>(params[i]);
        const double m = hyper.beta1 * static_cast<double>(state.m[i]) + (1.0 - hyper.beta1) * g;
        const double v = hyper.beta2 * static_cast<double>(state.v[i]) + (1.0 - hyper.beta2) * g * g;
        state.m[i] = static_cast<T>(m);
        state.v[i] = static_cast<T>(v);
        const double m_hat = m / c1;
        const double v_hat = v / c2;
        params[i] = static_cast<T>(static_cast<double>(params[i]) -
                                   hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps));
    }
}

#define MPROF_INSTANTIATE_LAYERS(T)                                                               \
    template Tensor<T> coord_channels<T>(int, int);                                               \
    template Tensor<T> add_coord_channels<T>(const Tensor<T>&);                                   \
    template struct ConvLayer<T>;                                                                 \
    template Tensor<T> conv2d_forward<T>(const Tensor<T>&, const ConvLayer<T>&);                  \
    template ConvGrads<T> conv2d_backward<T>(const Tensor<T>&, const ConvLayer<T>&,               \
                                             const Tensor<T>&);                                   \
    template Tensor<T> leaky_relu_forward<T>(const Tensor<T>&, T);                                \
    template Tensor<T> leaky_relu_backward<T>(const Tensor<T>&, const Tensor<T>&, T);             \
    template ConvLayer<T> inflate_weights<T>(const ConvLayer<T>&);                                \
    template void adam_step<T>(std::span<T>, std::span<const T>, AdamState<T>&, const AdamHyper&, \
                               std::span<const std::uint8_t>);

MPROF_INSTANTIATE_LAYERS(float)
MPROF_INSTANTIATE_LAYERS(double)

#undef MPROF_INSTANTIATE_LAYERS

}  // namespace mprof::nn
