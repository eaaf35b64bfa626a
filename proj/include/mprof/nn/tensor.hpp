#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mprof/error.hpp"

namespace mprof::nn {

/// Dense NCHW tensor. Lower-rank tensors use leading axes of size 1.
template <class T>
class Tensor {
public:
    Tensor() = default;
    Tensor(int n, int c, int h, int w, T fill = T{})
        : shape_{n, c, h, w}, data_(static_cast<std::size_t>(n) * c * h * w, fill) {
        if (n < 0 || c < 0 || h < 0 || w < 0)
            throw Error(ErrorCode::ShapeMismatch, "negative tensor extent");
    }

    int n() const { return shape_[0]; }
    int c() const { return shape_[1]; }
    int h() const { return shape_[2]; }
    int w() const { return shape_[3]; }
    const std::array<int, 4>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    T& operator()(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
    const T& operator()(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    /// One (c, h, w) slab of the batch.
    std::span<T> sample(int n) {
        const std::size_t stride = static_cast<std::size_t>(c()) * h() * w();
        return {data_.data() + stride * n, stride};
    }
    std::span<const T> sample(int n) const {
        const std::size_t stride = static_cast<std::size_t>(c()) * h() * w();
        return {data_.data() + stride * n, stride};
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_string() const {
        return std::to_string(n()) + "x" + std::to_string(c()) + "x" + std::to_string(h()) + "x" +
               std::to_string(w());
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out(n(), c(), h(), w());
        for (std::size_t i = 0; i < data_.size(); ++i) out.values()[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    std::size_t offset(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
    }

    std::array<int, 4> shape_{0, 0, 0, 0};
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace mprof::nn
