#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stylegate/error.hpp"

namespace stylegate {

// Per-image geometry (channels, height, width).
struct ImageShape {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t size() const { return channels * height * width; }
    bool operator==(const ImageShape&) const = default;

    std::string str() const
    {
        return "(" + std::to_string(channels) + "," + std::to_string(height) + "," +
               std::to_string(width) + ")";
    }
};

// Rank-4 dense tensor in NCHW order.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    Tensor(std::size_t n, std::size_t c, std::size_t h, std::size_t w, T fill = T{})
        : n_(n), c_(c), h_(h), w_(w), data_(n * c * h * w, fill)
    {
    }
    Tensor(std::size_t n, ImageShape s, T fill = T{}) : Tensor(n, s.channels, s.height, s.width, fill) {}

    std::size_t batch() const { return n_; }
    std::size_t channels() const { return c_; }
    std::size_t height() const { return h_; }
    std::size_t width() const { return w_; }
    ImageShape item_shape() const { return {c_, h_, w_}; }
    std::size_t item_size() const { return c_ * h_ * w_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    bool same_shape(const Tensor& o) const { return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }
    template <typename U>
    bool same_shape(const Tensor<U>& o) const
    {
        return n_ == o.batch() && c_ == o.channels() && h_ == o.height() && w_ == o.width();
    }

    std::string shape_str() const
    {
        return std::to_string(n_) + "x" + std::to_string(c_) + "x" + std::to_string(h_) + "x" +
               std::to_string(w_);
    }

    T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w)
    {
        return data_[((n * c_ + c) * h_ + h) * w_ + w];
    }
    const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const
    {
        return data_[((n * c_ + c) * h_ + h) * w_ + w];
    }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> item(std::size_t n) { return {data_.data() + n * item_size(), item_size()}; }
    std::span<const T> item(std::size_t n) const { return {data_.data() + n * item_size(), item_size()}; }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    template <typename U>
    Tensor<U> cast() const
    {
        Tensor<U> out(n_, c_, h_, w_);
        std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
        return out;
    }

    bool operator==(const Tensor&) const = default;

private:
    std::size_t n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<T> data_;
};

// Images and stored pixels are f32 in [0,1]; activations and gradients are f64.
using ImageTensor = Tensor<float>;
using Activation = Tensor<double>;

inline void require_same_shape(const Activation& a, const Activation& b, const char* what)
{
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

} // namespace stylegate
