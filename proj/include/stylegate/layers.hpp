#pragma once

// Dense f64 building blocks with explicit backward passes. Every backward
// accumulates (+=) into parameter gradients so several passes can share one
// gradient buffer.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#ifndef EIGEN_DONT_PARALLELIZE
#define EIGEN_DONT_PARALLELIZE
#endif
#include <Eigen/Dense>

#include "stylegate/tensor.hpp"

namespace stylegate::layers {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

// 3x3 kernel, zero padding 1.
struct Conv3x3 {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t stride = 1;

    static constexpr std::size_t kernel = 3;
    static constexpr std::size_t pad = 1;

    std::size_t out_extent(std::size_t in) const { return (in + 2 * pad - kernel) / stride + 1; }
    std::size_t weight_count() const { return out_channels * in_channels * kernel * kernel; }
    std::size_t patch_size() const { return in_channels * kernel * kernel; }
};

namespace detail {

// Column matrix (Cin*9) x (Ho*Wo) for one batch item.
inline void im2col(const double* in, std::size_t h, std::size_t w, const Conv3x3& g, RowMatrix& col)
{
    const std::size_t ho = g.out_extent(h), wo = g.out_extent(w);
    col.resize(static_cast<Eigen::Index>(g.patch_size()), static_cast<Eigen::Index>(ho * wo));
    double* dst = col.data();
    for (std::size_t c = 0; c < g.in_channels; ++c) {
        const double* plane = in + c * h * w;
        for (std::size_t ky = 0; ky < Conv3x3::kernel; ++ky) {
            for (std::size_t kx = 0; kx < Conv3x3::kernel; ++kx) {
                for (std::size_t oy = 0; oy < ho; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - 1;
                    for (std::size_t ox = 0; ox < wo; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - 1;
                        const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(h) &&
                                            ix < static_cast<std::ptrdiff_t>(w);
                        *dst++ = inside ? plane[static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)] : 0.0;
                    }
                }
            }
        }
    }
}

inline void col2im_add(const RowMatrix& col, std::size_t h, std::size_t w, const Conv3x3& g, double* out)
{
    const std::size_t ho = g.out_extent(h), wo = g.out_extent(w);
    const double* src = col.data();
    for (std::size_t c = 0; c < g.in_channels; ++c) {
        double* plane = out + c * h * w;
        for (std::size_t ky = 0; ky < Conv3x3::kernel; ++ky) {
            for (std::size_t kx = 0; kx < Conv3x3::kernel; ++kx) {
                for (std::size_t oy = 0; oy < ho; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - 1;
                    for (std::size_t ox = 0; ox < wo; ++ox, ++src) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - 1;
                        if (iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(h) &&
                            ix < static_cast<std::ptrdiff_t>(w))
                            plane[static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)] += *src;
                    }
                }
            }
        }
    }
}

} // namespace detail

inline Activation conv_forward(const Activation& in, std::span<const double> weight, std::span<const double> bias,
                               const Conv3x3& g)
{
    if (in.channels() != g.in_channels)
        throw ShapeError("conv: expected " + std::to_string(g.in_channels) + " input channels, got " +
                         std::to_string(in.channels()));
    const std::size_t ho = g.out_extent(in.height()), wo = g.out_extent(in.width());
    Activation out(in.batch(), g.out_channels, ho, wo);
    const ConstMatrixMap wmat(weight.data(), static_cast<Eigen::Index>(g.out_channels),
                              static_cast<Eigen::Index>(g.patch_size()));
    const Eigen::Map<const Eigen::VectorXd> b(bias.data(), static_cast<Eigen::Index>(g.out_channels));
    RowMatrix col;
    for (std::size_t n = 0; n < in.batch(); ++n) {
        detail::im2col(in.item(n).data(), in.height(), in.width(), g, col);
        MatrixMap o(out.item(n).data(), static_cast<Eigen::Index>(g.out_channels),
                    static_cast<Eigen::Index>(ho * wo));
        o.noalias() = wmat * col;
        o.colwise() += b;
    }
    return out;
}

// d_in may be null when the input gradient is not needed.
inline void conv_backward(const Activation& in, std::span<const double> weight, const Conv3x3& g,
                          const Activation& d_out, std::span<double> d_weight, std::span<double> d_bias,
                          Activation* d_in)
{
    const std::size_t ho = d_out.height(), wo = d_out.width();
    const ConstMatrixMap wmat(weight.data(), static_cast<Eigen::Index>(g.out_channels),
                              static_cast<Eigen::Index>(g.patch_size()));
    MatrixMap dw(d_weight.data(), static_cast<Eigen::Index>(g.out_channels),
                 static_cast<Eigen::Index>(g.patch_size()));
    if (d_in)
        *d_in = Activation(in.batch(), in.channels(), in.height(), in.width());
    RowMatrix col, dcol;
    for (std::size_t n = 0; n < in.batch(); ++n) {
        const ConstMatrixMap dout(d_out.item(n).data(), static_cast<Eigen::Index>(g.out_channels),
                                  static_cast<Eigen::Index>(ho * wo));
        if (!d_weight.empty()) {
            detail::im2col(in.item(n).data(), in.height(), in.width(), g, col);
            dw.noalias() += dout * col.transpose();
            for (std::size_t oc = 0; oc < g.out_channels; ++oc)
                d_bias[oc] += dout.row(static_cast<Eigen::Index>(oc)).sum();
        }
        if (d_in) {
            dcol.noalias() = wmat.transpose() * dout;
            detail::col2im_add(dcol, in.height(), in.width(), g, d_in->item(n).data());
        }
    }
}

inline void relu_inplace(Activation& x)
{
    for (double& v : x.values())
        v = v > 0.0 ? v : 0.0;
}

// Zeroes gradient entries where the (post-ReLU) output was not positive.
inline void relu_backward_inplace(const Activation& out, Activation& grad)
{
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(out[i] > 0.0))
            grad[i] = 0.0;
}

inline double sigmoid(double z)
{
    if (z >= 0.0)
        return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline Activation global_avg_pool(const Activation& x)
{
    Activation out(x.batch(), x.channels(), 1, 1);
    const std::size_t plane = x.height() * x.width();
    for (std::size_t n = 0; n < x.batch(); ++n)
        for (std::size_t c = 0; c < x.channels(); ++c) {
            const double* p = x.data() + (n * x.channels() + c) * plane;
            double s = 0.0;
            for (std::size_t i = 0; i < plane; ++i)
                s += p[i];
            out(n, c, 0, 0) = s / static_cast<double>(plane);
        }
    return out;
}

inline void global_avg_pool_backward(const Activation& d_out, Activation& d_in)
{
    const std::size_t plane = d_in.height() * d_in.width();
    for (std::size_t n = 0; n < d_in.batch(); ++n)
        for (std::size_t c = 0; c < d_in.channels(); ++c) {
            const double g = d_out(n, c, 0, 0) / static_cast<double>(plane);
            double* p = d_in.data() + (n * d_in.channels() + c) * plane;
            for (std::size_t i = 0; i < plane; ++i)
                p[i] += g;
        }
}

// x: B x In (stored B x In x 1 x 1), weight: Out x In.
inline Activation linear_forward(const Activation& x, std::span<const double> weight, std::span<const double> bias,
                                 std::size_t out_features)
{
    const std::size_t in_features = x.item_size();
    Activation out(x.batch(), out_features, 1, 1);
    const ConstMatrixMap w(weight.data(), static_cast<Eigen::Index>(out_features),
                           static_cast<Eigen::Index>(in_features));
    const ConstMatrixMap xm(x.data(), static_cast<Eigen::Index>(x.batch()), static_cast<Eigen::Index>(in_features));
    MatrixMap o(out.data(), static_cast<Eigen::Index>(x.batch()), static_cast<Eigen::Index>(out_features));
    o.noalias() = xm * w.transpose();
    for (std::size_t n = 0; n < x.batch(); ++n)
        for (std::size_t j = 0; j < out_features; ++j)
            out[n * out_features + j] += bias[j];
    return out;
}

inline void linear_backward(const Activation& x, std::span<const double> weight, const Activation& d_out,
                            std::span<double> d_weight, std::span<double> d_bias, Activation* d_x)
{
    const auto batch = static_cast<Eigen::Index>(x.batch());
    const auto in_f = static_cast<Eigen::Index>(x.item_size());
    const auto out_f = static_cast<Eigen::Index>(d_out.item_size());
    const ConstMatrixMap xm(x.data(), batch, in_f);
    const ConstMatrixMap dm(d_out.data(), batch, out_f);
    if (!d_weight.empty()) {
        MatrixMap dw(d_weight.data(), out_f, in_f);
        dw.noalias() += dm.transpose() * xm;
        for (Eigen::Index j = 0; j < out_f; ++j)
            d_bias[static_cast<std::size_t>(j)] += dm.col(j).sum();
    }
    if (d_x) {
        *d_x = Activation(x.batch(), x.channels(), x.height(), x.width());
        const ConstMatrixMap w(weight.data(), out_f, in_f);
        MatrixMap dx(d_x->data(), batch, in_f);
        dx.noalias() = dm * w;
    }
}

// Row-wise softmax of a B x K tensor.
inline Activation softmax(const Activation& logits)
{
    Activation p(logits.batch(), logits.item_size(), 1, 1);
    const std::size_t k = logits.item_size();
    for (std::size_t n = 0; n < logits.batch(); ++n) {
        const double* z = logits.data() + n * k;
        double m = z[0];
        for (std::size_t j = 1; j < k; ++j)
            m = std::max(m, z[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            p[n * k + j] = std::exp(z[j] - m);
            s += p[n * k + j];
        }
        for (std::size_t j = 0; j < k; ++j)
            p[n * k + j] /= s;
    }
    return p;
}

inline void add_inplace(Activation& a, const Activation& b)
{
    require_same_shape(a, b, "add");
    for (std::size_t i = 0; i < a.size(); ++i)
        a[i] += b[i];
}

} // namespace stylegate::layers
