#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "facetts/diffcore/tensor.hpp"

// Differentiable operations. Shapes use a leading channel axis for feature maps:
// [C, L] for sequences and [C, H, W] for images/spectrogram grids.
namespace facetts::dc {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double c);
Tensor shift(const Tensor& x, double c);
/// Multiplies every element of `x` by the single value held in scalar tensor `s`.
Tensor mul_scalar(const Tensor& x, const Tensor& s);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x);  // rank 2

/// x: [C, ...], v: [C]; adds v[c] to every element of channel c.
Tensor add_channel(const Tensor& x, const Tensor& v);
/// x: [R, C], v: [C]; adds v to every row.
Tensor add_row(const Tensor& x, const Tensor& v);

Tensor matmul(const Tensor& a, const Tensor& b);  // [M,K] x [K,N]
/// x: [N, In], w: [Out, In], b: [Out] (optional, pass undefined) -> [N, Out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

/// x: [Cin, L], w: [Cout, Cin, K], b: [Cout] or undefined. Zero padding `pad` on both sides.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t pad);
/// x: [Cin, H, W], w: [Cout, Cin, KH, KW], b: [Cout] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad);

/// Non-overlapping average pooling with floor semantics. x: [C, H, W].
Tensor avg_pool2d(const Tensor& x, std::size_t ph, std::size_t pw);
/// Nearest-neighbour resize of [C, H, W] to [C, out_h, out_w].
Tensor upsample_nearest(const Tensor& x, std::size_t out_h, std::size_t out_w);
/// Mean over every axis but the first: [C, ...] -> [C].
Tensor global_avg_pool(const Tensor& x);

/// Concatenate along axis 0; trailing extents must agree.
Tensor concat0(const std::vector<Tensor>& parts);
/// Rows [start, start + count) along axis 0.
Tensor slice0(const Tensor& x, std::size_t start, std::size_t count);
/// x: [R, C]; out[i] = x[index[i]]. Backward scatter-adds.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);

/// Normalizes over the channel axis at every position. x: [C, L], gamma/beta: [C].
Tensor layer_norm_channels(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// x / ||x||_2 over all elements.
Tensor l2_normalize(const Tensor& x);

/// Mean over rows of -log softmax(logits[i])[targets[i]]. logits: [N, K].
Tensor cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> targets);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

}  // namespace facetts::dc
