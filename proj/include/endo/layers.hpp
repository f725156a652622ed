#pragma once

#include <cstddef>
#include <span>

#include "endo/autodiff.hpp"

// Differentiable layers. Feature maps are HxWxC tensors; matrices are NxD.
namespace endo::nn {

// kernel: [kh, kw, C, F] with kh, kw odd.
Var conv2d(Var input, Var kernel, int stride, int pad);

// Adds a per-channel bias (length = last dim of x).
Var bias_add(Var x, Var bias);

Var leaky_relu(Var x, double slope);
inline Var relu(Var x) { return leaky_relu(x, 0.0); }

inline constexpr double kResidualSlope = 0.01;

// x + conv(leaky(conv(x, first)), second); both kernels 3x3 CxC, pad 1.
Var residual_block(Var x, Var first, Var second);

Var add(Var a, Var b);
Var scale(Var x, double factor);

// 2x2 window, stride 2; odd trailing rows/cols are dropped.
Var max_pool_2x2(Var x);

// x: [N, in], weight: [in, out] -> [N, out]
Var fully_connected(Var x, Var weight);

Var sigmoid(Var x);

// Softmax over a trailing dimension of size 2.
Var softmax_2class(Var logits);

// Smooth map of R onto (0, 1) that is close to the identity on [0, 1]:
// (softplus(k x) - softplus(k (x - 1))) / k.
Var soft_clip(Var x, double sharpness);

Var mean(Var x);
Var sum(Var x);

// Average of x over the pixels of each label: x HxWxC, labels H*W in [0, p).
// Output [p, C]. Labels with no pixels yield zero rows.
Var superpixel_pool(Var x, std::span<const int> labels, std::size_t count);

// Mean over rows of -log(max(probs[row, cls], floor)); probs [..., 2].
Var class_nll(Var probs, int cls, double floor);

// sum_i x_i * weights_i with a constant weight tensor of the same shape.
Var dot_const(Var x, const Tensor& weights);

// Mean absolute difference to a constant target of the same shape.
Var l1_mean(Var x, const Tensor& target);

}  // namespace endo::nn
