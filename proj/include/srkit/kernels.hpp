#pragma once

// Forward and backward primitives used by the SR block and the host network.
//
// Every kernel fixes the order in which each output element accumulates its
// terms, and OpenMP work is partitioned so that each output element is owned
// by exactly one thread. Results are therefore bit-identical for any thread
// count. The serial versions in reference.hpp follow the same orders and are
// what the tests compare against.

#include <span>
#include <vector>

#include "srkit/tensor.hpp"

namespace srkit::ops {

/// Caps OpenMP parallelism for all kernels (>= 1).
void set_threads(int n);
int threads();

// 1x1 convolution to a single output channel, no bias. Channels accumulate in
// ascending order.
Tensor conv1x1_fwd(const Tensor& x, std::span<const float> weight);

struct Conv1x1Grads {
  Tensor grad_x;
  std::vector<float> grad_weight;
};
Conv1x1Grads conv1x1_bwd(const Tensor& x, std::span<const float> weight, const Tensor& grad_out);

// Bias-free fully connected layer. `x` is read as a [n, c*h*w] matrix and
// `weight` is [out, in, 1, 1]; the result is [n, out, 1, 1].
Tensor linear_fwd(const Tensor& x, const Tensor& weight);

struct LinearGrads {
  Tensor grad_x;  // same shape as x
  Tensor grad_weight;
};
LinearGrads linear_bwd(const Tensor& x, const Tensor& weight, const Tensor& grad_out);

// Row-wise softmax over the trailing c*h*w elements of each sample.
Tensor softmax_fwd(const Tensor& logits);
Tensor softmax_bwd(const Tensor& probs, const Tensor& grad_out);

// 3x3 convolution, padding 1, stride 1 or 2, weight [out, in, 3, 3], no bias.
std::size_t conv3x3_out_extent(std::size_t in, int stride);
Tensor conv3x3_fwd(const Tensor& x, const Tensor& weight, int stride);

struct Conv3x3Grads {
  Tensor grad_x;  // empty when not requested
  Tensor grad_weight;
};
Conv3x3Grads conv3x3_bwd(const Tensor& x, const Tensor& weight, const Tensor& grad_out, int stride,
                         bool want_grad_x = true);

Tensor relu_fwd(const Tensor& x);
/// Gradient passes where the forward input was strictly positive.
Tensor relu_bwd(const Tensor& x, const Tensor& grad_out);

Tensor global_avgpool_fwd(const Tensor& x);
Tensor global_avgpool_bwd(const Shape& input, const Tensor& grad_out);

/// Mean over the batch of -log softmax(logits)[label], via log-sum-exp.
float cross_entropy_fwd(const Tensor& logits, std::span<const int> labels);
Tensor cross_entropy_bwd(const Tensor& logits, std::span<const int> labels);

Tensor add_fwd(const Tensor& a, const Tensor& b);
Tensor flatten(const Tensor& x);

enum class DropoutKind { none, element, channel };

/// Inverted-dropout mask: survivors hold 1/(1-p), dropped entries 0. The
/// element variant has the input's shape; the channel variant is [n, c, 1, 1]
/// with one draw per (n, c) in that order.
Tensor dropout_mask(const Shape& input, DropoutKind kind, float p, Rng& rng);
/// Multiplies by a mask from dropout_mask, broadcasting channel masks over
/// (h, w). Also serves as the backward pass.
Tensor dropout_mask_apply(const Tensor& x, const Tensor& mask);

void check_dropout_p(float p);

}  // namespace srkit::ops
