#pragma once

// SR block: squeeze, remember, add.
//
//   squeezed = conv1x1(x)                      [n, 1, h, w]
//   alpha    = softmax(fc2 * fc1 * flatten(squeezed))   one row per sample
//   recall   = sum_i alpha[:, i] * memory[i]  [n, c, h, w]
//   out      = x + recall
//
// All layers are bias-free, so the stored scalars are exactly
// c + h*w*u + u*p + p*c*h*w. Memory starts at zero, which makes a freshly
// initialised block the identity.

#include <cstddef>

#include "srkit/tensor.hpp"

namespace srkit {

struct SRConfig {
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;
  std::size_t u = 8;  // hidden width of the weighting network
  std::size_t p = 4;  // number of memory blocks
  /// Rectifier on the hidden layer. Off by default: the hidden layer is a
  /// plain linear map.
  bool hidden_relu = false;
  /// Lifts the u in {8, 16, 32}, p in [2, 20] restriction (tests, tiny hosts).
  bool outside_grid_ok = false;

  void validate() const;
  bool operator==(const SRConfig&) const = default;
};

struct SRParams {
  SRConfig cfg;
  Tensor squeeze;  // [1, c, 1, 1]
  Tensor fc1;      // [u, h*w, 1, 1]
  Tensor fc2;      // [p, u, 1, 1]
  Tensor memory;   // [p, c, h, w]

  /// Same shapes, all zero. Also the layout of a gradient.
  static SRParams zeros(const SRConfig& cfg);
  std::size_t scalar_count() const;
  bool operator==(const SRParams&) const = default;
};

struct SRForwardCache {
  Tensor input;
  Tensor squeezed;
  Tensor hidden_pre;
  Tensor hidden;
  Tensor alpha;  // [n, p, 1, 1]
  bool valid = false;
};

/// Squeeze and both FCN matrices draw uniform(-sqrt(1/c), sqrt(1/c)); note
/// that the FCN uses the channel count too, not its own fan-in. Memory is 0.
SRParams sr_init(const SRConfig& cfg, Rng& rng);

/// Fills `cache` when given. Throws DimensionError on a shape mismatch.
Tensor sr_forward(const SRParams& params, const Tensor& x, SRForwardCache* cache = nullptr);

/// Per-sample softmax weights only.
Tensor sr_alpha(const SRParams& params, const Tensor& x);

/// sum_i alpha[n, i] * memory[i], accumulated in ascending i.
Tensor sr_recall_map(const SRParams& params, const Tensor& alpha);

struct SRGrads {
  SRParams params;   // gradient w.r.t. every learned tensor
  Tensor grad_x;
  Tensor grad_alpha;  // d loss / d alpha, before the softmax backward
};

/// Throws UsageError if `cache` is not from a forward pass with these params.
SRGrads sr_backward(const SRParams& params, const SRForwardCache& cache, const Tensor& grad_out);

std::size_t sr_param_count(const SRConfig& cfg);

/// 100 * sr_param_count / baseline, unrounded.
double sr_overhead_exact(const SRConfig& cfg, std::size_t baseline_params);
/// Same, rounded half away from zero to two decimals.
double sr_overhead(const SRConfig& cfg, std::size_t baseline_params);

/// Copy with the memory bank zeroed, so the block passes its input through.
SRParams sr_ablate(const SRParams& params);

}  // namespace srkit
