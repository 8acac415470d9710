#pragma once

// Deterministic synthetic image classification data.
//
// Class k is a template built from a cross-hatch of stripes (orientation and
// frequency from k), a pair of Gaussian blobs in either the top or bottom
// corners (from k's parity) and a class colour. Templates are mirror-symmetric
// in width, so horizontal flips preserve the label. Samples add i.i.d.
// Gaussian noise, clamp to [0, 1] and are normalised per channel with
// training-split statistics.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "srkit/tensor.hpp"

namespace srkit {

struct SynthSpec {
  std::size_t classes = 10;
  std::size_t per_class_train = 200;  // split 90/10 into train/val
  std::size_t per_class_test = 50;
  std::size_t image_c = 3;
  std::size_t image_h = 32;
  std::size_t image_w = 32;
  float noise_sigma = 0.25f;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Dataset {
  Tensor images;  // [n, c, h, w]
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  /// Rows `idx` in the given order.
  Dataset gather(std::span<const std::size_t> idx) const;
};

struct SynthData {
  Dataset train;
  Dataset val;
  Dataset test;
  std::vector<float> channel_mean;
  std::vector<float> channel_std;
};

/// Noise-free class template in [0, 1], shape [1, c, h, w].
Tensor class_template(const SynthSpec& spec, std::size_t k);

SynthData synth_generate(const SynthSpec& spec);

/// (x - mean[c]) / std[c] in place.
void normalize_channels(Tensor& images, std::span<const float> mean, std::span<const float> stddev);

/// One Bernoulli(0.5) draw per sample, in sample order.
std::vector<std::uint8_t> flip_mask(std::size_t n, Rng& rng);
/// Mirrors sample i along width when mask[i] != 0.
Tensor apply_flip(const Tensor& batch, std::span<const std::uint8_t> mask);
/// Random horizontal flips when `flip` is set; otherwise a copy, and no draws.
Tensor augment(const Tensor& batch, Rng& rng, bool flip);

}  // namespace srkit
