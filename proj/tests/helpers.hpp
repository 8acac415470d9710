#pragma once

#include <cstddef>
#include <ostream>
#include <string>

#include "srkit/tensor.hpp"

namespace srkit {

// Readable parameterised test names.
inline void PrintTo(const Shape& s, std::ostream* os) { *os << s.str(); }

}  // namespace srkit

namespace srkit::testing {

inline Tensor random_tensor(const Shape& s, Rng& rng, float bound = 1.0f) {
  Tensor t(s);
  for (float& v : t.data()) v = rng.symmetric(bound);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

// Parameter totals of the canonical torchvision-style ResNets, summed layer by
// layer: convolutions without bias, two affine scalars per batch-norm channel,
// and a biased classifier.
inline std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k) { return in * out * k * k; }
inline std::size_t bn_params(std::size_t ch) { return 2 * ch; }

inline std::size_t resnet50_imagenet_params() {
  std::size_t total = conv_params(3, 64, 7) + bn_params(64);
  const std::size_t blocks[4] = {3, 4, 6, 3};
  const std::size_t widths[4] = {64, 128, 256, 512};
  std::size_t in = 64;
  for (int s = 0; s < 4; ++s) {
    const std::size_t w = widths[s], out = 4 * w;
    for (std::size_t b = 0; b < blocks[s]; ++b) {
      total += conv_params(in, w, 1) + bn_params(w);
      total += conv_params(w, w, 3) + bn_params(w);
      total += conv_params(w, out, 1) + bn_params(out);
      if (b == 0) total += conv_params(in, out, 1) + bn_params(out);
      in = out;
    }
  }
  return total + in * 1000 + 1000;
}

inline std::size_t resnet18_cifar_params(std::size_t classes) {
  std::size_t total = conv_params(3, 64, 3) + bn_params(64);
  const std::size_t widths[4] = {64, 128, 256, 512};
  std::size_t in = 64;
  for (int s = 0; s < 4; ++s) {
    const std::size_t w = widths[s];
    for (int b = 0; b < 2; ++b) {
      const bool downsample = b == 0 && (s > 0 || in != w);
      total += conv_params(in, w, 3) + bn_params(w);
      total += conv_params(w, w, 3) + bn_params(w);
      if (downsample) total += conv_params(in, w, 1) + bn_params(w);
      in = w;
    }
  }
  return total + in * classes + classes;
}

}  // namespace srkit::testing
