#pragma once

// Serial, loop-per-definition versions of the primitives. They are templated
// on the scalar so that the same code serves two purposes: in float they
// reproduce the optimized kernels' accumulation order and are compared
// bit-for-bit; in double they are the forward model behind finite-difference
// gradient checks.

#include <cmath>
#include <span>
#include <vector>

#include "srkit/tensor.hpp"

namespace srkit::reference {

inline std::size_t conv_out(std::size_t in, int stride) { return (in - 1) / static_cast<std::size_t>(stride) + 1; }

/// out[n,0,i,j] = sum over ch ascending of weight[ch] * x[n,ch,i,j].
template <typename T>
BasicTensor<T> conv1x1_fwd(const BasicTensor<T>& x, std::span<const T> weight) {
  const Shape s = x.shape();
  require_extent("conv1x1_fwd", "channel", weight.size(), s.c);
  BasicTensor<T> out(Shape{s.n, 1, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t i = 0; i < s.h; ++i)
      for (std::size_t j = 0; j < s.w; ++j) {
        T acc = 0;
        for (std::size_t ch = 0; ch < s.c; ++ch) acc += weight[ch] * x.at(n, ch, i, j);
        out.at(n, 0, i, j) = acc;
      }
  return out;
}

template <typename T>
BasicTensor<T> conv3x3_fwd(const BasicTensor<T>& x, const BasicTensor<T>& weight, int stride) {
  const Shape s = x.shape();
  const Shape ws = weight.shape();
  require_extent("conv3x3_fwd", "in_channel", ws.c, s.c);
  const std::size_t oh = conv_out(s.h, stride), ow = conv_out(s.w, stride);
  BasicTensor<T> out(Shape{s.n, ws.n, oh, ow});
  const auto st = static_cast<std::ptrdiff_t>(stride);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t oc = 0; oc < ws.n; ++oc)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          T acc = 0;
          for (std::size_t ic = 0; ic < s.c; ++ic)
            for (std::ptrdiff_t ky = 0; ky < 3; ++ky)
              for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * st + ky - 1;
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * st + kx - 1;
                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(s.h) ||
                    ix >= static_cast<std::ptrdiff_t>(s.w))
                  continue;
                acc += weight.at(oc, ic, ky, kx) * x.at(n, ic, iy, ix);
              }
          out.at(n, oc, oy, ox) = acc;
        }
  return out;
}

/// grad_x[n,ic,iy,ix] = sum over (oc, ky, kx) ascending of w * grad_out at the
/// output position that read (iy, ix) through tap (ky, kx).
template <typename T>
BasicTensor<T> conv3x3_bwd_input(const Shape& in, const BasicTensor<T>& weight, const BasicTensor<T>& grad_out,
                                 int stride) {
  const Shape ws = weight.shape();
  const Shape gs = grad_out.shape();
  BasicTensor<T> gx(in);
  const auto st = static_cast<std::ptrdiff_t>(stride);
  for (std::size_t n = 0; n < in.n; ++n)
    for (std::size_t ic = 0; ic < in.c; ++ic)
      for (std::size_t iy = 0; iy < in.h; ++iy)
        for (std::size_t ix = 0; ix < in.w; ++ix) {
          T acc = 0;
          for (std::size_t oc = 0; oc < ws.n; ++oc)
            for (std::ptrdiff_t ky = 0; ky < 3; ++ky)
              for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
                const std::ptrdiff_t ty = static_cast<std::ptrdiff_t>(iy) + 1 - ky;
                const std::ptrdiff_t tx = static_cast<std::ptrdiff_t>(ix) + 1 - kx;
                if (ty < 0 || tx < 0 || ty % st != 0 || tx % st != 0) continue;
                const std::ptrdiff_t oy = ty / st, ox = tx / st;
                if (oy >= static_cast<std::ptrdiff_t>(gs.h) || ox >= static_cast<std::ptrdiff_t>(gs.w)) continue;
                acc += weight.at(oc, ic, ky, kx) * grad_out.at(n, oc, oy, ox);
              }
          gx.at(n, ic, iy, ix) = acc;
        }
  return gx;
}

/// Plain sequential sum over (n, oy, ox). The optimized kernel sums in lanes,
/// so float results agree only to rounding.
template <typename T>
BasicTensor<T> conv3x3_bwd_weight(const BasicTensor<T>& x, const Shape& wshape, const BasicTensor<T>& grad_out,
                                  int stride) {
  const Shape s = x.shape();
  const Shape gs = grad_out.shape();
  BasicTensor<T> gw(wshape);
  const auto st = static_cast<std::ptrdiff_t>(stride);
  for (std::size_t oc = 0; oc < wshape.n; ++oc)
    for (std::size_t ic = 0; ic < wshape.c; ++ic)
      for (std::ptrdiff_t ky = 0; ky < 3; ++ky)
        for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
          T acc = 0;
          for (std::size_t n = 0; n < s.n; ++n)
            for (std::size_t oy = 0; oy < gs.h; ++oy)
              for (std::size_t ox = 0; ox < gs.w; ++ox) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * st + ky - 1;
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * st + kx - 1;
                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(s.h) ||
                    ix >= static_cast<std::ptrdiff_t>(s.w))
                  continue;
                acc += grad_out.at(n, oc, oy, ox) * x.at(n, ic, iy, ix);
              }
          gw.at(oc, ic, ky, kx) = acc;
        }
  return gw;
}

/// [n, in] x [out, in]^T -> [n, out, 1, 1], inner index ascending.
template <typename T>
BasicTensor<T> linear_fwd(const BasicTensor<T>& x, const BasicTensor<T>& weight) {
  const std::size_t rows = x.shape().n, in = x.shape().sample();
  const std::size_t out = weight.shape().n;
  require_extent("linear_fwd", "in_features", weight.shape().sample(), in);
  auto y = BasicTensor<T>::matrix(rows, out);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < out; ++o) {
      T acc = 0;
      for (std::size_t i = 0; i < in; ++i) acc += x[r * in + i] * weight[o * in + i];
      y[r * out + o] = acc;
    }
  return y;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  const std::size_t rows = logits.shape().n, p = logits.shape().sample();
  BasicTensor<T> y(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    T mx = logits[r * p];
    for (std::size_t i = 1; i < p; ++i) mx = std::max(mx, logits[r * p + i]);
    T z = 0;
    for (std::size_t i = 0; i < p; ++i) {
      y[r * p + i] = std::exp(logits[r * p + i] - mx);
      z += y[r * p + i];
    }
    for (std::size_t i = 0; i < p; ++i) y[r * p + i] /= z;
  }
  return y;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
BasicTensor<T> global_avgpool(const BasicTensor<T>& x) {
  const Shape s = x.shape();
  BasicTensor<T> y(Shape{s.n, s.c, 1, 1});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      T acc = 0;
      for (std::size_t k = 0; k < s.plane(); ++k) acc += x[(n * s.c + c) * s.plane() + k];
      y[n * s.c + c] = acc / static_cast<T>(s.plane());
    }
  return y;
}

template <typename T>
T cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels) {
  const std::size_t rows = logits.shape().n, k = logits.shape().sample();
  T total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    T mx = logits[r * k];
    for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, logits[r * k + i]);
    T z = 0;
    for (std::size_t i = 0; i < k; ++i) z += std::exp(logits[r * k + i] - mx);
    total += mx + std::log(z) - logits[r * k + static_cast<std::size_t>(labels[r])];
  }
  return total / static_cast<T>(rows);
}

/// Broadcasting multiply by an element mask or an [n, c, 1, 1] channel mask.
template <typename T>
BasicTensor<T> apply_mask(const BasicTensor<T>& x, const BasicTensor<T>& mask) {
  BasicTensor<T> y(x.shape());
  const std::size_t plane = x.shape().plane();
  const bool per_channel = mask.size() != x.size();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * mask[per_channel ? i / plane : i];
  return y;
}

}  // namespace srkit::reference
