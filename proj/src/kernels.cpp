#include "srkit/kernels.hpp"

#include "srkit/reference.hpp"

#include <omp.h>

#include <array>
#include <cmath>
#include <string>

namespace srkit::ops {

namespace {

int g_threads = 1;

std::ptrdiff_t sz(std::size_t v) { return static_cast<std::ptrdiff_t>(v); }

void check_finite(const Tensor& t, const char* op) {
  for (float v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

void check_stride(int stride) {
  if (stride != 1 && stride != 2) throw ConfigError("conv3x3: stride must be 1 or 2, got " + std::to_string(stride));
}

// Layout used by the 3x3 kernels. The input plane is zero-padded by one pixel
// and, for stride 2, split into four (row parity, column parity) phase planes.
// Each of the nine taps then reads a contiguous run of its source plane at a
// fixed offset, so an output row pitch of `pitch` turns the whole plane into
// one flat loop. Columns past the true output width are computed and dropped.
// Padding terms contribute exact zeros, which leaves every sum bit-identical
// to the bounds-checked loop in reference.hpp.
struct ConvGeom {
  std::size_t h = 0, w = 0, oh = 0, ow = 0;
  int stride = 1;
  std::size_t pitch = 0;
  std::size_t nplanes = 0;
  std::size_t plane_len = 0;
  std::size_t acc_len = 0;    // oh * pitch
  std::size_t lane_len = 0;   // acc_len rounded up to kLanes
  std::array<std::size_t, 9> tap_plane{};
  std::array<std::size_t, 9> tap_off{};
};

constexpr std::size_t kLanes = 16;
constexpr std::size_t kSlack = 18;

ConvGeom make_geom(std::size_t h, std::size_t w, int stride) {
  ConvGeom g;
  g.h = h;
  g.w = w;
  g.stride = stride;
  g.oh = conv3x3_out_extent(h, stride);
  g.ow = conv3x3_out_extent(w, stride);
  if (stride == 1) {
    g.pitch = w + 2;
    g.nplanes = 1;
    g.plane_len = (h + 2) * g.pitch + kSlack;
  } else {
    g.pitch = g.ow + 1;
    g.nplanes = 4;
    g.plane_len = (g.oh + 1) * g.pitch + kSlack;
  }
  g.acc_len = g.oh * g.pitch;
  g.lane_len = (g.acc_len + kLanes - 1) / kLanes * kLanes;
  for (std::size_t ky = 0; ky < 3; ++ky)
    for (std::size_t kx = 0; kx < 3; ++kx) {
      const std::size_t t = ky * 3 + kx;
      if (stride == 1) {
        g.tap_plane[t] = 0;
        g.tap_off[t] = ky * g.pitch + kx;
      } else {
        g.tap_plane[t] = (ky % 2) * 2 + (kx % 2);
        g.tap_off[t] = (ky / 2) * g.pitch + kx / 2;
      }
    }
  return g;
}

// Writes the padded (or phase-split) form of one h x w plane into `dst`,
// which holds g.nplanes * g.plane_len zero-initialised floats.
void pack_input(const ConvGeom& g, const float* src, float* dst) {
  if (g.stride == 1) {
    for (std::size_t iy = 0; iy < g.h; ++iy) {
      float* row = dst + (iy + 1) * g.pitch + 1;
      for (std::size_t ix = 0; ix < g.w; ++ix) row[ix] = src[iy * g.w + ix];
    }
    return;
  }
  for (std::size_t iy = 0; iy < g.h; ++iy) {
    const std::size_t pr = iy + 1;
    const std::size_t r = pr / 2;
    if (r > g.oh) continue;
    for (std::size_t ix = 0; ix < g.w; ++ix) {
      const std::size_t pc = ix + 1;
      const std::size_t c = pc / 2;
      if (c > g.ow) continue;
      dst[((pr % 2) * 2 + (pc % 2)) * g.plane_len + r * g.pitch + c] = src[iy * g.w + ix];
    }
  }
}

}  // namespace

void set_threads(int n) {
  g_threads = n < 1 ? 1 : n;
  omp_set_num_threads(g_threads);
}

int threads() { return g_threads; }

// ---------------------------------------------------------------------------
// 1x1 squeeze convolution

Tensor conv1x1_fwd(const Tensor& x, std::span<const float> weight) {
  const Shape s = x.shape();
  require_extent("conv1x1_fwd", "channel", weight.size(), s.c);
  Tensor out(Shape{s.n, 1, s.h, s.w});
  const std::size_t plane = s.plane();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < sz(s.n); ++n) {
    float* o = out.ptr() + n * sz(plane);
    for (std::size_t ch = 0; ch < s.c; ++ch) {
      const float wv = weight[ch];
      const float* xi = x.ptr() + (n * sz(s.c) + sz(ch)) * sz(plane);
      for (std::size_t k = 0; k < plane; ++k) o[k] += wv * xi[k];
    }
  }
  return out;
}

Conv1x1Grads conv1x1_bwd(const Tensor& x, std::span<const float> weight, const Tensor& grad_out) {
  const Shape s = x.shape();
  require_extent("conv1x1_bwd", "channel", weight.size(), s.c);
  const Shape gs = grad_out.shape();
  require_extent("conv1x1_bwd", "batch", gs.n, s.n);
  require_extent("conv1x1_bwd", "out_channel", gs.c, 1);
  require_extent("conv1x1_bwd", "height", gs.h, s.h);
  require_extent("conv1x1_bwd", "width", gs.w, s.w);
  const std::size_t plane = s.plane();
  Conv1x1Grads g{Tensor(s), std::vector<float>(s.c, 0.0f)};
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ch = 0; ch < sz(s.c); ++ch) {
    float acc = 0.0f;
    const float wv = weight[ch];
    for (std::size_t n = 0; n < s.n; ++n) {
      const float* go = grad_out.ptr() + n * plane;
      const std::size_t base = (n * s.c + ch) * plane;
      const float* xi = x.ptr() + base;
      float* gx = g.grad_x.ptr() + base;
      for (std::size_t k = 0; k < plane; ++k) {
        gx[k] = wv * go[k];
        acc += xi[k] * go[k];
      }
    }
    g.grad_weight[ch] = acc;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Linear

Tensor linear_fwd(const Tensor& x, const Tensor& weight) {
  const std::size_t rows = x.shape().n, in = x.shape().sample();
  const std::size_t out = weight.shape().n;
  require_extent("linear_fwd", "in_features", weight.shape().sample(), in);
  Tensor y = Tensor::matrix(rows, out);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < sz(rows); ++r) {
    const float* xr = x.ptr() + r * sz(in);
    for (std::size_t o = 0; o < out; ++o) {
      const float* wr = weight.ptr() + o * in;
      float acc = 0.0f;
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
      y[r * out + o] = acc;
    }
  }
  return y;
}

LinearGrads linear_bwd(const Tensor& x, const Tensor& weight, const Tensor& grad_out) {
  const std::size_t rows = x.shape().n, in = x.shape().sample();
  const std::size_t out = weight.shape().n;
  require_extent("linear_bwd", "in_features", weight.shape().sample(), in);
  require_extent("linear_bwd", "batch", grad_out.shape().n, rows);
  require_extent("linear_bwd", "out_features", grad_out.shape().sample(), out);
  LinearGrads g{Tensor(x.shape()), Tensor(weight.shape())};
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < sz(rows); ++r) {
    float* gx = g.grad_x.ptr() + r * sz(in);
    for (std::size_t o = 0; o < out; ++o) {
      const float go = grad_out[r * out + o];
      const float* wr = weight.ptr() + o * in;
      for (std::size_t i = 0; i < in; ++i) gx[i] += go * wr[i];
    }
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < sz(out); ++o) {
    float* gw = g.grad_weight.ptr() + o * sz(in);
    for (std::size_t r = 0; r < rows; ++r) {
      const float go = grad_out[r * out + o];
      const float* xr = x.ptr() + r * in;
      for (std::size_t i = 0; i < in; ++i) gw[i] += go * xr[i];
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Softmax

Tensor softmax_fwd(const Tensor& logits) {
  check_finite(logits, "softmax_fwd");
  return reference::softmax(logits);
}

Tensor softmax_bwd(const Tensor& probs, const Tensor& grad_out) {
  if (probs.shape() != grad_out.shape()) {
    throw DimensionError("softmax_bwd: grad_out shape " + grad_out.shape().str() + " != probs shape " +
                         probs.shape().str());
  }
  const std::size_t rows = probs.shape().n, p = probs.shape().sample();
  Tensor g(probs.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    float dot = 0.0f;
    for (std::size_t i = 0; i < p; ++i) dot += grad_out[r * p + i] * probs[r * p + i];
    for (std::size_t i = 0; i < p; ++i) g[r * p + i] = probs[r * p + i] * (grad_out[r * p + i] - dot);
  }
  return g;
}

// ---------------------------------------------------------------------------
// 3x3 convolution

std::size_t conv3x3_out_extent(std::size_t in, int stride) {
  return (in - 1) / static_cast<std::size_t>(stride) + 1;
}

Tensor conv3x3_fwd(const Tensor& x, const Tensor& weight, int stride) {
  check_stride(stride);
  const Shape s = x.shape();
  const Shape ws = weight.shape();
  require_extent("conv3x3_fwd", "in_channel", ws.c, s.c);
  require_extent("conv3x3_fwd", "kernel_h", ws.h, 3);
  require_extent("conv3x3_fwd", "kernel_w", ws.w, 3);
  const ConvGeom g = make_geom(s.h, s.w, stride);
  const std::size_t oc_n = ws.n;
  const std::size_t packed_len = g.nplanes * g.plane_len;

  std::vector<float> packed(s.n * s.c * packed_len, 0.0f);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < sz(s.n * s.c); ++k) {
    pack_input(g, x.ptr() + k * sz(s.plane()), packed.data() + k * sz(packed_len));
  }

  Tensor out(Shape{s.n, oc_n, g.oh, g.ow});
#pragma omp parallel
  {
    std::vector<float> acc(g.acc_len);
#pragma omp for collapse(2) schedule(static)
    for (std::ptrdiff_t n = 0; n < sz(s.n); ++n) {
      for (std::ptrdiff_t oc = 0; oc < sz(oc_n); ++oc) {
        std::fill(acc.begin(), acc.end(), 0.0f);
        float* a = acc.data();
        for (std::size_t ic = 0; ic < s.c; ++ic) {
          const float* base = packed.data() + (n * sz(s.c) + sz(ic)) * sz(packed_len);
          const float* wt = weight.ptr() + (oc * sz(s.c) + sz(ic)) * 9;
          const float* src[9];
          for (std::size_t t = 0; t < 9; ++t) src[t] = base + g.tap_plane[t] * g.plane_len + g.tap_off[t];
          const float w0 = wt[0], w1 = wt[1], w2 = wt[2], w3 = wt[3], w4 = wt[4], w5 = wt[5], w6 = wt[6],
                      w7 = wt[7], w8 = wt[8];
          const float *s0 = src[0], *s1 = src[1], *s2 = src[2], *s3 = src[3], *s4 = src[4], *s5 = src[5],
                      *s6 = src[6], *s7 = src[7], *s8 = src[8];
          for (std::size_t j = 0; j < g.acc_len; ++j) {
            float v = a[j];
            v += w0 * s0[j];
            v += w1 * s1[j];
            v += w2 * s2[j];
            v += w3 * s3[j];
            v += w4 * s4[j];
            v += w5 * s5[j];
            v += w6 * s6[j];
            v += w7 * s7[j];
            v += w8 * s8[j];
            a[j] = v;
          }
        }
        float* o = out.ptr() + (n * sz(oc_n) + oc) * sz(g.oh * g.ow);
        for (std::size_t oy = 0; oy < g.oh; ++oy)
          for (std::size_t ox = 0; ox < g.ow; ++ox) o[oy * g.ow + ox] = a[oy * g.pitch + ox];
      }
    }
  }
  return out;
}

namespace {

// grad_x by gathering from a zero-bordered copy of grad_out. For stride 1 the
// result plane is one flat accumulator; for stride 2 each (row, column)
// parity phase of the padded input receives contributions from a fixed
// subset of taps and is accumulated separately.
Tensor conv3x3_grad_input(const Shape& s, const Tensor& weight, const Tensor& grad_out, int stride) {
  const Shape ws = weight.shape();
  const ConvGeom g = make_geom(s.h, s.w, stride);
  const std::size_t oc_n = ws.n;
  const std::size_t gpitch = g.pitch;  // w + 2 (stride 1) or ow + 1 (stride 2)
  const std::size_t gplane = (g.oh + 2) * gpitch + kSlack;

  std::vector<float> gop(s.n * oc_n * gplane, 0.0f);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < sz(s.n * oc_n); ++k) {
    const float* src = grad_out.ptr() + k * sz(g.oh * g.ow);
    float* dst = gop.data() + k * sz(gplane);
    for (std::size_t oy = 0; oy < g.oh; ++oy)
      for (std::size_t ox = 0; ox < g.ow; ++ox) dst[(oy + 1) * gpitch + ox + 1] = src[oy * g.ow + ox];
  }

  // Per phase: which taps feed it and where each tap reads in `gop`.
  struct Phase {
    std::size_t ntaps = 0;
    std::array<std::size_t, 9> tap{};
    std::array<std::size_t, 9> off{};
    std::size_t len = 0;
  };
  std::vector<Phase> phases;
  if (stride == 1) {
    Phase ph;
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) {
        ph.tap[ph.ntaps] = ky * 3 + kx;
        ph.off[ph.ntaps] = (2 - ky) * gpitch + (2 - kx);
        ++ph.ntaps;
      }
    ph.len = s.h * gpitch;
    phases.push_back(ph);
  } else {
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b) {
        Phase ph;
        for (std::size_t ky = a; ky < 3; ky += 2)
          for (std::size_t kx = b; kx < 3; kx += 2) {
            ph.tap[ph.ntaps] = ky * 3 + kx;
            ph.off[ph.ntaps] = (1 - ky / 2) * gpitch + (1 - kx / 2);
            ++ph.ntaps;
          }
        ph.len = (g.oh + 1) * gpitch;
        phases.push_back(ph);
      }
  }

  Tensor gx(s);
#pragma omp parallel
  {
    std::vector<float> acc;
#pragma omp for collapse(2) schedule(static)
    for (std::ptrdiff_t n = 0; n < sz(s.n); ++n) {
      for (std::ptrdiff_t ic = 0; ic < sz(s.c); ++ic) {
        float* dst = gx.ptr() + (n * sz(s.c) + ic) * sz(s.plane());
        for (std::size_t p = 0; p < phases.size(); ++p) {
          const Phase& ph = phases[p];
          acc.assign(ph.len, 0.0f);
          float* a = acc.data();
          for (std::size_t oc = 0; oc < oc_n; ++oc) {
            const float* base = gop.data() + (n * sz(oc_n) + sz(oc)) * sz(gplane);
            const float* wt = weight.ptr() + (oc * s.c + ic) * 9;
            if (ph.ntaps == 9) {
              const float w0 = wt[ph.tap[0]], w1 = wt[ph.tap[1]], w2 = wt[ph.tap[2]], w3 = wt[ph.tap[3]],
                          w4 = wt[ph.tap[4]], w5 = wt[ph.tap[5]], w6 = wt[ph.tap[6]], w7 = wt[ph.tap[7]],
                          w8 = wt[ph.tap[8]];
              const float *s0 = base + ph.off[0], *s1 = base + ph.off[1], *s2 = base + ph.off[2],
                          *s3 = base + ph.off[3], *s4 = base + ph.off[4], *s5 = base + ph.off[5],
                          *s6 = base + ph.off[6], *s7 = base + ph.off[7], *s8 = base + ph.off[8];
              for (std::size_t j = 0; j < ph.len; ++j) {
                float v = a[j];
                v += w0 * s0[j];
                v += w1 * s1[j];
                v += w2 * s2[j];
                v += w3 * s3[j];
                v += w4 * s4[j];
                v += w5 * s5[j];
                v += w6 * s6[j];
                v += w7 * s7[j];
                v += w8 * s8[j];
                a[j] = v;
              }
            } else {
              for (std::size_t t = 0; t < ph.ntaps; ++t) {
                const float wv = wt[ph.tap[t]];
                const float* src = base + ph.off[t];
                for (std::size_t j = 0; j < ph.len; ++j) a[j] += wv * src[j];
              }
            }
          }
          if (stride == 1) {
            for (std::size_t iy = 0; iy < s.h; ++iy)
              for (std::size_t ix = 0; ix < s.w; ++ix) dst[iy * s.w + ix] = a[iy * gpitch + ix];
          } else {
            const std::size_t pa = p / 2, pb = p % 2;
            // padded row pr = iy + 1 has parity pa, so iy = 2r + pa - 1.
            for (std::size_t r = 0; r <= g.oh; ++r) {
              const std::ptrdiff_t iy = sz(2 * r + pa) - 1;
              if (iy < 0 || iy >= sz(s.h)) continue;
              for (std::size_t c = 0; c <= g.ow; ++c) {
                const std::ptrdiff_t ix = sz(2 * c + pb) - 1;
                if (ix < 0 || ix >= sz(s.w)) continue;
                dst[iy * sz(s.w) + ix] = a[r * gpitch + c];
              }
            }
          }
        }
      }
    }
  }
  return gx;
}

// grad_weight as nine dot products per (oc, ic), each summed in kLanes
// independent partial sums over (n, flat position) and then reduced in lane
// order.
Tensor conv3x3_grad_weight(const Tensor& x, const Shape& wshape, const Tensor& grad_out, int stride) {
  const Shape s = x.shape();
  const ConvGeom g = make_geom(s.h, s.w, stride);
  const std::size_t oc_n = wshape.n;
  const std::size_t packed_len = g.nplanes * g.plane_len;

  std::vector<float> packed(s.n * s.c * packed_len, 0.0f);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < sz(s.n * s.c); ++k) {
    pack_input(g, x.ptr() + k * sz(s.plane()), packed.data() + k * sz(packed_len));
  }
  std::vector<float> gow(s.n * oc_n * g.lane_len, 0.0f);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < sz(s.n * oc_n); ++k) {
    const float* src = grad_out.ptr() + k * sz(g.oh * g.ow);
    float* dst = gow.data() + k * sz(g.lane_len);
    for (std::size_t oy = 0; oy < g.oh; ++oy)
      for (std::size_t ox = 0; ox < g.ow; ++ox) dst[oy * g.pitch + ox] = src[oy * g.ow + ox];
  }

  Tensor gw(wshape);
#pragma omp parallel for collapse(2) schedule(static)
  for (std::ptrdiff_t oc = 0; oc < sz(oc_n); ++oc) {
    for (std::ptrdiff_t ic = 0; ic < sz(s.c); ++ic) {
      alignas(64) float acc[9][kLanes] = {};
      for (std::size_t n = 0; n < s.n; ++n) {
        const float* go = gow.data() + (n * oc_n + oc) * g.lane_len;
        const float* base = packed.data() + (n * s.c + ic) * packed_len;
        for (std::size_t t = 0; t < 9; ++t) {
          const float* src = base + g.tap_plane[t] * g.plane_len + g.tap_off[t];
          float* at = acc[t];
          for (std::size_t j0 = 0; j0 < g.lane_len; j0 += kLanes) {
            for (std::size_t l = 0; l < kLanes; ++l) at[l] += go[j0 + l] * src[j0 + l];
          }
        }
      }
      float* dst = gw.ptr() + (oc * sz(s.c) + ic) * 9;
      for (std::size_t t = 0; t < 9; ++t) {
        float sum = 0.0f;
        for (std::size_t l = 0; l < kLanes; ++l) sum += acc[t][l];
        dst[t] = sum;
      }
    }
  }
  return gw;
}

}  // namespace

Conv3x3Grads conv3x3_bwd(const Tensor& x, const Tensor& weight, const Tensor& grad_out, int stride,
                         bool want_grad_x) {
  check_stride(stride);
  const Shape s = x.shape();
  const Shape ws = weight.shape();
  require_extent("conv3x3_bwd", "in_channel", ws.c, s.c);
  require_extent("conv3x3_bwd", "kernel_h", ws.h, 3);
  require_extent("conv3x3_bwd", "kernel_w", ws.w, 3);
  const Shape gs = grad_out.shape();
  require_extent("conv3x3_bwd", "batch", gs.n, s.n);
  require_extent("conv3x3_bwd", "out_channel", gs.c, ws.n);
  require_extent("conv3x3_bwd", "height", gs.h, conv3x3_out_extent(s.h, stride));
  require_extent("conv3x3_bwd", "width", gs.w, conv3x3_out_extent(s.w, stride));
  Conv3x3Grads g;
  if (want_grad_x) g.grad_x = conv3x3_grad_input(s, weight, grad_out, stride);
  g.grad_weight = conv3x3_grad_weight(x, ws, grad_out, stride);
  return g;
}

// ---------------------------------------------------------------------------
// Elementwise, pooling, loss, dropout

Tensor relu_fwd(const Tensor& x) {
  Tensor y(x.shape());
  const float* xi = x.ptr();
  float* yo = y.ptr();
  for (std::size_t i = 0; i < x.size(); ++i) yo[i] = xi[i] > 0.0f ? xi[i] : 0.0f;
  return y;
}

Tensor relu_bwd(const Tensor& x, const Tensor& grad_out) {
  if (x.shape() != grad_out.shape()) throw DimensionError("relu_bwd: shape mismatch " + x.shape().str() + " vs " + grad_out.shape().str());
  Tensor g(x.shape());
  const float* xi = x.ptr();
  const float* go = grad_out.ptr();
  float* gi = g.ptr();
  for (std::size_t i = 0; i < x.size(); ++i) gi[i] = xi[i] > 0.0f ? go[i] : 0.0f;
  return g;
}

Tensor global_avgpool_fwd(const Tensor& x) { return reference::global_avgpool(x); }

Tensor global_avgpool_bwd(const Shape& input, const Tensor& grad_out) {
  require_extent("global_avgpool_bwd", "batch", grad_out.shape().n, input.n);
  require_extent("global_avgpool_bwd", "channel", grad_out.shape().sample(), input.c);
  Tensor g(input);
  const std::size_t plane = input.plane();
  const float scale = 1.0f / static_cast<float>(plane);
  for (std::size_t k = 0; k < input.n * input.c; ++k) {
    const float v = grad_out[k] * scale;
    std::fill_n(g.ptr() + k * plane, plane, v);
  }
  return g;
}

namespace {
void check_labels(const Tensor& logits, std::span<const int> labels, const char* op) {
  require_extent(op, "batch", labels.size(), logits.shape().n);
  const auto k = static_cast<int>(logits.shape().sample());
  for (int l : labels) {
    if (l < 0 || l >= k) throw DimensionError(std::string(op) + ": label " + std::to_string(l) + " outside [0, " + std::to_string(k) + ")");
  }
}
}  // namespace

float cross_entropy_fwd(const Tensor& logits, std::span<const int> labels) {
  check_labels(logits, labels, "cross_entropy_fwd");
  check_finite(logits, "cross_entropy_fwd");
  return reference::cross_entropy(logits, labels);
}

Tensor cross_entropy_bwd(const Tensor& logits, std::span<const int> labels) {
  check_labels(logits, labels, "cross_entropy_bwd");
  Tensor g = softmax_fwd(logits);
  const std::size_t rows = logits.shape().n, k = logits.shape().sample();
  const float inv = 1.0f / static_cast<float>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    g[r * k + static_cast<std::size_t>(labels[r])] -= 1.0f;
    for (std::size_t i = 0; i < k; ++i) g[r * k + i] *= inv;
  }
  return g;
}

Tensor add_fwd(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw DimensionError("add_fwd: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  Tensor y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  return y;
}

Tensor flatten(const Tensor& x) { return x.reshaped(Shape{x.shape().n, x.shape().sample(), 1, 1}); }

void check_dropout_p(float p) {
  if (!(p >= 0.0f && p < 1.0f)) throw ConfigError("dropout_p must lie in [0, 1), got " + std::to_string(p));
}

Tensor dropout_mask(const Shape& input, DropoutKind kind, float p, Rng& rng) {
  check_dropout_p(p);
  const float keep = 1.0f / (1.0f - p);
  Tensor mask = kind == DropoutKind::channel ? Tensor(Shape{input.n, input.c, 1, 1}) : Tensor(input);
  if (kind == DropoutKind::none) {
    mask.fill(1.0f);
    return mask;
  }
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform() < p ? 0.0f : keep;
  return mask;
}

Tensor dropout_mask_apply(const Tensor& x, const Tensor& mask) {
  const Shape s = x.shape();
  const bool per_channel = mask.shape() == Shape{s.n, s.c, 1, 1};
  if (!per_channel && mask.shape() != s) {
    throw DimensionError("dropout_mask_apply: mask shape " + mask.shape().str() + " fits neither " + s.str() +
                         " nor its channel layout");
  }
  if (!per_channel) return reference::apply_mask(x, mask);
  Tensor y(s);
  const std::size_t plane = s.plane();
  for (std::size_t k = 0; k < s.n * s.c; ++k) {
    const float m = mask[k];
    const float* xi = x.ptr() + k * plane;
    float* yo = y.ptr() + k * plane;
    for (std::size_t j = 0; j < plane; ++j) yo[j] = xi[j] * m;
  }
  return y;
}

}  // namespace srkit::ops
