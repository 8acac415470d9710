#include "srkit/sr_block.hpp"

#include <cmath>
#include <string>

#include "srkit/kernels.hpp"

namespace srkit {

namespace {
std::ptrdiff_t sz(std::size_t v) { return static_cast<std::ptrdiff_t>(v); }

void check_input(const SRConfig& cfg, const Tensor& x, const char* op) {
  const Shape s = x.shape();
  require_extent(op, "channel", s.c, cfg.c);
  require_extent(op, "height", s.h, cfg.h);
  require_extent(op, "width", s.w, cfg.w);
}
}  // namespace

void SRConfig::validate() const {
  if (c < 1 || h < 1 || w < 1 || u < 1 || p < 1) {
    throw ConfigError("sr: c, h, w, u, p must all be >= 1");
  }
  if (!outside_grid_ok) {
    if (u != 8 && u != 16 && u != 32) throw ConfigError("sr: u must be 8, 16 or 32, got " + std::to_string(u));
    if (p < 2 || p > 20) throw ConfigError("sr: p must lie in [2, 20], got " + std::to_string(p));
  }
}

SRParams SRParams::zeros(const SRConfig& cfg) {
  SRParams sp;
  sp.cfg = cfg;
  sp.squeeze = Tensor(Shape{1, cfg.c, 1, 1});
  sp.fc1 = Tensor::matrix(cfg.u, cfg.h * cfg.w);
  sp.fc2 = Tensor::matrix(cfg.p, cfg.u);
  sp.memory = Tensor(Shape{cfg.p, cfg.c, cfg.h, cfg.w});
  return sp;
}

std::size_t SRParams::scalar_count() const { return squeeze.size() + fc1.size() + fc2.size() + memory.size(); }

SRParams sr_init(const SRConfig& cfg, Rng& rng) {
  cfg.validate();
  SRParams sp = SRParams::zeros(cfg);
  const float bound = std::sqrt(1.0f / static_cast<float>(cfg.c));
  for (Tensor* t : {&sp.squeeze, &sp.fc1, &sp.fc2}) {
    for (float& v : t->data()) v = rng.symmetric(bound);
  }
  return sp;
}

Tensor sr_recall_map(const SRParams& params, const Tensor& alpha) {
  const SRConfig& cfg = params.cfg;
  const std::size_t n = alpha.shape().n;
  require_extent("sr_recall_map", "memory_block", alpha.shape().sample(), cfg.p);
  const std::size_t sample = cfg.c * cfg.h * cfg.w;
  Tensor recall(Shape{n, cfg.c, cfg.h, cfg.w});
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < sz(n); ++b) {
    float* r = recall.ptr() + b * sz(sample);
    for (std::size_t i = 0; i < cfg.p; ++i) {
      const float a = alpha[b * cfg.p + i];
      const float* m = params.memory.ptr() + i * sample;
      for (std::size_t k = 0; k < sample; ++k) r[k] += a * m[k];
    }
  }
  return recall;
}

namespace {
struct Weighting {
  Tensor squeezed, hidden_pre, hidden, alpha;
};

Weighting weighting(const SRParams& params, const Tensor& x) {
  Weighting wt;
  wt.squeezed = ops::conv1x1_fwd(x, params.squeeze.data());
  wt.hidden_pre = ops::linear_fwd(wt.squeezed, params.fc1);
  wt.hidden = params.cfg.hidden_relu ? ops::relu_fwd(wt.hidden_pre) : wt.hidden_pre;
  wt.alpha = ops::softmax_fwd(ops::linear_fwd(wt.hidden, params.fc2));
  return wt;
}
}  // namespace

Tensor sr_alpha(const SRParams& params, const Tensor& x) {
  check_input(params.cfg, x, "sr_alpha");
  return weighting(params, x).alpha;
}

Tensor sr_forward(const SRParams& params, const Tensor& x, SRForwardCache* cache) {
  check_input(params.cfg, x, "sr_forward");
  Weighting wt = weighting(params, x);
  Tensor out = sr_recall_map(params, wt.alpha);
  float* o = out.ptr();
  const float* xi = x.ptr();
  for (std::size_t k = 0; k < out.size(); ++k) {
    // A zero recall leaves x untouched, signed zeros included.
    o[k] = o[k] == 0.0f ? xi[k] : xi[k] + o[k];
  }
  if (cache != nullptr) {
    cache->input = x;
    cache->squeezed = std::move(wt.squeezed);
    cache->hidden_pre = std::move(wt.hidden_pre);
    cache->hidden = std::move(wt.hidden);
    cache->alpha = std::move(wt.alpha);
    cache->valid = true;
  }
  return out;
}

SRGrads sr_backward(const SRParams& params, const SRForwardCache& cache, const Tensor& grad_out) {
  const SRConfig& cfg = params.cfg;
  if (!cache.valid) throw UsageError("sr_backward: cache was not filled by sr_forward");
  if (cache.input.shape().c != cfg.c || cache.input.shape().h != cfg.h || cache.input.shape().w != cfg.w ||
      cache.alpha.shape().sample() != cfg.p || cache.hidden.shape().sample() != cfg.u) {
    throw UsageError("sr_backward: cache does not belong to these parameters");
  }
  if (grad_out.shape() != cache.input.shape()) {
    throw DimensionError("sr_backward: grad_out shape " + grad_out.shape().str() + " != input shape " +
                         cache.input.shape().str());
  }
  const std::size_t n = grad_out.shape().n;
  const std::size_t sample = cfg.c * cfg.h * cfg.w;

  SRGrads g;
  g.params = SRParams::zeros(cfg);

  // memory: d out / d M_i = alpha_i at fixed alpha.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < sz(cfg.p); ++i) {
    float* gm = g.params.memory.ptr() + i * sz(sample);
    for (std::size_t b = 0; b < n; ++b) {
      const float a = cache.alpha[b * cfg.p + i];
      const float* go = grad_out.ptr() + b * sample;
      for (std::size_t k = 0; k < sample; ++k) gm[k] += a * go[k];
    }
  }

  // alpha: <M_i, grad_out[b]>
  g.grad_alpha = Tensor::matrix(n, cfg.p);
#pragma omp parallel for collapse(2) schedule(static)
  for (std::ptrdiff_t b = 0; b < sz(n); ++b) {
    for (std::ptrdiff_t i = 0; i < sz(cfg.p); ++i) {
      const float* m = params.memory.ptr() + i * sz(sample);
      const float* go = grad_out.ptr() + b * sz(sample);
      float acc = 0.0f;
      for (std::size_t k = 0; k < sample; ++k) acc += m[k] * go[k];
      g.grad_alpha[b * cfg.p + i] = acc;
    }
  }

  const Tensor grad_logits = ops::softmax_bwd(cache.alpha, g.grad_alpha);
  ops::LinearGrads l2 = ops::linear_bwd(cache.hidden, params.fc2, grad_logits);
  g.params.fc2 = std::move(l2.grad_weight);
  const Tensor grad_hidden_pre = cfg.hidden_relu ? ops::relu_bwd(cache.hidden_pre, l2.grad_x) : l2.grad_x;
  ops::LinearGrads l1 = ops::linear_bwd(cache.squeezed, params.fc1, grad_hidden_pre);
  g.params.fc1 = std::move(l1.grad_weight);
  ops::Conv1x1Grads sq = ops::conv1x1_bwd(cache.input, params.squeeze.data(), l1.grad_x);
  std::copy(sq.grad_weight.begin(), sq.grad_weight.end(), g.params.squeeze.ptr());

  g.grad_x = std::move(sq.grad_x);
  float* gx = g.grad_x.ptr();
  const float* go = grad_out.ptr();
  for (std::size_t k = 0; k < g.grad_x.size(); ++k) gx[k] = go[k] + gx[k];
  return g;
}

std::size_t sr_param_count(const SRConfig& cfg) {
  return cfg.c + cfg.h * cfg.w * cfg.u + cfg.u * cfg.p + cfg.p * cfg.c * cfg.h * cfg.w;
}

double sr_overhead_exact(const SRConfig& cfg, std::size_t baseline_params) {
  if (baseline_params == 0) throw ConfigError("sr_overhead: baseline parameter count must be > 0");
  return 100.0 * static_cast<double>(sr_param_count(cfg)) / static_cast<double>(baseline_params);
}

double sr_overhead(const SRConfig& cfg, std::size_t baseline_params) {
  return std::round(sr_overhead_exact(cfg, baseline_params) * 100.0) / 100.0;
}

SRParams sr_ablate(const SRParams& params) {
  SRParams out = params;
  out.memory.fill(0.0f);
  return out;
}

}  // namespace srkit
