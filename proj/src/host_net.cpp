#include "srkit/host_net.hpp"

#include <cmath>

namespace srkit {

Shape HostConfig::stage_shape(int stage) const {
  if (stage < 1 || stage > 4) throw ConfigError("stage index must be in 1..4, got " + std::to_string(stage));
  std::size_t h = in_h, w = in_w;
  for (int k = 0; k < stage; ++k) {
    h = ops::conv3x3_out_extent(h, kStageStrides[k]);
    w = ops::conv3x3_out_extent(w, kStageStrides[k]);
  }
  return Shape{1, stage_channels[stage - 1], h, w};
}

SRConfig HostConfig::resolved_sr() const {
  if (!sr_insert) throw UsageError("resolved_sr: host has no SR insertion point");
  const Shape s = stage_shape(*sr_insert);
  SRConfig out = sr;
  out.c = s.c;
  out.h = s.h;
  out.w = s.w;
  return out;
}

void HostConfig::validate() const {
  for (std::size_t k = 0; k < 4; ++k) {
    if (stage_channels[k] < 1) throw ConfigError("stage_channels entries must be >= 1");
  }
  if (in_c < 1 || in_h < 1 || in_w < 1) throw ConfigError("input extents must be >= 1");
  if (classes < 1) throw ConfigError("classes must be >= 1");
  ops::check_dropout_p(dropout_p);
  if (sr_insert) {
    if (*sr_insert < 1 || *sr_insert > 4) {
      throw ConfigError("sr_insert must be in 1..4, got " + std::to_string(*sr_insert));
    }
    resolved_sr().validate();
  }
}

std::size_t HostParams::scalar_count() const {
  std::size_t total = 0;
  for_each_tensor(*this, [&](const std::string&, const Tensor& t) { total += t.size(); });
  return total;
}

void for_each_tensor(HostParams& params, const std::function<void(const std::string&, Tensor&)>& fn) {
  for (std::size_t k = 0; k < 4; ++k) fn("conv" + std::to_string(k + 1), params.conv[k]);
  fn("classifier", params.classifier);
  if (params.sr) {
    fn("sr.squeeze", params.sr->squeeze);
    fn("sr.fc1", params.sr->fc1);
    fn("sr.fc2", params.sr->fc2);
    fn("sr.memory", params.sr->memory);
  }
}

void for_each_tensor(const HostParams& params, const std::function<void(const std::string&, const Tensor&)>& fn) {
  for_each_tensor(const_cast<HostParams&>(params), [&](const std::string& name, Tensor& t) { fn(name, t); });
}

HostParams zeros_like(const HostParams& params) {
  HostParams z = params;
  for_each_tensor(z, [](const std::string&, Tensor& t) { t.fill(0.0f); });
  return z;
}

HostParams host_init(const HostConfig& cfg, Rng& rng) {
  cfg.validate();
  HostParams hp;
  std::size_t in = cfg.in_c;
  for (std::size_t k = 0; k < 4; ++k) {
    const std::size_t out = cfg.stage_channels[k];
    hp.conv[k] = Tensor(Shape{out, in, 3, 3});
    const float bound = std::sqrt(6.0f / static_cast<float>(in * 9));
    for (float& v : hp.conv[k].data()) v = rng.symmetric(bound);
    in = out;
  }
  hp.classifier = Tensor::matrix(cfg.classes, in);
  const float bound = std::sqrt(6.0f / static_cast<float>(in));
  for (float& v : hp.classifier.data()) v = rng.symmetric(bound);
  if (cfg.sr_insert) hp.sr = sr_init(cfg.resolved_sr(), rng);
  return hp;
}

std::size_t host_param_count(const HostConfig& cfg) {
  std::size_t total = 0;
  std::size_t in = cfg.in_c;
  for (std::size_t k = 0; k < 4; ++k) {
    total += cfg.stage_channels[k] * in * 9;
    in = cfg.stage_channels[k];
  }
  total += cfg.classes * in;
  if (cfg.sr_insert) total += sr_param_count(cfg.resolved_sr());
  return total;
}

namespace {
bool has_dropout(const HostConfig& cfg, std::size_t stage_idx) {
  return cfg.dropout_kind != ops::DropoutKind::none && stage_idx >= 2;
}

void check_params(const HostConfig& cfg, const HostParams& params) {
  if (cfg.sr_insert.has_value() != params.sr.has_value()) {
    throw ConfigError("host config and parameters disagree on the presence of an SR block");
  }
}
}  // namespace

Tensor host_forward(const HostConfig& cfg, const HostParams& params, const Tensor& x, Mode mode, Rng& rng,
                    HostCache* cache) {
  check_params(cfg, params);
  require_extent("host_forward", "channel", x.shape().c, cfg.in_c);
  require_extent("host_forward", "height", x.shape().h, cfg.in_h);
  require_extent("host_forward", "width", x.shape().w, cfg.in_w);

  Tensor act = x;
  for (std::size_t k = 0; k < 4; ++k) {
    StageCache sc;
    Tensor pre = ops::conv3x3_fwd(act, params.conv[k], kStageStrides[k]);
    Tensor out = ops::relu_fwd(pre);
    if (mode == Mode::train && has_dropout(cfg, k)) {
      sc.mask = ops::dropout_mask(out.shape(), cfg.dropout_kind, cfg.dropout_p, rng);
      out = ops::dropout_mask_apply(out, sc.mask);
    }
    if (cfg.sr_insert && static_cast<std::size_t>(*cfg.sr_insert) == k + 1) {
      if (cache) cache->sr_input = out;
      out = sr_forward(*params.sr, out, cache ? &cache->sr : nullptr);
    }
    if (cache) {
      sc.input = std::move(act);
      sc.preact = std::move(pre);
      sc.output = out;
      cache->stages[k] = std::move(sc);
    }
    act = std::move(out);
  }
  Tensor pooled = ops::global_avgpool_fwd(act);
  Tensor logits = ops::linear_fwd(pooled, params.classifier);
  if (cache) {
    cache->mode = mode;
    cache->pooled = std::move(pooled);
    cache->logits = logits;
    cache->valid = true;
  }
  return logits;
}

HostGrads host_backward(const HostConfig& cfg, const HostParams& params, const HostCache& cache,
                        std::span<const int> labels) {
  check_params(cfg, params);
  if (!cache.valid) throw UsageError("host_backward: cache was not filled by host_forward");
  if (cache.mode != Mode::train) throw UsageError("host_backward: cache comes from an eval-mode forward pass");

  HostGrads hg;
  hg.grads = zeros_like(params);
  hg.loss = ops::cross_entropy_fwd(cache.logits, labels);
  const Tensor grad_logits = ops::cross_entropy_bwd(cache.logits, labels);
  ops::LinearGrads head = ops::linear_bwd(cache.pooled, params.classifier, grad_logits);
  hg.grads.classifier = std::move(head.grad_weight);
  Tensor grad = ops::global_avgpool_bwd(cache.stages[3].output.shape(), head.grad_x);

  for (std::size_t k = 4; k-- > 0;) {
    const StageCache& sc = cache.stages[k];
    if (cfg.sr_insert && static_cast<std::size_t>(*cfg.sr_insert) == k + 1) {
      SRGrads sg = sr_backward(*params.sr, cache.sr, grad);
      hg.grads.sr = std::move(sg.params);
      grad = std::move(sg.grad_x);
    }
    if (!sc.mask.empty()) grad = ops::dropout_mask_apply(grad, sc.mask);
    grad = ops::relu_bwd(sc.preact, grad);
    ops::Conv3x3Grads cg = ops::conv3x3_bwd(sc.input, params.conv[k], grad, kStageStrides[k], k > 0);
    hg.grads.conv[k] = std::move(cg.grad_weight);
    grad = std::move(cg.grad_x);
  }
  return hg;
}

std::vector<int> predict(const Tensor& logits) {
  const std::size_t rows = logits.shape().n, k = logits.shape().sample();
  std::vector<int> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < k; ++i) {
      if (logits[r * k + i] > logits[r * k + best]) best = i;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

}  // namespace srkit
