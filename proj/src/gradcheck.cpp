#include "srkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "srkit/host_net.hpp"
#include "srkit/kernels.hpp"
#include "srkit/reference.hpp"
#include "srkit/sr_block.hpp"

namespace srkit {

namespace {

constexpr double kMinStep = 1e-9;

using Pattern = std::vector<std::uint8_t>;
using Oracle = std::function<double(const std::vector<TensorD>&, Pattern*)>;

Tensor random_tensor(const Shape& s, Rng& rng) {
  Tensor t(s);
  for (float& v : t.data()) v = rng.symmetric(1.0f);
  return t;
}

TensorD as_double(const Tensor& t) { return tensor_cast<double>(t); }

double weighted_sum(const TensorD& y, const TensorD& r) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * r[i];
  return acc;
}

void record_signs(const TensorD& pre, Pattern* pattern) {
  if (!pattern) return;
  for (double v : pre.data()) pattern->push_back(v > 0.0 ? 1 : 0);
}

void check_case(GradcheckEntry& entry, const std::vector<Tensor>& inputs, const Oracle& f,
                const std::vector<Tensor>& analytic) {
  std::vector<TensorD> in;
  for (const auto& t : inputs) in.push_back(as_double(t));
  Pattern base;
  f(in, &base);
  for (std::size_t t = 0; t < in.size(); ++t) {
    require_extent("gradcheck", "gradient", analytic[t].size(), in[t].size());
    for (std::size_t j = 0; j < in[t].size(); ++j) {
      const double x0 = in[t][j];
      bool found = false;
      double fd = 0.0;
      for (double h = kGradcheckStep; h >= kMinStep; h /= 10.0) {
        Pattern pp, pm;
        in[t][j] = x0 + h;
        const double fp = f(in, &pp);
        in[t][j] = x0 - h;
        const double fm = f(in, &pm);
        in[t][j] = x0;
        if (pp == base && pm == base) {
          fd = (fp - fm) / (2.0 * h);
          found = true;
          break;
        }
      }
      if (!found) {
        ++entry.skipped;
        continue;
      }
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(analytic[t][j], fd));
      ++entry.checked;
    }
  }
}

struct Dims {
  Shape x;           // primitive input
  std::size_t cout;  // conv3x3 / linear outputs
};

Dims dims_for(GradcheckSize size) {
  return size == GradcheckSize::micro ? Dims{Shape{2, 3, 4, 4}, 4} : Dims{Shape{2, 4, 8, 8}, 6};
}

// ---- SR block in double ---------------------------------------------------

TensorD sr_forward_d(const SRConfig& cfg, const TensorD& x, const TensorD& sq, const TensorD& fc1, const TensorD& fc2,
                     const TensorD& mem, Pattern* pattern) {
  const TensorD squeezed = reference::conv1x1_fwd<double>(x, sq.data());
  TensorD hidden = reference::linear_fwd(squeezed, fc1);
  if (cfg.hidden_relu) {
    record_signs(hidden, pattern);
    hidden = reference::relu(hidden);
  }
  const TensorD alpha = reference::softmax(reference::linear_fwd(hidden, fc2));
  TensorD out = x;
  const std::size_t sample = x.shape().sample();
  for (std::size_t n = 0; n < x.shape().n; ++n)
    for (std::size_t i = 0; i < cfg.p; ++i)
      for (std::size_t k = 0; k < sample; ++k) out[n * sample + k] += alpha[n * cfg.p + i] * mem[i * sample + k];
  return out;
}

// ---- host in double -------------------------------------------------------

struct HostOracleInputs {
  const HostConfig* cfg;
  std::vector<TensorD> masks;  // per stage, empty if none
  TensorD x;
  std::vector<int> labels;
};

// Parameter order: conv1..conv4, classifier, then sr squeeze, fc1, fc2, memory.
double host_loss_d(const HostOracleInputs& o, const std::vector<TensorD>& p, Pattern* pattern) {
  const HostConfig& cfg = *o.cfg;
  TensorD h = o.x;
  for (std::size_t k = 0; k < 4; ++k) {
    const TensorD pre = reference::conv3x3_fwd(h, p[k], kStageStrides[k]);
    record_signs(pre, pattern);
    h = reference::relu(pre);
    if (!o.masks[k].empty()) h = reference::apply_mask(h, o.masks[k]);
    if (cfg.sr_insert && static_cast<std::size_t>(*cfg.sr_insert) == k + 1) {
      h = sr_forward_d(cfg.resolved_sr(), h, p[5], p[6], p[7], p[8], pattern);
    }
  }
  const TensorD logits = reference::linear_fwd(reference::global_avgpool(h), p[4]);
  return reference::cross_entropy(logits, o.labels);
}

// ---- suites ---------------------------------------------------------------

GradcheckEntry check_conv1x1(const Dims& d, Rng& rng) {
  GradcheckEntry e{"conv1x1"};
  for (int c = 0; c < kGradcheckCases; ++c) {
    const Tensor x = random_tensor(d.x, rng);
    const Tensor w = random_tensor(Shape{1, d.x.c, 1, 1}, rng);
    const Tensor r = random_tensor(Shape{d.x.n, 1, d.x.h, d.x.w}, rng);
    const auto g = ops::conv1x1_bwd(x, w.data(), r);
    const TensorD rd = as_double(r);
    check_case(e, {x, w}, [&](const std::vector<TensorD>& in, Pattern*) {
      return weighted_sum(reference::conv1x1_fwd<double>(in[0], in[1].data()), rd);
    }, {g.grad_x, Tensor(w.shape(), g.grad_weight)});
  }
  return e;
}

GradcheckEntry check_linear(const Dims& d, Rng& rng) {
  GradcheckEntry e{"linear"};
  for (int c = 0; c < kGradcheckCases; ++c) {
    const Tensor x = random_tensor(d.x, rng);
    const Tensor w = random_tensor(Shape{d.cout, d.x.sample(), 1, 1}, rng);
    const Tensor r = random_tensor(Shape{d.x.n, d.cout, 1, 1}, rng);
    const auto g = ops::linear_bwd(x, w, r);
    const TensorD rd = as_double(r);
    check_case(e, {x, w}, [&](const std::vector<TensorD>& in, Pattern*) {
      return weighted_sum(reference::linear_fwd(in[0], in[1]), rd);
    }, {g.grad_x, g.grad_weight});
  }
  return e;
}

GradcheckEntry check_softmax(const Dims& d, Rng& rng, const GradcheckHooks& hooks) {
  GradcheckEntry e{"softmax"};
  for (int c = 0; c < kGradcheckCases; ++c) {
    const Tensor x = random_tensor(d.x, rng);
    const Tensor r = random_tensor(d.x, rng);
    const Tensor probs = ops::softmax_fwd(x);
    const Tensor gx = hooks.softmax_bwd ? hooks.softmax_bwd(probs, r) : ops::softmax_bwd(probs, r);
    const TensorD rd = as_double(r);
    check_case(e, {x}, [&](const std::vector<TensorD>& in, Pattern*) {
      return weighted_sum(reference::softmax(in[0]), rd);
    }, {gx});
  }
  return e;
}

GradcheckEntry check_conv3x3(const Dims& d, int stride, Rng& rng) {
  GradcheckEntry e{stride == 1 ? "conv3x3_s1" : "conv3x3_s2"};
  for (int c = 0; c < kGradcheckCases; ++c) {
    const Tensor x = random_tensor(d.x, rng);
    const Tensor w = random_tensor(Shape{d.cout, d.x.c, 3, 3}, rng);
    const Shape os{d.x.n, d.cout, ops::conv3x3_out_extent(d.x.h, stride), ops::conv3x3_out_extent(d.x.w, stride)};
    const Tensor r = random_tensor(os, rng);
    const auto g = ops::conv3x3_bwd(x, w, r, stride, true);
    const TensorD rd = as_double(r);
    check_case(e, {x, w}, [&](const std::vector<TensorD>& in, Pattern*) {
      return weighted_sum(reference::conv3x3_fwd(in[0], in[1], stride), rd);
    }, {g.grad_x, g.grad_weight});
  }
  return e;
}

GradcheckEntry check_relu(const Dims& d, Rng& rng) {
  GradcheckEntry e{"relu"};
  for (int c = 0; c < kGradcheckCases; ++c) {
    const Tensor x = random_tensor(d.x, rng);
    const Tensor r = random_tensor(d.x, rng);
    const Tensor gx = ops::relu_bwd(x, r);
    const TensorD rd = as_double(r);
    check_case(e, {x}, [&](const std::vector<TensorD>& in, Pattern* pat) {
      record_signs(in[0], pat);
      return weighted_sum(reference::relu(in[0]), rd);
    }, {gx});
  }
  return e;
}

GradcheckEntry check_avgpool(const Dims& d, Rng& rng) {
  GradcheckEntry e{"global_avgpool"};
  for (int c = 0; c < kGradcheckCases; ++c) {
    const Tensor x = random_tensor(d.x, rng);
    const Tensor r = random_tensor(Shape{d.x.n, d.x.c, 1, 1}, rng);
    const Tensor gx = ops::global_avgpool_bwd(d.x, r);
    const TensorD rd = as_double(r);
    check_case(e, {x}, [&](const std::vector<TensorD>& in, Pattern*) {
      return weighted_sum(reference::global_avgpool(in[0]), rd);
    }, {gx});
  }
  return e;
}

GradcheckEntry check_cross_entropy(const Dims& d, Rng& rng) {
  GradcheckEntry e{"cross_entropy"};
  const std::size_t k = d.cout;
  for (int c = 0; c < kGradcheckCases; ++c) {
    const Tensor logits = random_tensor(Shape{d.x.n, k, 1, 1}, rng);
    std::vector<int> labels(d.x.n);
    for (int& l : labels) l = static_cast<int>(rng.below(k));
    const Tensor g = ops::cross_entropy_bwd(logits, labels);
    check_case(e, {logits}, [&](const std::vector<TensorD>& in, Pattern*) {
      return reference::cross_entropy(in[0], labels);
    }, {g});
  }
  return e;
}

GradcheckEntry check_dropout(const Dims& d, ops::DropoutKind kind, Rng& rng) {
  GradcheckEntry e{kind == ops::DropoutKind::element ? "dropout_element" : "dropout_channel"};
  for (int c = 0; c < kGradcheckCases; ++c) {
    const Tensor x = random_tensor(d.x, rng);
    const Tensor mask = ops::dropout_mask(d.x, kind, 0.3f, rng);
    const Tensor r = random_tensor(d.x, rng);
    const Tensor gx = ops::dropout_mask_apply(r, mask);
    const TensorD rd = as_double(r), md = as_double(mask);
    check_case(e, {x}, [&](const std::vector<TensorD>& in, Pattern*) {
      return weighted_sum(reference::apply_mask(in[0], md), rd);
    }, {gx});
  }
  return e;
}

GradcheckEntry check_add(const Dims& d, Rng& rng) {
  GradcheckEntry e{"add"};
  for (int c = 0; c < kGradcheckCases; ++c) {
    const Tensor a = random_tensor(d.x, rng), b = random_tensor(d.x, rng);
    const Tensor r = random_tensor(d.x, rng);
    const TensorD rd = as_double(r);
    check_case(e, {a, b}, [&](const std::vector<TensorD>& in, Pattern*) {
      TensorD y = in[0];
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += in[1][i];
      return weighted_sum(y, rd);
    }, {r, r});
  }
  return e;
}

GradcheckEntry check_sr_block(GradcheckSize size, bool hidden_relu, Rng& rng) {
  GradcheckEntry e{hidden_relu ? "sr_block_hidden_relu" : "sr_block"};
  SRConfig cfg = size == GradcheckSize::micro ? SRConfig{3, 4, 4, 8, 3} : SRConfig{4, 6, 6, 8, 5};
  cfg.hidden_relu = hidden_relu;
  const std::size_t n = 2;
  for (int c = 0; c < kGradcheckCases; ++c) {
    SRParams p = sr_init(cfg, rng);
    for (float& v : p.memory.data()) v = rng.symmetric(1.0f);
    const Tensor x = random_tensor(Shape{n, cfg.c, cfg.h, cfg.w}, rng);
    const Tensor r = random_tensor(x.shape(), rng);
    SRForwardCache cache;
    sr_forward(p, x, &cache);
    const SRGrads g = sr_backward(p, cache, r);
    const TensorD rd = as_double(r);
    check_case(e, {x, p.squeeze, p.fc1, p.fc2, p.memory}, [&](const std::vector<TensorD>& in, Pattern* pat) {
      return weighted_sum(sr_forward_d(cfg, in[0], in[1], in[2], in[3], in[4], pat), rd);
    }, {g.grad_x, g.params.squeeze, g.params.fc1, g.params.fc2, g.params.memory});
  }
  return e;
}

GradcheckEntry check_host(GradcheckSize size, Rng& rng) {
  GradcheckEntry e{size == GradcheckSize::micro ? "host_micro" : "host_small"};
  HostConfig cfg;
  if (size == GradcheckSize::micro) {
    cfg.stage_channels = {2, 2, 2, 2};
    cfg.in_h = cfg.in_w = 4;
    cfg.classes = 2;
  } else {
    cfg.stage_channels = {4, 4, 6, 6};
    cfg.in_h = cfg.in_w = 8;
    cfg.classes = 3;
  }
  cfg.sr_insert = 3;
  cfg.sr.u = 4;
  cfg.sr.p = 2;
  cfg.sr.outside_grid_ok = true;
  cfg.dropout_kind = ops::DropoutKind::channel;
  cfg.dropout_p = 0.25f;
  const std::size_t n = 3;

  for (int c = 0; c < kGradcheckCases; ++c) {
    HostParams params = host_init(cfg, rng);
    for (float& v : params.sr->memory.data()) v = rng.symmetric(1.0f);
    const Tensor x = random_tensor(Shape{n, cfg.in_c, cfg.in_h, cfg.in_w}, rng);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.below(cfg.classes));

    HostCache cache;
    host_forward(cfg, params, x, Mode::train, rng, &cache);
    const HostGrads g = host_backward(cfg, params, cache, labels);

    HostOracleInputs o{&cfg, {}, as_double(x), labels};
    for (const auto& st : cache.stages) o.masks.push_back(st.mask.empty() ? TensorD() : as_double(st.mask));

    std::vector<Tensor> inputs, analytic;
    for_each_tensor(params, [&](const std::string&, const Tensor& t) { inputs.push_back(t); });
    for_each_tensor(g.grads, [&](const std::string&, const Tensor& t) { analytic.push_back(t); });
    check_case(e, inputs, [&](const std::vector<TensorD>& in, Pattern* pat) { return host_loss_d(o, in, pat); },
               analytic);
  }
  return e;
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

bool GradcheckReport::passed() const {
  return !entries.empty() &&
         std::all_of(entries.begin(), entries.end(), [](const GradcheckEntry& e) { return e.passed(); });
}

GradcheckReport run_gradcheck(GradcheckSize size, std::uint64_t seed, const GradcheckHooks& hooks) {
  Rng rng(seed);
  const Dims d = dims_for(size);
  GradcheckReport rep;
  rep.entries.push_back(check_conv1x1(d, rng));
  rep.entries.push_back(check_linear(d, rng));
  rep.entries.push_back(check_softmax(d, rng, hooks));
  rep.entries.push_back(check_conv3x3(d, 1, rng));
  rep.entries.push_back(check_conv3x3(d, 2, rng));
  rep.entries.push_back(check_relu(d, rng));
  rep.entries.push_back(check_avgpool(d, rng));
  rep.entries.push_back(check_cross_entropy(d, rng));
  rep.entries.push_back(check_dropout(d, ops::DropoutKind::element, rng));
  rep.entries.push_back(check_dropout(d, ops::DropoutKind::channel, rng));
  rep.entries.push_back(check_add(d, rng));
  rep.entries.push_back(check_sr_block(size, false, rng));
  rep.entries.push_back(check_sr_block(size, true, rng));
  rep.entries.push_back(check_host(size, rng));
  return rep;
}

}  // namespace srkit
