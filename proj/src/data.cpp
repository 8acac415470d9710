#include "srkit/data.hpp"

#include <cmath>
#include <numbers>

namespace srkit {

void SynthSpec::validate() const {
  if (classes < 1) throw ConfigError("classes must be >= 1");
  if (per_class_train < 1) throw ConfigError("per_class_train must be >= 1");
  if (per_class_test < 1) throw ConfigError("per_class_test must be >= 1");
  if (image_c < 1 || image_h < 1 || image_w < 1) throw ConfigError("image extents must be >= 1");
  if (!(noise_sigma >= 0.0f) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be >= 0");
}

Dataset Dataset::gather(std::span<const std::size_t> idx) const {
  const Shape s = images.shape();
  Dataset out;
  out.images = Tensor(Shape{idx.size(), s.c, s.h, s.w});
  out.labels.resize(idx.size());
  const std::size_t sample = s.sample();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(images.ptr() + idx[i] * sample, sample, out.images.ptr() + i * sample);
    out.labels[i] = labels[idx[i]];
  }
  return out;
}

namespace {
// Template deviation from mid-grey; with the default noise level this keeps
// the task learnable but not trivially separable.
constexpr double kContrast = 0.3;
}  // namespace

Tensor class_template(const SynthSpec& spec, std::size_t k) {
  constexpr double pi = std::numbers::pi;
  const std::size_t h = spec.image_h, w = spec.image_w;
  Tensor t(Shape{1, spec.image_c, h, w});

  const double theta = static_cast<double>(k % 4) * pi / 6.0;
  const double freq = 1.5 + 1.25 * static_cast<double>((k / 4) % 3) + 0.35 * static_cast<double>(k / 12);
  const double blob_row = (k % 2 == 0 ? 0.22 : 0.78) * static_cast<double>(h);
  const double blob_cols[2] = {0.22 * static_cast<double>(w), 0.78 * static_cast<double>(w)};
  const double blob_r = std::max(1.0, 0.1 * static_cast<double>(std::min(h, w)));
  const double hue = static_cast<double>(k) / static_cast<double>(spec.classes);

  for (std::size_t ch = 0; ch < spec.image_c; ++ch) {
    const double amp = 0.5 + 0.5 * std::cos(2.0 * pi * (hue + static_cast<double>(ch) / static_cast<double>(spec.image_c)));
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double u = (static_cast<double>(x) - 0.5 * static_cast<double>(w - 1)) / static_cast<double>(w);
        const double v = static_cast<double>(y) / static_cast<double>(h);
        const double stripes = 0.5 * (std::cos(2.0 * pi * freq * (u * std::cos(theta) + v * std::sin(theta))) +
                                      std::cos(2.0 * pi * freq * (-u * std::cos(theta) + v * std::sin(theta))));
        double blob = 0.0;
        for (double bc : blob_cols) {
          const double dy = static_cast<double>(y) - blob_row, dx = static_cast<double>(x) + 0.5 - bc;
          blob += std::exp(-(dy * dy + dx * dx) / (2.0 * blob_r * blob_r));
        }
        const double value = 0.5 + kContrast * (0.25 * (0.4 + 0.6 * amp) * stripes + 0.35 * blob * (1.2 - amp) - 0.1);
        t.at(0, ch, y, x) = static_cast<float>(std::clamp(value, 0.0, 1.0));
      }
    }
  }
  return t;
}

void normalize_channels(Tensor& images, std::span<const float> mean, std::span<const float> stddev) {
  const Shape s = images.shape();
  require_extent("normalize_channels", "channel", mean.size(), s.c);
  require_extent("normalize_channels", "channel", stddev.size(), s.c);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      float* p = images.ptr() + (n * s.c + c) * s.plane();
      for (std::size_t k = 0; k < s.plane(); ++k) p[k] = (p[k] - mean[c]) / stddev[c];
    }
}

namespace {
Dataset render(const SynthSpec& spec, const std::vector<Tensor>& templates, std::size_t per_class, Rng& rng) {
  const std::size_t total = per_class * spec.classes;
  Dataset d;
  d.images = Tensor(Shape{total, spec.image_c, spec.image_h, spec.image_w});
  d.labels.resize(total);
  const std::size_t sample = d.images.shape().sample();
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t k = i % spec.classes;
    d.labels[i] = static_cast<int>(k);
    float* dst = d.images.ptr() + i * sample;
    const float* src = templates[k].ptr();
    for (std::size_t j = 0; j < sample; ++j) {
      float v = src[j];
      if (spec.noise_sigma > 0.0f) v += spec.noise_sigma * rng.normal();
      dst[j] = std::clamp(v, 0.0f, 1.0f);
    }
  }
  return d;
}
}  // namespace

SynthData synth_generate(const SynthSpec& spec) {
  spec.validate();
  std::vector<Tensor> templates;
  for (std::size_t k = 0; k < spec.classes; ++k) templates.push_back(class_template(spec, k));

  Rng rng(spec.seed);
  Dataset pool = render(spec, templates, spec.per_class_train, rng);
  Dataset test = render(spec, templates, spec.per_class_test, rng);

  // Every tenth round of classes goes to validation.
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    ((i / spec.classes) % 10 == 9 ? val_idx : train_idx).push_back(i);
  }
  if (val_idx.empty()) {
    // Fewer than ten samples per class: hold out the last round instead.
    train_idx.clear();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const bool last_round = i / spec.classes == spec.per_class_train - 1 && spec.per_class_train > 1;
      (last_round ? val_idx : train_idx).push_back(i);
    }
  }

  SynthData out;
  out.train = pool.gather(train_idx);
  out.val = val_idx.empty() ? out.train : pool.gather(val_idx);
  out.test = std::move(test);

  const Shape s = out.train.images.shape();
  out.channel_mean.assign(s.c, 0.0f);
  out.channel_std.assign(s.c, 1.0f);
  for (std::size_t c = 0; c < s.c; ++c) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const float* p = out.train.images.ptr() + (n * s.c + c) * s.plane();
      for (std::size_t k = 0; k < s.plane(); ++k) {
        sum += p[k];
        sq += static_cast<double>(p[k]) * p[k];
      }
    }
    const double cnt = static_cast<double>(s.n * s.plane());
    const double mean = sum / cnt;
    const double var = std::max(0.0, sq / cnt - mean * mean);
    out.channel_mean[c] = static_cast<float>(mean);
    out.channel_std[c] = var > 1e-12 ? static_cast<float>(std::sqrt(var)) : 1.0f;
  }
  for (Dataset* d : {&out.train, &out.val, &out.test}) normalize_channels(d->images, out.channel_mean, out.channel_std);
  return out;
}

std::vector<std::uint8_t> flip_mask(std::size_t n, Rng& rng) {
  std::vector<std::uint8_t> m(n);
  for (auto& v : m) v = rng.uniform() < 0.5f ? 1 : 0;
  return m;
}

Tensor apply_flip(const Tensor& batch, std::span<const std::uint8_t> mask) {
  const Shape s = batch.shape();
  require_extent("apply_flip", "batch", mask.size(), s.n);
  Tensor out = batch;
  for (std::size_t n = 0; n < s.n; ++n) {
    if (!mask[n]) continue;
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) out.at(n, c, y, x) = batch.at(n, c, y, s.w - 1 - x);
  }
  return out;
}

Tensor augment(const Tensor& batch, Rng& rng, bool flip) {
  if (!flip) return batch;
  return apply_flip(batch, flip_mask(batch.shape().n, rng));
}

}  // namespace srkit
