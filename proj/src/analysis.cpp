#include "srkit/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

#include "srkit/train.hpp"

namespace srkit {

namespace {

constexpr std::size_t kBatch = 256;

std::vector<std::size_t> select(const Dataset& data, const SampleFilter& filter) {
  std::map<int, std::size_t> taken;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int label = data.labels[i];
    if (filter.classes && std::find(filter.classes->begin(), filter.classes->end(), label) == filter.classes->end()) {
      continue;
    }
    if (filter.per_class_cap && taken[label] >= *filter.per_class_cap) continue;
    ++taken[label];
    idx.push_back(i);
  }
  return idx;
}

void require_sr(const HostConfig& cfg, const HostParams& params, const char* op) {
  if (!cfg.sr_insert || !params.sr) throw ConfigError(std::string(op) + ": host has no SR block");
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::vector<ActivationRecord> collect_activations(const HostConfig& cfg, const HostParams& params, const Dataset& data,
                                                  const SampleFilter& filter) {
  require_sr(cfg, params, "collect_activations");
  const std::vector<std::size_t> idx = select(data, filter);
  const std::size_t p = params.sr->cfg.p;
  std::vector<ActivationRecord> out;
  out.reserve(idx.size());
  Rng unused(0);
  for (std::size_t start = 0; start < idx.size(); start += kBatch) {
    const std::size_t end = std::min(idx.size(), start + kBatch);
    const std::span<const std::size_t> chunk(idx.data() + start, end - start);
    const Dataset b = data.gather(chunk);
    HostCache cache;
    host_forward(cfg, params, b.images, Mode::eval, unused, &cache);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      ActivationRecord r;
      r.sample_id = chunk[i];
      r.class_label = b.labels[i];
      r.alpha.assign(cache.sr.alpha.ptr() + i * p, cache.sr.alpha.ptr() + (i + 1) * p);
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<ActivationStats> activation_stats(std::span<const ActivationRecord> records, Grouping group) {
  std::map<int, std::vector<const ActivationRecord*>> groups;
  for (const auto& r : records) groups[group == Grouping::all ? kAllClasses : r.class_label].push_back(&r);

  std::vector<ActivationStats> out;
  for (const auto& [label, members] : groups) {
    const std::size_t p = members.front()->alpha.size();
    ActivationStats st;
    st.class_label = label;
    st.n_samples = members.size();
    st.mean.assign(p, 0.0);
    st.std.assign(p, 0.0);
    for (const auto* r : members) {
      if (r->alpha.size() != p) throw DimensionError("activation_stats: records disagree on block count");
      for (std::size_t i = 0; i < p; ++i) st.mean[i] += r->alpha[i];
    }
    for (double& m : st.mean) m /= static_cast<double>(members.size());
    if (members.size() > 1) {
      for (const auto* r : members)
        for (std::size_t i = 0; i < p; ++i) {
          const double d = r->alpha[i] - st.mean[i];
          st.std[i] += d * d;
        }
      for (double& s : st.std) s = std::sqrt(s / static_cast<double>(members.size() - 1));
    }
    out.push_back(std::move(st));
  }
  return out;
}

double max_pairwise_l1(std::span<const ActivationStats> stats) {
  double best = 0.0;
  for (std::size_t a = 0; a < stats.size(); ++a)
    for (std::size_t b = a + 1; b < stats.size(); ++b) {
      double d = 0.0;
      for (std::size_t i = 0; i < stats[a].mean.size(); ++i) d += std::abs(stats[a].mean[i] - stats[b].mean[i]);
      best = std::max(best, d);
    }
  return best;
}

std::vector<Tensor> memory_channel_means(const SRParams& sr) {
  const SRConfig& c = sr.cfg;
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < c.p; ++i) {
    Tensor map(Shape{1, 1, c.h, c.w});
    for (std::size_t y = 0; y < c.h; ++y)
      for (std::size_t x = 0; x < c.w; ++x) {
        double acc = 0.0;
        for (std::size_t ch = 0; ch < c.c; ++ch) acc += sr.memory.at(i, ch, y, x);
        map.at(0, 0, y, x) = static_cast<float>(acc / static_cast<double>(c.c));
      }
    out.push_back(std::move(map));
  }
  return out;
}

std::vector<DeltaStats> feature_delta(const HostConfig& cfg, const HostParams& params, const Dataset& data,
                                      const SampleFilter& filter) {
  require_sr(cfg, params, "feature_delta");
  const std::vector<std::size_t> idx = select(data, filter);
  const std::size_t stage = static_cast<std::size_t>(*cfg.sr_insert) - 1;

  struct Acc {
    std::size_t n = 0;
    std::vector<double> pre, post, absd, preabs;
  };
  std::map<int, Acc> acc;
  Rng unused(0);
  for (std::size_t start = 0; start < idx.size(); start += kBatch) {
    const std::size_t end = std::min(idx.size(), start + kBatch);
    const std::span<const std::size_t> chunk(idx.data() + start, end - start);
    const Dataset b = data.gather(chunk);
    HostCache cache;
    host_forward(cfg, params, b.images, Mode::eval, unused, &cache);
    const Tensor& pre = cache.sr_input;
    const Tensor& post = cache.stages[stage].output;
    const Shape s = pre.shape();
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      Acc& a = acc[b.labels[i]];
      if (a.pre.empty()) {
        a.pre.assign(s.c, 0.0);
        a.post.assign(s.c, 0.0);
        a.absd.assign(s.c, 0.0);
        a.preabs.assign(s.c, 0.0);
      }
      ++a.n;
      for (std::size_t c = 0; c < s.c; ++c) {
        const float* x = pre.ptr() + (i * s.c + c) * s.plane();
        const float* y = post.ptr() + (i * s.c + c) * s.plane();
        for (std::size_t k = 0; k < s.plane(); ++k) {
          a.pre[c] += x[k];
          a.post[c] += y[k];
          a.absd[c] += std::abs(static_cast<double>(y[k]) - static_cast<double>(x[k]));
          a.preabs[c] += std::abs(x[k]);
        }
      }
    }
  }

  const Shape st = cfg.stage_shape(*cfg.sr_insert);
  std::vector<DeltaStats> out;
  for (auto& [label, a] : acc) {
    DeltaStats d;
    d.class_label = label;
    d.n_samples = a.n;
    const double cnt = static_cast<double>(a.n * st.plane());
    double shift_sum = 0.0;
    std::size_t shift_n = 0;
    for (std::size_t c = 0; c < st.c; ++c) {
      d.pre_mean.push_back(a.pre[c] / cnt);
      d.post_mean.push_back(a.post[c] / cnt);
      d.abs_delta.push_back(a.absd[c] / cnt);
      d.pre_abs_mean.push_back(a.preabs[c] / cnt);
      const double shift = d.pre_abs_mean.back() < 1e-12 ? std::numeric_limits<double>::quiet_NaN()
                                                           : 100.0 * d.abs_delta.back() / d.pre_abs_mean.back();
      d.shift_pct.push_back(shift);
      if (!std::isnan(shift)) {
        shift_sum += shift;
        ++shift_n;
      }
    }
    d.mean_shift_pct = shift_n ? shift_sum / static_cast<double>(shift_n) : std::numeric_limits<double>::quiet_NaN();
    out.push_back(std::move(d));
  }
  return out;
}

AblationReport ablation_report(const HostConfig& cfg, const HostParams& params, const Dataset& test) {
  require_sr(cfg, params, "ablation_report");
  HostParams ablated = params;
  ablated.sr = sr_ablate(*params.sr);
  AblationReport r;
  r.acc_full = evaluate(cfg, params, test);
  r.acc_ablated = evaluate(cfg, ablated, test);
  r.delta = r.acc_full - r.acc_ablated;
  return r;
}

std::string activations_csv(std::span<const ActivationStats> stats, std::size_t p) {
  std::string s = "class";
  for (std::size_t i = 0; i < p; ++i) s += ",block_" + std::to_string(i);
  s += "\n";
  for (const auto& st : stats) {
    const std::string label = st.class_label == kAllClasses ? "all" : std::to_string(st.class_label);
    for (const auto* row : {&st.mean, &st.std}) {
      s += label;
      for (double v : *row) s += "," + fmt(v);
      s += "\n";
    }
  }
  return s;
}

std::string delta_csv(std::span<const DeltaStats> stats) {
  std::string s = "class,channel,pre_mean,post_mean,abs_delta,shift_pct\n";
  for (const auto& d : stats)
    for (std::size_t c = 0; c < d.pre_mean.size(); ++c) {
      s += std::to_string(d.class_label) + "," + std::to_string(c) + "," + fmt(d.pre_mean[c]) + "," +
           fmt(d.post_mean[c]) + "," + fmt(d.abs_delta[c]) + "," + fmt(d.shift_pct[c]) + "\n";
    }
  return s;
}

std::string ablation_csv(const AblationReport& r) {
  return "acc_full,acc_ablated,delta\n" + fmt(r.acc_full) + "," + fmt(r.acc_ablated) + "," + fmt(r.delta) + "\n";
}

std::string memory_means_csv(std::span<const Tensor> maps) {
  std::string s = "block,row,col,value\n";
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const Shape sh = maps[i].shape();
    for (std::size_t y = 0; y < sh.h; ++y)
      for (std::size_t x = 0; x < sh.w; ++x) {
        s += std::to_string(i) + "," + std::to_string(y) + "," + std::to_string(x) + "," + fmt(maps[i].at(0, 0, y, x)) +
             "\n";
      }
  }
  return s;
}

std::string pgm_bytes(const Tensor& map) {
  const Shape sh = map.shape();
  const std::size_t h = sh.n * sh.c * sh.h, w = sh.w;
  const auto [lo_it, hi_it] = std::minmax_element(map.data().begin(), map.data().end());
  const float lo = *lo_it, hi = *hi_it;
  std::string s = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (float v : map.data()) {
    const double scaled = hi > lo ? 255.0 * (static_cast<double>(v) - lo) / (static_cast<double>(hi) - lo) : 0.0;
    s.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
  }
  return s;
}

}  // namespace srkit
