#include "srkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace srkit {

namespace {
constexpr std::uint64_t kTrainStream = 0x9E3779B97F4A7C15ull;
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0f)) throw ConfigError("lr0 must be > 0");
  if (!(momentum >= 0.0f && momentum < 1.0f)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0f)) throw ConfigError("weight_decay must be >= 0");
  if (!(lr_decay_factor > 0.0f && lr_decay_factor <= 1.0f)) throw ConfigError("lr_decay_factor must lie in (0, 1]");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (early_stop_patience < 0) throw ConfigError("early_stop_patience must be >= 0");
  if (decay_epochs) {
    for (std::size_t i = 0; i < decay_epochs->size(); ++i) {
      if ((*decay_epochs)[i] < 1) throw ConfigError("decay_epochs entries must be >= 1");
      if (i > 0 && (*decay_epochs)[i] <= (*decay_epochs)[i - 1]) {
        throw ConfigError("decay_epochs must be strictly increasing");
      }
    }
  }
}

std::vector<int> TrainConfig::resolved_decay_epochs() const {
  if (decay_epochs) return *decay_epochs;
  std::set<int> out;
  for (double frac : {0.3, 0.6, 0.8}) {
    const int e = static_cast<int>(std::lround(frac * epochs));
    if (e >= 1 && e < epochs) out.insert(e);
  }
  return {out.begin(), out.end()};
}

float lr_at(const TrainConfig& cfg, int epoch) {
  float lr = cfg.lr0;
  for (int d : cfg.resolved_decay_epochs()) {
    if (d <= epoch) lr *= cfg.lr_decay_factor;
  }
  return lr;
}

void sgd_update(std::span<float> param, std::span<const float> grad, std::span<float> velocity, float lr,
                float momentum, float weight_decay) {
  if (param.size() != grad.size() || param.size() != velocity.size()) {
    throw DimensionError("sgd_update: parameter, gradient and velocity lengths differ");
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i] + weight_decay * param[i];
    param[i] -= lr * velocity[i];
  }
}

void sgd_step(HostParams& params, const HostParams& grads, SgdState& state, const TrainConfig& cfg, int epoch) {
  if (!state.initialized) {
    state.velocity = zeros_like(params);
    state.initialized = true;
  }
  std::vector<Tensor*> p, v;
  std::vector<std::string> names;
  std::vector<const Tensor*> g;
  for_each_tensor(params, [&](const std::string& name, Tensor& t) {
    names.push_back(name);
    p.push_back(&t);
  });
  for_each_tensor(state.velocity, [&](const std::string&, Tensor& t) { v.push_back(&t); });
  for_each_tensor(grads, [&](const std::string&, const Tensor& t) { g.push_back(&t); });
  if (p.size() != g.size() || p.size() != v.size()) throw DimensionError("sgd_step: parameter sets differ");

  const float lr = lr_at(cfg, epoch);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i]->shape() != g[i]->shape()) throw DimensionError("sgd_step: gradient shape mismatch for " + names[i]);
    const float wd = (!cfg.decay_memory && names[i] == "sr.memory") ? 0.0f : cfg.weight_decay;
    sgd_update(p[i]->data(), g[i]->data(), v[i]->data(), lr, cfg.momentum, wd);
  }
}

float evaluate(const HostConfig& cfg, const HostParams& params, const Dataset& data, std::size_t batch) {
  if (data.size() == 0) throw ConfigError("evaluate: empty dataset");
  Rng unused(0);
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch) {
    const std::size_t end = std::min(data.size(), start + batch);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Dataset b = data.gather(idx);
    const std::vector<int> pred = predict(host_forward(cfg, params, b.images, Mode::eval, unused));
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == b.labels[i];
  }
  return static_cast<float>(static_cast<double>(correct) / static_cast<double>(data.size()));
}

HostParams initial_params(const HostConfig& host_cfg, std::uint64_t seed) {
  Rng rng(seed);
  return host_init(host_cfg, rng);
}

TrainResult train(const HostConfig& host_cfg, const TrainConfig& train_cfg, const SynthData& data) {
  host_cfg.validate();
  train_cfg.validate();
  if (data.train.size() == 0 || data.val.size() == 0) throw ConfigError("train: empty dataset");

  TrainResult result;
  HostParams params = initial_params(host_cfg, train_cfg.seed);
  result.best = params;
  if (train_cfg.epochs == 0) return result;

  Rng rng(train_cfg.seed ^ kTrainStream);
  SgdState sgd;
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += train_cfg.batch) {
      const std::size_t end = std::min(order.size(), start + train_cfg.batch);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      Dataset b = data.train.gather(idx);
      const Tensor x = augment(b.images, rng, train_cfg.flip_augment);
      HostCache cache;
      host_forward(host_cfg, params, x, Mode::train, rng, &cache);
      const HostGrads hg = host_backward(host_cfg, params, cache, b.labels);
      loss_sum += static_cast<double>(hg.loss) * static_cast<double>(idx.size());
      sgd_step(params, hg.grads, sgd, train_cfg, epoch);
    }

    HistoryRow row;
    row.epoch = epoch;
    row.lr = lr_at(train_cfg, epoch);
    row.train_loss = static_cast<float>(loss_sum / static_cast<double>(order.size()));
    row.val_acc = evaluate(host_cfg, params, data.val);
    result.history.push_back(row);

    if (result.best_epoch < 0 || row.val_acc > result.best_val_acc) {
      result.best = params;
      result.best_epoch = epoch;
      result.best_val_acc = row.val_acc;
    }
    if (train_cfg.early_stop_patience > 0 && epoch - result.best_epoch >= train_cfg.early_stop_patience) break;
  }
  return result;
}

TrainResult train(const HostConfig& host_cfg, const TrainConfig& train_cfg, const SynthSpec& spec) {
  return train(host_cfg, train_cfg, synth_generate(spec));
}

}  // namespace srkit
