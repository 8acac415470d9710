#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "srkit/data.hpp"
#include "srkit/host_net.hpp"

namespace srkit {

struct TrainConfig {
  float lr0 = 0.1f;
  float momentum = 0.9f;
  float weight_decay = 5e-4f;
  float lr_decay_factor = 0.2f;
  /// Epochs (0-based) at which the rate is multiplied by lr_decay_factor.
  /// Unset: 30%, 60% and 80% of `epochs`, the 60/120/160-of-200 schedule
  /// compressed to the run length.
  std::optional<std::vector<int>> decay_epochs;
  int epochs = 30;
  std::size_t batch = 128;
  /// Stop after this many epochs without a new best validation accuracy;
  /// 0 disables early stopping.
  int early_stop_patience = 10;
  bool flip_augment = true;
  /// Apply weight decay to the SR memory bank as well.
  bool decay_memory = true;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<int> resolved_decay_epochs() const;
};

/// lr0 * factor^(number of decay epochs <= epoch).
float lr_at(const TrainConfig& cfg, int epoch);

struct SgdState {
  HostParams velocity;
  bool initialized = false;
};

/// v <- momentum * v + grad + weight_decay * param;  param <- param - lr(epoch) * v
void sgd_step(HostParams& params, const HostParams& grads, SgdState& state, const TrainConfig& cfg, int epoch);

/// The same update for one flat buffer.
void sgd_update(std::span<float> param, std::span<const float> grad, std::span<float> velocity, float lr,
                float momentum, float weight_decay);

struct HistoryRow {
  int epoch = 0;
  float lr = 0.0f;
  float train_loss = 0.0f;
  float val_acc = 0.0f;
};

struct TrainResult {
  HostParams best;
  std::vector<HistoryRow> history;
  int best_epoch = -1;
  float best_val_acc = 0.0f;
};

/// Fraction of correctly classified samples, eval mode.
float evaluate(const HostConfig& cfg, const HostParams& params, const Dataset& data, std::size_t batch = 256);

/// Epoch loop with shuffling, flips, validation after every epoch and
/// best-checkpoint selection (earliest epoch wins ties).
TrainResult train(const HostConfig& host_cfg, const TrainConfig& train_cfg, const SynthData& data);
TrainResult train(const HostConfig& host_cfg, const TrainConfig& train_cfg, const SynthSpec& spec);

/// Parameter initialisation used by train() for a given seed.
HostParams initial_params(const HostConfig& host_cfg, std::uint64_t seed);

}  // namespace srkit
