#pragma once

#include <optional>
#include <string>

#include "srkit/data.hpp"
#include "srkit/host_net.hpp"
#include "srkit/train.hpp"

namespace srkit {

/// Everything a run needs, read from one flat JSON object. Every key is
/// optional; unknown keys are rejected by name.
///
///   host:  stage_channels [4], image_channels, image_size, classes,
///          sr_insert (1..4 or null), dropout_kind ("none"|"element"|"channel"),
///          dropout_p
///   sr:    {"u", "p", "hidden_relu", "outside_grid_ok", "c", "h", "w"}
///          c/h/w are optional and must match the insertion stage when
///          sr_insert is set; without sr_insert they describe a standalone
///          block for parameter accounting.
///   train: lr0, momentum, weight_decay, lr_decay_factor, decay_epochs [],
///          epochs, batch, early_stop_patience, flip_augment, decay_memory, seed
///   data:  per_class_train, per_class_test, noise_sigma, data_seed
struct RunConfig {
  HostConfig host;
  TrainConfig train;
  SynthSpec synth;
  /// Set when the JSON gave explicit c/h/w for the SR block.
  bool sr_dims_given = false;

  /// The SR block this config describes: the inserted one, or a standalone
  /// block when c/h/w were given without sr_insert.
  std::optional<SRConfig> sr_block() const;
  void validate() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
/// Full snapshot with every key resolved; parse_run_config accepts it back.
std::string run_config_json(const RunConfig& cfg);

}  // namespace srkit
