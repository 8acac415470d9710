#pragma once

// Small four-stage CNN that hosts one SR block.
//
//   stage k: conv3x3 (stride 1 for stage 1, else 2) -> relu
//            -> dropout (stages 3 and 4, train mode, when enabled)
//            -> SR block (when inserted after stage k)
//   head:    global average pool -> linear classifier
//
// No biases, no normalisation layers, no skip connections.

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "srkit/kernels.hpp"
#include "srkit/sr_block.hpp"
#include "srkit/tensor.hpp"

namespace srkit {

inline constexpr std::array<int, 4> kStageStrides{1, 2, 2, 2};

struct HostConfig {
  std::array<std::size_t, 4> stage_channels{16, 32, 64, 64};
  std::size_t in_c = 3;
  std::size_t in_h = 32;
  std::size_t in_w = 32;
  std::size_t classes = 10;
  std::optional<int> sr_insert;  // stage 1..4
  /// u, p and flags for the SR block; c/h/w are filled from the stage shape.
  SRConfig sr{};
  ops::DropoutKind dropout_kind = ops::DropoutKind::none;
  float dropout_p = 0.0f;

  /// Output shape (per sample, n = 1) of stage `stage` in 1..4.
  Shape stage_shape(int stage) const;
  /// `sr` with c, h, w set to the insertion stage's output. Requires sr_insert.
  SRConfig resolved_sr() const;
  void validate() const;
};

struct HostParams {
  std::array<Tensor, 4> conv;  // [out, in, 3, 3]
  Tensor classifier;           // [classes, stage_channels[3], 1, 1]
  std::optional<SRParams> sr;

  std::size_t scalar_count() const;
  bool operator==(const HostParams&) const = default;
};

/// Visits every learned tensor with a stable name, in a fixed order:
/// conv1..conv4, classifier, then sr.squeeze, sr.fc1, sr.fc2, sr.memory.
void for_each_tensor(HostParams& params, const std::function<void(const std::string&, Tensor&)>& fn);
void for_each_tensor(const HostParams& params, const std::function<void(const std::string&, const Tensor&)>& fn);

/// Zero tensors with the layout of `params`.
HostParams zeros_like(const HostParams& params);

/// Kaiming-uniform convolution and classifier weights, bound sqrt(6 / fan_in);
/// the SR block (if any) via sr_init.
HostParams host_init(const HostConfig& cfg, Rng& rng);

/// Total scalars for the config without allocating.
std::size_t host_param_count(const HostConfig& cfg);

enum class Mode { train, eval };

struct StageCache {
  Tensor input;
  Tensor preact;
  Tensor mask;   // empty when no dropout was applied
  Tensor output; // after relu, dropout and SR
};

struct HostCache {
  Mode mode = Mode::eval;
  std::array<StageCache, 4> stages;
  SRForwardCache sr;
  Tensor sr_input;  // feature map entering the SR block
  Tensor pooled;
  Tensor logits;
  bool valid = false;
};

/// `rng` supplies dropout masks in train mode and is not touched in eval mode.
Tensor host_forward(const HostConfig& cfg, const HostParams& params, const Tensor& x, Mode mode, Rng& rng,
                    HostCache* cache = nullptr);

struct HostGrads {
  HostParams grads;
  float loss = 0.0f;
};

/// Cross-entropy gradients for every learned tensor. Needs a train-mode cache.
HostGrads host_backward(const HostConfig& cfg, const HostParams& params, const HostCache& cache,
                        std::span<const int> labels);

/// argmax over logits per row; ties resolve to the lowest class index.
std::vector<int> predict(const Tensor& logits);

}  // namespace srkit
