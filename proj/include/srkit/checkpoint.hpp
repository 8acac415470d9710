#pragma once

// Checkpoint file layout, all integers little-endian u32:
//
//   "SRCK" | version | metadata length | metadata (JSON run config)
//   then until EOF, one record per tensor:
//   name length | name | rank | extents[rank] | values (f32, little-endian)

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "srkit/config.hpp"
#include "srkit/host_net.hpp"

namespace srkit {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Malformed or unsupported checkpoint bytes.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> extents;
  std::vector<float> values;

  bool operator==(const NamedTensor&) const = default;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string metadata;
  std::vector<NamedTensor> tensors;

  bool operator==(const Checkpoint&) const = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Tensors in for_each_tensor order, metadata = run_config_json(cfg).
Checkpoint make_checkpoint(const RunConfig& cfg, const HostParams& params);
RunConfig checkpoint_config(const Checkpoint& ckpt);
/// Rebuilds parameters for `cfg`; every expected tensor must be present with
/// the expected extents.
HostParams checkpoint_params(const Checkpoint& ckpt, const HostConfig& cfg);

}  // namespace srkit
