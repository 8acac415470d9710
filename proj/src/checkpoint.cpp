#include "srkit/checkpoint.hpp"

#include <bit>
#include <map>

#include "srkit/io.hpp"

namespace srkit {

namespace {

constexpr char kMagic[4] = {'S', 'R', 'C', 'K'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += 4;
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("checkpoint truncated while reading ") + what);
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint32_t> extents_of(const Shape& s) {
  return {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c), static_cast<std::uint32_t>(s.h),
          static_cast<std::uint32_t>(s.w)};
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  put_u32(out, ckpt.version);
  put_u32(out, static_cast<std::uint32_t>(ckpt.metadata.size()));
  out += ckpt.metadata;
  for (const auto& t : ckpt.tensors) {
    std::size_t count = 1;
    for (auto e : t.extents) count *= e;
    if (count != t.values.size()) throw DimensionError("checkpoint tensor '" + t.name + "': extents disagree with values");
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_u32(out, static_cast<std::uint32_t>(t.extents.size()));
    for (auto e : t.extents) put_u32(out, e);
    for (float v : t.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(bytes.size() < 4 ? bytes.size() : 4, "magic") != std::string_view(kMagic, 4)) {
    throw FormatError("not a checkpoint: bad magic");
  }
  Checkpoint ck;
  ck.version = r.u32("version");
  if (ck.version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(ck.version));
  }
  const std::uint32_t meta_len = r.u32("metadata length");
  ck.metadata = std::string(r.take(meta_len, "metadata"));
  while (!r.done()) {
    NamedTensor t;
    const std::uint32_t name_len = r.u32("name length");
    t.name = std::string(r.take(name_len, "tensor name"));
    const std::uint32_t rank = r.u32("rank");
    if (rank > 8) throw FormatError("checkpoint tensor '" + t.name + "' has implausible rank");
    std::size_t count = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.extents.push_back(r.u32("extent"));
      count *= t.extents.back();
    }
    const std::string_view raw = r.take(count * 4, "tensor values");
    t.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t v = 0;
      for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * i + b])) << (8 * b);
      t.values[i] = std::bit_cast<float>(v);
    }
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_file_atomic(path, encode_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

Checkpoint make_checkpoint(const RunConfig& cfg, const HostParams& params) {
  Checkpoint ck;
  ck.metadata = run_config_json(cfg);
  for_each_tensor(params, [&](const std::string& name, const Tensor& t) {
    ck.tensors.push_back(NamedTensor{name, extents_of(t.shape()), std::vector<float>(t.data().begin(), t.data().end())});
  });
  return ck;
}

RunConfig checkpoint_config(const Checkpoint& ckpt) {
  try {
    return parse_run_config(ckpt.metadata);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
}

HostParams checkpoint_params(const Checkpoint& ckpt, const HostConfig& cfg) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : ckpt.tensors) {
    if (!by_name.emplace(t.name, &t).second) throw FormatError("checkpoint repeats tensor '" + t.name + "'");
  }
  HostParams params = zeros_like([&] {
    Rng rng(0);
    return host_init(cfg, rng);
  }());
  std::size_t used = 0;
  for_each_tensor(params, [&](const std::string& name, Tensor& t) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks tensor '" + name + "'");
    if (it->second->extents != extents_of(t.shape())) {
      throw FormatError("checkpoint tensor '" + name + "' does not have shape " + t.shape().str());
    }
    std::copy(it->second->values.begin(), it->second->values.end(), t.data().begin());
    ++used;
  });
  if (used != by_name.size()) throw FormatError("checkpoint has tensors the configured host does not use");
  return params;
}

}  // namespace srkit
