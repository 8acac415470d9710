#include <gtest/gtest.h>

#include <filesystem>

#include "helpers.hpp"
#include "srkit/checkpoint.hpp"
#include "srkit/io.hpp"

using namespace srkit;

namespace {

RunConfig sr_config() { return parse_run_config(R"({"sr_insert": 3, "sr": {"p": 5}})"); }

HostParams noisy_params(const RunConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  HostParams p = host_init(cfg.host, rng);
  if (p.sr) {
    for (float& v : p.sr->memory.data()) v = rng.symmetric(1.0f);
  }
  p.conv[0][0] = -0.0f;
  p.conv[0][1] = std::numeric_limits<float>::denorm_min();
  return p;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("srkit_test_" + name)).string();
}

}  // namespace

TEST(Checkpoint, EncodeDecodeEncodeIsByteIdentical) {
  const RunConfig cfg = sr_config();
  const std::string bytes = encode_checkpoint(make_checkpoint(cfg, noisy_params(cfg, 1)));
  EXPECT_EQ(encode_checkpoint(decode_checkpoint(bytes)), bytes);
}

TEST(Checkpoint, ParamsRoundTripBitExact) {
  const RunConfig cfg = sr_config();
  const HostParams p = noisy_params(cfg, 2);
  const std::string path = temp_path("roundtrip.srck");
  save_checkpoint(path, make_checkpoint(cfg, p));
  const Checkpoint ck = load_checkpoint(path);
  const RunConfig back_cfg = checkpoint_config(ck);
  const HostParams back = checkpoint_params(ck, back_cfg.host);
  for_each_tensor(p, [&](const std::string& name, const Tensor& t) {
    for_each_tensor(back, [&](const std::string& other, const Tensor& u) {
      if (name == other) {
        EXPECT_TRUE(bitwise_equal(t, u)) << name;
      }
    });
  });
  EXPECT_EQ(back_cfg.host.sr.p, 5u);
  EXPECT_EQ(read_file(path), encode_checkpoint(make_checkpoint(back_cfg, back)));
  std::filesystem::remove(path);
}

TEST(Checkpoint, LayoutIsLittleEndianWithNamedRecords) {
  Checkpoint ck;
  ck.metadata = "{}";
  ck.tensors.push_back(NamedTensor{"t", {1, 2}, {1.0f, -2.0f}});
  const std::string b = encode_checkpoint(ck);
  const std::string want("SRCK\x01\x00\x00\x00\x02\x00\x00\x00{}"
                         "\x01\x00\x00\x00t"
                         "\x02\x00\x00\x00\x01\x00\x00\x00\x02\x00\x00\x00"
                         "\x00\x00\x80\x3f\x00\x00\x00\xc0",
                         12 + 2 + 5 + 12 + 8);
  EXPECT_EQ(b, want);
}

TEST(Checkpoint, SrTensorsPresentOnlyWithSr) {
  const RunConfig with = sr_config();
  const Checkpoint a = make_checkpoint(with, noisy_params(with, 3));
  std::vector<std::string> names;
  for (const auto& t : a.tensors) names.push_back(t.name);
  EXPECT_EQ(names, (std::vector<std::string>{"conv1", "conv2", "conv3", "conv4", "classifier", "sr.squeeze", "sr.fc1",
                                             "sr.fc2", "sr.memory"}));
  const RunConfig without = parse_run_config("{}");
  EXPECT_EQ(make_checkpoint(without, noisy_params(without, 3)).tensors.size(), 5u);
}

TEST(Checkpoint, RejectsBadMagicVersionAndTruncation) {
  const RunConfig cfg = sr_config();
  std::string b = encode_checkpoint(make_checkpoint(cfg, noisy_params(cfg, 4)));
  std::string bad = b;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  bad = b;
  bad[4] = 2;
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  EXPECT_THROW(decode_checkpoint(b.substr(0, b.size() - 3)), FormatError);
  EXPECT_THROW(decode_checkpoint("SR"), FormatError);
}

TEST(Checkpoint, RejectsShapeMismatch) {
  const RunConfig cfg = sr_config();
  Checkpoint ck = make_checkpoint(cfg, noisy_params(cfg, 5));
  ck.tensors[0].extents[0] = 15;
  ck.tensors[0].values.resize(15 * 3 * 9);
  EXPECT_THROW(checkpoint_params(ck, cfg.host), FormatError);
  ck = make_checkpoint(cfg, noisy_params(cfg, 5));
  ck.tensors.pop_back();
  EXPECT_THROW(checkpoint_params(ck, cfg.host), FormatError);
}

TEST(Io, AtomicWriteLeavesNoTempFile) {
  const std::string path = temp_path("atomic.bin");
  write_file_atomic(path, "abc");
  EXPECT_EQ(read_file(path), "abc");
  EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
  std::filesystem::remove(path);
  EXPECT_THROW(read_file(path), IoError);
  EXPECT_THROW(write_file_atomic("/nonexistent-dir/x.bin", "abc"), IoError);
}
