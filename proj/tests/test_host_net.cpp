#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "srkit/host_net.hpp"
#include "srkit/train.hpp"

using namespace srkit;
using srkit::testing::random_tensor;

namespace {

HostConfig with_sr(int stage) {
  HostConfig c;
  c.sr_insert = stage;
  return c;
}

HostConfig tiny(bool sr) {
  HostConfig c;
  c.stage_channels = {4, 4, 8, 8};
  c.in_h = c.in_w = 8;
  c.classes = 3;
  if (sr) {
    c.sr_insert = 3;
    c.sr.outside_grid_ok = true;
    c.sr.u = 4;
    c.sr.p = 2;
  }
  return c;
}

}  // namespace

TEST(HostConfig, StageShapesFollowStrides) {
  const HostConfig c;
  EXPECT_EQ(c.stage_shape(1), (Shape{1, 16, 32, 32}));
  EXPECT_EQ(c.stage_shape(2), (Shape{1, 32, 16, 16}));
  EXPECT_EQ(c.stage_shape(3), (Shape{1, 64, 8, 8}));
  EXPECT_EQ(c.stage_shape(4), (Shape{1, 64, 4, 4}));
}

TEST(HostConfig, Validation) {
  HostConfig c;
  c.sr_insert = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c.sr_insert = 3;
  c.dropout_p = 1.0f;
  EXPECT_THROW(c.validate(), ConfigError);
  c.dropout_p = 0.2f;
  c.classes = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(HostInit, Deterministic) {
  Rng a(1), b(1);
  EXPECT_EQ(host_init(with_sr(3), a), host_init(with_sr(3), b));
}

TEST(HostInit, NoSrWithoutInsertion) {
  Rng rng(2);
  EXPECT_FALSE(host_init(HostConfig{}, rng).sr.has_value());
}

TEST(HostInit, SrShapeMatchesStageThree) {
  Rng rng(3);
  const HostParams p = host_init(with_sr(3), rng);
  ASSERT_TRUE(p.sr);
  EXPECT_EQ(p.sr->cfg.c, 64u);
  EXPECT_EQ(p.sr->cfg.h, 8u);
  EXPECT_EQ(p.sr->cfg.w, 8u);
  EXPECT_EQ(p.sr->memory.shape(), (Shape{4, 64, 8, 8}));
}

TEST(HostInit, KaimingUniformBounds) {
  Rng rng(4);
  const HostConfig cfg;
  const HostParams p = host_init(cfg, rng);
  for (int k = 0; k < 4; ++k) {
    const Shape s = p.conv[k].shape();
    const float bound = std::sqrt(6.0f / static_cast<float>(s.c * 9));
    float mx = 0.0f;
    for (float v : p.conv[k].data()) {
      EXPECT_LT(std::abs(v), bound);
      mx = std::max(mx, std::abs(v));
    }
    EXPECT_GT(mx, 0.9f * bound);
  }
}

TEST(HostParamCount, SrAddsExactlyItsCount) {
  EXPECT_EQ(host_param_count(HostConfig{}), 60976u);
  for (int stage = 1; stage <= 4; ++stage) {
    const HostConfig c = with_sr(stage);
    EXPECT_EQ(host_param_count(c) - host_param_count(HostConfig{}), sr_param_count(c.resolved_sr()));
    Rng rng(5);
    EXPECT_EQ(host_init(c, rng).scalar_count(), host_param_count(c));
  }
  EXPECT_EQ(sr_param_count(with_sr(3).resolved_sr()), 16992u);
}

TEST(HostForward, ZeroMemorySrMatchesNoSr) {
  Rng rng(6);
  const HostConfig c_sr = with_sr(3), c_plain;
  const HostParams p_sr = host_init(c_sr, rng);
  HostParams p_plain = p_sr;
  p_plain.sr.reset();
  const Tensor x = random_tensor(Shape{4, 3, 32, 32}, rng);
  Rng r1(0), r2(0);
  EXPECT_TRUE(bitwise_equal(host_forward(c_sr, p_sr, x, Mode::eval, r1), host_forward(c_plain, p_plain, x, Mode::eval, r2)));
}

TEST(HostForward, EvalModeIgnoresDropout) {
  HostConfig c = tiny(true);
  c.dropout_kind = ops::DropoutKind::channel;
  c.dropout_p = 0.5f;
  Rng rng(7);
  const HostParams p = host_init(c, rng);
  const Tensor x = random_tensor(Shape{3, 3, 8, 8}, rng);
  HostConfig no_drop = c;
  no_drop.dropout_kind = ops::DropoutKind::none;
  Rng a(1), b(2), d(3);
  const Tensor y1 = host_forward(c, p, x, Mode::eval, a);
  EXPECT_TRUE(bitwise_equal(y1, host_forward(c, p, x, Mode::eval, b)));
  EXPECT_TRUE(bitwise_equal(y1, host_forward(no_drop, p, x, Mode::eval, d)));
  Rng before(1);
  EXPECT_EQ(a.next_u64(), before.next_u64());  // eval mode drew nothing
}

TEST(HostForward, LogitShapeAndFinite) {
  Rng rng(8);
  const HostConfig c = with_sr(4);
  const HostParams p = host_init(c, rng);
  const Tensor y = host_forward(c, p, random_tensor(Shape{5, 3, 32, 32}, rng), Mode::train, rng);
  EXPECT_EQ(y.shape(), (Shape{5, 10, 1, 1}));
  for (float v : y.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(HostForward, InputShapeMismatch) {
  Rng rng(9);
  const HostParams p = host_init(HostConfig{}, rng);
  EXPECT_THROW(host_forward(HostConfig{}, p, Tensor(Shape{1, 3, 16, 16}), Mode::eval, rng), DimensionError);
}

TEST(HostBackward, NeedsTrainModeCache) {
  Rng rng(10);
  const HostConfig c = tiny(true);
  const HostParams p = host_init(c, rng);
  HostCache cache;
  host_forward(c, p, Tensor(Shape{2, 3, 8, 8}), Mode::eval, rng, &cache);
  const std::vector<int> labels{0, 1};
  EXPECT_THROW(host_backward(c, p, cache, labels), UsageError);
  EXPECT_THROW(host_backward(c, p, HostCache{}, labels), UsageError);
}

TEST(HostBackward, ConfidentCorrectLogitsGiveTinyGradient) {
  const HostConfig c = tiny(false);
  Rng rng(11);
  HostParams p = host_init(c, rng);
  // Positive inputs and weights keep every activation alive; the classifier
  // then separates class 0 by a wide margin.
  for (auto& w : p.conv)
    for (float& v : w.data()) v = 0.1f + 0.1f * rng.uniform();
  p.classifier.fill(-50.0f);
  for (std::size_t k = 0; k < 8; ++k) p.classifier[k] = 50.0f;
  Tensor x(Shape{2, 3, 8, 8});
  for (float& v : x.data()) v = rng.uniform();
  HostCache cache;
  host_forward(c, p, x, Mode::train, rng, &cache);
  const std::vector<int> labels{0, 0};
  const HostGrads g = host_backward(c, p, cache, labels);
  double sq = 0.0;
  for_each_tensor(g.grads, [&](const std::string&, const Tensor& t) {
    for (float v : t.data()) sq += static_cast<double>(v) * v;
  });
  EXPECT_LE(std::sqrt(sq), 1e-5);
  EXPECT_LT(g.loss, 1e-6f);
}

TEST(HostBackward, ReproducibleWithSeededDropout) {
  HostConfig c = tiny(true);
  c.dropout_kind = ops::DropoutKind::channel;
  c.dropout_p = 0.3f;
  Rng init(12);
  const HostParams p = host_init(c, init);
  const Tensor x = random_tensor(Shape{4, 3, 8, 8}, init);
  const std::vector<int> labels{0, 1, 2, 1};
  auto run = [&] {
    Rng rng(99);
    HostCache cache;
    host_forward(c, p, x, Mode::train, rng, &cache);
    return host_backward(c, p, cache, labels).grads;
  };
  const HostParams a = run(), b = run();
  for_each_tensor(a, [&](const std::string& name, const Tensor& t) {
    for_each_tensor(b, [&](const std::string& other, const Tensor& u) {
      if (name == other) {
        EXPECT_TRUE(bitwise_equal(t, u)) << name;
      }
    });
  });
}

TEST(HostBackward, ThreadCountDoesNotChangeBits) {
  const int saved = ops::threads();
  const HostConfig c = with_sr(3);
  Rng init(13);
  HostParams p = host_init(c, init);
  for (float& v : p.sr->memory.data()) v = init.symmetric(0.1f);
  const Tensor x = random_tensor(Shape{8, 3, 32, 32}, init);
  const std::vector<int> labels{0, 1, 2, 3, 4, 5, 6, 7};
  auto run = [&](int threads) {
    ops::set_threads(threads);
    Rng rng(5);
    HostCache cache;
    host_forward(c, p, x, Mode::train, rng, &cache);
    return host_backward(c, p, cache, labels);
  };
  const HostGrads a = run(1), b = run(3);
  ops::set_threads(saved);
  EXPECT_EQ(std::bit_cast<std::uint32_t>(a.loss), std::bit_cast<std::uint32_t>(b.loss));
  EXPECT_TRUE(a.grads == b.grads);
}

TEST(HostTraining, LossFallsOverFiftyStepsOnFixedBatch) {
  const HostConfig c = tiny(true);
  double first = 0.0, last = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed);
    HostParams p = host_init(c, rng);
    const Tensor x = random_tensor(Shape{12, 3, 8, 8}, rng);
    std::vector<int> labels(12);
    for (std::size_t i = 0; i < 12; ++i) labels[i] = static_cast<int>(i % 3);
    TrainConfig tc;
    tc.lr0 = 0.05f;
    SgdState state;
    for (int step = 0; step < 50; ++step) {
      HostCache cache;
      host_forward(c, p, x, Mode::train, rng, &cache);
      const HostGrads g = host_backward(c, p, cache, labels);
      if (step == 0) first += g.loss;
      if (step == 49) last += g.loss;
      sgd_step(p, g.grads, state, tc, 0);
    }
  }
  EXPECT_LT(last / 3.0, first / 3.0);
}

TEST(Predict, LowestIndexWinsTies) {
  const Tensor logits(Shape{2, 3, 1, 1}, std::vector<float>{1, 5, 5, 0, 0, 0});
  EXPECT_EQ(predict(logits), (std::vector<int>{1, 0}));
}
