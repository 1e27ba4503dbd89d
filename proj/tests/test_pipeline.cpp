#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "test_util.hpp"
#include "tplc/errors.hpp"
#include "tplc/pipeline.hpp"

namespace tplc {
namespace {

std::vector<float> random_audio(std::size_t n, std::uint64_t seed, float scale = 0.5f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-scale, scale);
  std::vector<float> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

Frame frame_at(const std::vector<float>& x, std::size_t i) {
  Frame f{};
  for (std::size_t k = 0; k < kFrameLen && i * kFrameLen + k < x.size(); ++k) f[k] = x[i * kFrameLen + k];
  return f;
}

std::vector<bool> random_mask(std::size_t n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution d(p);
  std::vector<bool> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = d(rng);
  return m;
}

// Offline zero-fill concealment written directly from the window algebra:
// every frame is replaced by zeros when lost, frame -1 and the flush frame
// are silence, and output frame i is the sum of the second half of window
// (i-1, i) and the first half of window (i, i+1).
std::vector<double> zero_fill_oracle(const std::vector<float>& x, const std::vector<bool>& mask) {
  const std::size_t frames = mask.size();
  std::vector<double> z((frames + 2) * kFrameLen, 0.0);  // silence, frames..., flush
  for (std::size_t i = 0; i < frames; ++i)
    if (!mask[i])
      for (std::size_t k = 0; k < kFrameLen && i * kFrameLen + k < x.size(); ++k)
        z[(i + 1) * kFrameLen + k] = x[i * kFrameLen + k];
  std::vector<double> y(frames * kFrameLen);
  for (std::size_t i = 0; i < frames; ++i)
    for (std::size_t k = 0; k < kFrameLen; ++k) {
      const double w_hi = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * (k + 160) / 320.0);
      const double w_lo = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * k / 320.0);
      y[i * kFrameLen + k] = w_hi * z[(i + 1) * kFrameLen + k] + w_lo * z[(i + 1) * kFrameLen + k];
    }
  return y;
}

TEST(Pipeline, FreshContextIsSilence) {
  PlcPipeline p(PipelineConfig::zero_fill(6));
  const Tensor c = p.context();
  EXPECT_EQ(c.dims(), (std::vector<std::size_t>{6, kFrameLen}));
  for (double v : c.values()) EXPECT_EQ(v, 0.0);
  for (FrameOrigin o : p.context_origins()) EXPECT_EQ(o, FrameOrigin::silence);
  EXPECT_EQ(p.frames_pushed(), 0u);
}

TEST(Pipeline, BufferLengthOneRejected) {
  EXPECT_THROW(PlcPipeline(PipelineConfig::zero_fill(1)), InvalidArgument);
}

TEST(Pipeline, WeightsMustMatchBufferLength) {
  auto w = std::make_shared<const WeightSet>(init_weights(ModelConfig::toy(4), 1));
  EXPECT_THROW(PlcPipeline(PipelineConfig{6, w}), InvalidArgument);
  EXPECT_NO_THROW(PlcPipeline(PipelineConfig::neural(w)));
}

TEST(Pipeline, MalformedFrameLengthRejected) {
  PlcPipeline p(PipelineConfig::zero_fill());
  const std::vector<float> short_frame(159);
  EXPECT_THROW(p.push_frame(std::span<const float>(short_frame)), InvalidArgument);
}

TEST(Pipeline, LossFreeStreamIsDelayedIdentity) {
  // 10 s sine plus noise.
  const std::size_t frames = 1000;
  auto x = random_audio(frames * kFrameLen, 1, 0.1f);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] += 0.5f * static_cast<float>(std::sin(2 * std::numbers::pi * 440.0 * i / 16000.0));
  PlcPipeline p(PipelineConfig::zero_fill());
  EXPECT_FALSE(p.push_frame(frame_at(x, 0)).has_value());
  double max_err = 0.0;
  for (std::size_t i = 1; i < frames; ++i) {
    const auto y = p.push_frame(frame_at(x, i));
    ASSERT_TRUE(y.has_value());
    const Frame expected = frame_at(x, i - 1);
    for (std::size_t k = 0; k < kFrameLen; ++k)
      max_err = std::max(max_err, std::abs(static_cast<double>((*y)[k]) - expected[k]));
  }
  EXPECT_LE(max_err, 1e-6);
  EXPECT_EQ(p.model_invocations(), 0u);
}

TEST(Pipeline, LatencyIsExactlyOneFrame) {
  // An impulse pushed in frame 3 at offset 17 appears in the output returned
  // by the next push, at the same offset.
  PlcPipeline p(PipelineConfig::zero_fill());
  std::size_t pushes = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    Frame f{};
    if (i == 3) f[17] = 1.0f;
    const auto y = p.push_frame(f);
    ++pushes;
    if (!y) continue;
    for (std::size_t k = 0; k < kFrameLen; ++k) {
      const bool here = (pushes == 5 && k == 17);
      EXPECT_NEAR((*y)[k], here ? 1.0f : 0.0f, 1e-7) << "push " << pushes << " k " << k;
    }
  }
}

TEST(Pipeline, ZeroFillSingleLostFrameInConstantStream) {
  const std::size_t frames = 8, lost = 4;
  const std::vector<float> x(frames * kFrameLen, 1.0f);
  std::vector<bool> mask(frames, false);
  mask[lost] = true;
  const Signal y = conceal_signal(Signal{x}, mask, PipelineConfig::zero_fill());
  const auto ref = zero_fill_oracle(x, mask);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.samples[i], ref[i], 1e-6) << i;
  // Both windows covering the lost frame carry zeros there; the neighbours
  // still sum to the full window.
  for (std::size_t k = 0; k < kFrameLen; ++k) {
    EXPECT_NEAR(y.samples[lost * kFrameLen + k], 0.0, 1e-7);
    EXPECT_NEAR(y.samples[(lost - 1) * kFrameLen + k], 1.0, 1e-6);
    EXPECT_NEAR(y.samples[(lost + 1) * kFrameLen + k], 1.0, 1e-6);
  }
}

TEST(Pipeline, ZeroFillMatchesOfflineOracleOnRandomMask) {
  const std::size_t frames = 120;
  const auto x = random_audio(frames * kFrameLen - 37, 3);
  const auto mask = random_mask(frames, 0.3, 4);
  const Signal y = conceal_signal(Signal{x}, mask, PipelineConfig::zero_fill());
  const auto ref = zero_fill_oracle(x, mask);
  ASSERT_EQ(y.size(), x.size());
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.samples[i], ref[i], 1e-6) << i;
}

TEST(Pipeline, ZeroWeightModelBehavesLikeZeroFill) {
  auto w = std::make_shared<const WeightSet>(zero_weights(ModelConfig::toy()));
  const std::size_t frames = 60;
  const auto x = random_audio(frames * kFrameLen, 5);
  const auto mask = random_mask(frames, 0.25, 6);
  const Signal a = conceal_signal(Signal{x}, mask, PipelineConfig::neural(w));
  const Signal b = conceal_signal(Signal{x}, mask, PipelineConfig::zero_fill());
  // Both concealers put zeros in every window that touches a loss, so lost
  // frames are silent in both; frames away from losses pass through.
  for (std::size_t i = 0; i < frames; ++i) {
    const bool near_loss = mask[i] || (i > 0 && mask[i - 1]) || (i + 1 < frames && mask[i + 1]);
    for (std::size_t k = 0; k < kFrameLen; ++k) {
      const std::size_t s = i * kFrameLen + k;
      if (mask[i]) {
        EXPECT_EQ(a.samples[s], 0.0f);
        EXPECT_EQ(b.samples[s], 0.0f);
      } else if (!near_loss) {
        EXPECT_EQ(a.samples[s], b.samples[s]);
      }
    }
  }
}

TEST(Pipeline, FlushCounts) {
  for (std::size_t n : {1u, 2u, 7u}) {
    PlcPipeline p(PipelineConfig::zero_fill());
    std::size_t outputs = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (p.push_frame(Frame{})) ++outputs;
    p.flush();
    ++outputs;
    EXPECT_EQ(outputs, n);
  }
}

TEST(Pipeline, FlushOnFreshPipelineThrows) {
  PlcPipeline p(PipelineConfig::zero_fill());
  EXPECT_THROW(p.flush(), InvalidState);
  p.push_frame(Frame{});
  p.flush();
  EXPECT_THROW(p.flush(), InvalidState);
}

TEST(Pipeline, ModelRunsOncePerWindowTouchingALoss) {
  auto w = std::make_shared<const WeightSet>(init_weights(ModelConfig::toy(), 2));
  const std::size_t frames = 80;
  const auto x = random_audio(frames * kFrameLen, 7);
  const auto mask = random_mask(frames, 0.2, 8);
  PlcPipeline p(PipelineConfig::neural(w));
  std::size_t expected = 0;
  for (std::size_t i = 0; i < frames; ++i) {
    if (i > 0 && (mask[i - 1] || mask[i])) ++expected;
    mask[i] ? p.push_lost() : p.push_frame(frame_at(x, i));
    EXPECT_EQ(p.model_invocations(), expected) << "after push " << i;
  }
  p.flush();
  if (mask[frames - 1]) ++expected;
  EXPECT_EQ(p.model_invocations(), expected);
}

TEST(Pipeline, ConcealedOutputIsWrittenBack) {
  auto w = std::make_shared<const WeightSet>(init_weights(ModelConfig::toy(), 3));
  const auto x = random_audio(10 * kFrameLen, 9);
  PlcPipeline p(PipelineConfig::neural(w));
  for (std::size_t i = 0; i < 5; ++i) p.push_frame(frame_at(x, i));
  const auto y = p.push_lost();  // emits frame 4 from window (4, lost 5)
  ASSERT_TRUE(y.has_value());
  const Tensor c = p.context();
  for (std::size_t k = 0; k < kFrameLen; ++k) {
    EXPECT_NEAR(c.at(5, k), (*y)[k], 1e-6);
  }
  EXPECT_EQ(p.context_origins()[5], FrameOrigin::concealed);
  EXPECT_EQ(p.context_origins()[4], FrameOrigin::received);
  bool nonzero = false;
  for (std::size_t k = 0; k < kFrameLen; ++k) nonzero = nonzero || c.at(5, k) != 0.0;
  EXPECT_TRUE(nonzero);
}

TEST(Pipeline, ContextHoldsStrictlyPastFrames) {
  // Frames pushed: 0..4; emitted: 0..3. Newest context row is output 3.
  const auto x = random_audio(6 * kFrameLen, 10);
  PlcPipeline p(PipelineConfig::zero_fill(3));
  for (std::size_t i = 0; i < 5; ++i) p.push_frame(frame_at(x, i));
  const Tensor c = p.context();
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t k = 0; k < kFrameLen; ++k) EXPECT_NEAR(c.at(r, k), x[(r + 1) * kFrameLen + k], 1e-6);
}

TEST(ConcealSignal, AllIntactReturnsInputIncludingFirstFrame) {
  const auto x = random_audio(50 * kFrameLen + 11, 11);
  const Signal y = conceal_signal(Signal{x}, std::vector<bool>(51, false), PipelineConfig::zero_fill());
  ASSERT_EQ(y.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.samples[i], x[i], 1e-6) << i;
}

TEST(ConcealSignal, AllLostZeroFillIsSilent) {
  const auto x = random_audio(20 * kFrameLen, 12);
  const Signal y = conceal_signal(Signal{x}, std::vector<bool>(20, true), PipelineConfig::zero_fill());
  for (float v : y.samples) EXPECT_EQ(v, 0.0f);
}

TEST(ConcealSignal, MaskLengthMismatchThrows) {
  const Signal s{std::vector<float>(1600)};
  EXPECT_THROW(conceal_signal(s, std::vector<bool>(9), PipelineConfig::zero_fill()), InvalidArgument);
  EXPECT_THROW(conceal_signal(s, std::vector<bool>(11), PipelineConfig::zero_fill()), InvalidArgument);
}

TEST(ConcealSignal, EqualsHandSteppedPushSequence) {
  auto w = std::make_shared<const WeightSet>(init_weights(ModelConfig::toy(), 4));
  const std::size_t frames = 40;
  const auto x = random_audio(frames * kFrameLen - 50, 13);
  const auto mask = random_mask(frames, 0.3, 14);
  const Signal batch = conceal_signal(Signal{x}, mask, PipelineConfig::neural(w));

  PlcPipeline p(PipelineConfig::neural(w));
  std::vector<float> stepped;
  for (std::size_t i = 0; i < frames; ++i) {
    const auto y = mask[i] ? p.push_lost() : p.push_frame(frame_at(x, i));
    if (y) stepped.insert(stepped.end(), y->begin(), y->end());
  }
  const Frame last = p.flush();
  stepped.insert(stepped.end(), last.begin(), last.end());
  stepped.resize(x.size());
  EXPECT_EQ(batch.samples, stepped);
}

TEST(ConcealSignal, EmptySignal) {
  EXPECT_EQ(conceal_signal(Signal{}, {}, PipelineConfig::zero_fill()).size(), 0u);
}

}  // namespace
}  // namespace tplc
