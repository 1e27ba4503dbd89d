#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "tplc/dsp.hpp"
#include "tplc/model.hpp"

namespace tplc {

struct PipelineConfig {
  std::size_t buffer_len = 6;
  // Neural concealer weights; null selects zero filling.
  std::shared_ptr<const WeightSet> model;

  static PipelineConfig zero_fill(std::size_t buffer_len = 6) { return {buffer_len, nullptr}; }
  static PipelineConfig neural(std::shared_ptr<const WeightSet> weights) {
    const std::size_t n = weights ? weights->config.buffer_len : 0;
    return {n, std::move(weights)};
  }
};

enum class FrameOrigin : std::uint8_t { silence, received, concealed };

// A received frame, or nullopt for a lost packet.
using FrameInput = std::optional<Frame>;

// Streaming concealer with one frame of look-ahead.
//
// Each push supplies frame x+1 and emits the output for frame x. When x and
// x+1 are both intact the 320-sample window is their concatenation;
// otherwise it is a prediction from the context ring (frames up to x-1).
// The hann-windowed candidate is overlap-added with the previous one, and
// the emitted frame is written back into the ring.
class PlcPipeline {
 public:
  // Throws InvalidArgument if buffer_len < 2 or the weights disagree with it.
  explicit PlcPipeline(PipelineConfig config);

  // First call returns nullopt (fills the look-ahead slot).
  std::optional<Frame> push_frame(const FrameInput& frame);
  // Throws InvalidArgument unless exactly 160 samples.
  std::optional<Frame> push_frame(std::span<const float> samples);
  std::optional<Frame> push_frame(const Frame& frame) { return push_frame(FrameInput{frame}); }
  std::optional<Frame> push_lost() { return push_frame(FrameInput{}); }

  // Emits the pending frame by pushing one intact zero frame. The stream can
  // be restarted afterwards. Throws InvalidState if nothing is pending.
  Frame flush();

  const PipelineConfig& config() const { return config_; }
  bool uses_model() const { return config_.model != nullptr; }
  std::uint64_t frames_pushed() const { return frames_pushed_; }
  std::uint64_t model_invocations() const { return model_invocations_; }

  // Context ring, oldest -> newest.
  Tensor context() const;
  std::vector<FrameOrigin> context_origins() const;

 private:
  void write_back(const std::array<double, kFrameLen>& frame, FrameOrigin origin);

  PipelineConfig config_;
  std::vector<std::array<double, kFrameLen>> ring_;
  std::vector<FrameOrigin> origins_;
  std::size_t head_ = 0;  // slot of the oldest frame
  std::vector<double> prev_windowed_;
  bool has_pending_ = false;
  FrameInput pending_;
  std::uint64_t frames_pushed_ = 0;
  std::uint64_t model_invocations_ = 0;
};

// Streams a whole signal through a fresh pipeline. mask[k] marks 10 ms frame
// k lost; mask length must be ceil(size / 160). The final partial frame is
// zero padded and the output is trimmed back, time aligned with the input.
Signal conceal_signal(const Signal& signal, const std::vector<bool>& frame_mask,
                      const PipelineConfig& config);

std::size_t frame_count(std::size_t samples);

}  // namespace tplc
