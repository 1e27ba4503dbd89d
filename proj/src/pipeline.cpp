#include "tplc/pipeline.hpp"

#include <algorithm>
#include <string>

#include "tplc/errors.hpp"

namespace tplc {

std::size_t frame_count(std::size_t samples) { return (samples + kFrameLen - 1) / kFrameLen; }

PlcPipeline::PlcPipeline(PipelineConfig config) : config_(std::move(config)) {
  if (config_.buffer_len < 2)
    throw InvalidArgument("context buffer needs at least 2 frames, got " +
                          std::to_string(config_.buffer_len));
  if (config_.model) {
    config_.model->validate();
    if (config_.model->config.buffer_len != config_.buffer_len)
      throw InvalidArgument("model expects a " +
                            std::to_string(config_.model->config.buffer_len) +
                            "-frame context, pipeline has " + std::to_string(config_.buffer_len));
  }
  ring_.assign(config_.buffer_len, {});
  origins_.assign(config_.buffer_len, FrameOrigin::silence);
  prev_windowed_.assign(kWindowLen, 0.0);
}

std::optional<Frame> PlcPipeline::push_frame(std::span<const float> samples) {
  if (samples.size() != kFrameLen)
    throw InvalidArgument("frame must have 160 samples, got " + std::to_string(samples.size()));
  Frame f;
  std::copy(samples.begin(), samples.end(), f.begin());
  return push_frame(FrameInput{f});
}

std::optional<Frame> PlcPipeline::push_frame(const FrameInput& next) {
  ++frames_pushed_;
  if (!has_pending_) {
    // Prime the overlap with the window over (silence, first frame) so that
    // the first emitted frame is not faded in.
    std::fill(prev_windowed_.begin(), prev_windowed_.end(), 0.0);
    if (next) {
      const Window& w = frame_window();
      for (std::size_t k = 0; k < kFrameLen; ++k)
        prev_windowed_[kFrameLen + k] = w[kFrameLen + k] * (*next)[k];
    }
    pending_ = next;
    has_pending_ = true;
    return std::nullopt;
  }

  const Window& w = frame_window();
  std::vector<double> candidate(kWindowLen, 0.0);
  const bool intact = pending_.has_value() && next.has_value();
  if (!intact && config_.model) {
    const Prediction p = predict(context(), *config_.model);
    ++model_invocations_;
    for (std::size_t k = 0; k < kWindowLen; ++k) candidate[k] = w[k] * p[k];
  } else {
    // Intact pair, or zero filling with lost halves left at zero.
    if (pending_)
      for (std::size_t k = 0; k < kFrameLen; ++k) candidate[k] = w[k] * (*pending_)[k];
    if (next)
      for (std::size_t k = 0; k < kFrameLen; ++k)
        candidate[kFrameLen + k] = w[kFrameLen + k] * (*next)[k];
  }

  const auto out = overlap_add(prev_windowed_, candidate);
  prev_windowed_ = std::move(candidate);
  write_back(out, intact ? FrameOrigin::received : FrameOrigin::concealed);
  pending_ = next;

  Frame f;
  for (std::size_t k = 0; k < kFrameLen; ++k) f[k] = static_cast<float>(out[k]);
  return f;
}

Frame PlcPipeline::flush() {
  if (!has_pending_) throw InvalidState("flush called with no pending frame");
  Frame zero{};
  auto out = push_frame(FrameInput{zero});
  has_pending_ = false;
  pending_.reset();
  return *out;
}

void PlcPipeline::write_back(const std::array<double, kFrameLen>& frame, FrameOrigin origin) {
  ring_[head_] = frame;
  origins_[head_] = origin;
  head_ = (head_ + 1) % ring_.size();
}

Tensor PlcPipeline::context() const {
  const std::size_t n = ring_.size();
  Tensor t = Tensor::matrix(n, kFrameLen);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& src = ring_[(head_ + i) % n];
    std::copy(src.begin(), src.end(), t.data() + i * kFrameLen);
  }
  return t;
}

std::vector<FrameOrigin> PlcPipeline::context_origins() const {
  const std::size_t n = origins_.size();
  std::vector<FrameOrigin> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = origins_[(head_ + i) % n];
  return out;
}

Signal conceal_signal(const Signal& signal, const std::vector<bool>& frame_mask,
                      const PipelineConfig& config) {
  const std::size_t frames = frame_count(signal.size());
  if (frame_mask.size() != frames)
    throw InvalidArgument("mask has " + std::to_string(frame_mask.size()) +
                          " entries, signal needs " + std::to_string(frames));
  Signal out;
  out.samples.reserve(frames * kFrameLen);
  if (frames == 0) return out;

  PlcPipeline pipe(config);
  auto emit = [&](const Frame& f) { out.samples.insert(out.samples.end(), f.begin(), f.end()); };
  for (std::size_t i = 0; i < frames; ++i) {
    FrameInput in;
    if (!frame_mask[i]) {
      Frame f{};
      const std::size_t begin = i * kFrameLen;
      const std::size_t end = std::min(signal.size(), begin + kFrameLen);
      std::copy(signal.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                signal.samples.begin() + static_cast<std::ptrdiff_t>(end), f.begin());
      in = f;
    }
    if (auto y = pipe.push_frame(in)) emit(*y);
  }
  emit(pipe.flush());
  out.samples.resize(signal.size());
  return out;
}

}  // namespace tplc
