#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tplc/errors.hpp"
#include "tplc/pipeline.hpp"
#include "tplc/train.hpp"

namespace tplc {

std::size_t TrainConfig::crop_samples() const {
  const auto frames = static_cast<std::size_t>(std::llround(crop_seconds * kSampleRate / kFrameLen));
  return frames * kFrameLen;
}

void TrainConfig::validate(std::size_t buffer_len) const {
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(plateau_factor > 0.0 && plateau_factor <= 1.0))
    throw InvalidArgument("plateau factor must lie in (0, 1]");
  if (plateau_patience < 1) throw InvalidArgument("plateau patience must be >= 1");
  if (!(grad_clip_norm > 0.0)) throw InvalidArgument("gradient clip norm must be positive");
  if (crop_samples() < 2 * kFrameLen) throw InvalidArgument("crop must cover at least 20 ms");
  if (!(trace_reverse_prob >= 0.0 && trace_reverse_prob <= 1.0))
    throw InvalidArgument("trace reversal probability must lie in [0, 1]");
  if (!(level_std_db >= 0.0)) throw InvalidArgument("level std must be >= 0");
  if (clean_context_frames + degraded_context_frames != buffer_len)
    throw InvalidArgument("clean + degraded context frames (" +
                          std::to_string(clean_context_frames) + " + " +
                          std::to_string(degraded_context_frames) + ") must equal buffer length " +
                          std::to_string(buffer_len));
}

double active_level_db(std::span<const double> x) {
  const std::size_t frames = x.size() / kFrameLen;
  std::vector<double> energy(frames, 0.0);
  double loudest = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t k = 0; k < kFrameLen; ++k) energy[f] += x[f * kFrameLen + k] * x[f * kFrameLen + k];
    loudest = std::max(loudest, energy[f]);
  }
  if (loudest <= 0.0) return -std::numeric_limits<double>::infinity();
  const double floor = loudest * 1e-4;  // -40 dB
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    if (energy[f] >= floor) {
      sum += energy[f];
      n += kFrameLen;
    }
  }
  return 10.0 * std::log10(sum / static_cast<double>(n));
}

AugmentedUtterance augment_utterance(const Signal& clean, const PacketTrace& trace,
                                     const TrainConfig& config, Rng& rng) {
  if (clean.size() == 0) throw InvalidArgument("cannot augment an empty utterance");
  if (trace.size() == 0) throw InvalidArgument("cannot augment with an empty trace");
  const std::size_t crop = config.crop_samples();
  AugmentedUtterance out;

  // Speech crop.
  out.clean.assign(crop, 0.0);
  if (clean.size() >= crop) {
    std::uniform_int_distribution<std::size_t> start(0, clean.size() - crop);
    const std::size_t s = start(rng);
    for (std::size_t i = 0; i < crop; ++i) out.clean[i] = clean.samples[s + i];
  } else {
    out.padded = true;
    for (std::size_t i = 0; i < clean.size(); ++i) out.clean[i] = clean.samples[i];
  }

  // Trace: optional reversal, then an independent crop in whole packets.
  PacketTrace t = trace;
  std::bernoulli_distribution flip(config.trace_reverse_prob);
  if (flip(rng)) t = reverse_trace(t);
  const std::size_t packets = (crop + kPacketLen - 1) / kPacketLen;
  out.trace.bits.assign(packets, 0);
  if (t.size() >= packets) {
    std::uniform_int_distribution<std::size_t> start(0, t.size() - packets);
    const std::size_t s = start(rng);
    std::copy_n(t.bits.begin() + static_cast<std::ptrdiff_t>(s), packets, out.trace.bits.begin());
  } else {
    std::copy(t.bits.begin(), t.bits.end(), out.trace.bits.begin());
  }

  // Level.
  out.target_level_db = config.level_mean_db;
  if (config.level_std_db > 0.0) {
    std::normal_distribution<double> level(config.level_mean_db, config.level_std_db);
    out.target_level_db = level(rng);
  }
  const double current = active_level_db(out.clean);
  if (std::isfinite(current)) {
    out.gain = std::pow(10.0, (out.target_level_db - current) / 20.0);
    double peak = 0.0;
    for (double v : out.clean) peak = std::max(peak, std::abs(v));
    if (peak * out.gain > 0.99) {
      out.gain = 0.99 / peak;
      out.clamped = true;
    }
    for (double& v : out.clean) v *= out.gain;
  }

  out.degraded = apply_trace(out.clean, out.trace);
  out.frame_mask = trace_to_frame_mask(out.trace, crop / kFrameLen);
  return out;
}

Tensor assemble_context(std::span<const double> clean, std::span<const double> recent,
                        std::size_t position, std::size_t buffer_len, std::size_t clean_frames) {
  Tensor ctx = Tensor::matrix(buffer_len, kFrameLen);
  for (std::size_t r = 0; r < buffer_len; ++r) {
    if (position + r < buffer_len) continue;  // before the stream start
    const std::size_t frame = position + r - buffer_len;
    std::span<const double> src = r < clean_frames ? clean : recent;
    const std::size_t begin = frame * kFrameLen;
    for (std::size_t k = 0; k < kFrameLen && begin + k < src.size(); ++k)
      ctx.at(r, k) = src[begin + k];
  }
  return ctx;
}

TrainingExample build_training_example(std::span<const double> clean_crop,
                                       std::span<const double> degraded_crop,
                                       const std::vector<bool>& frame_mask, std::size_t position,
                                       std::size_t buffer_len, std::size_t clean_frames) {
  if (clean_crop.size() != degraded_crop.size())
    throw InvalidArgument("clean and degraded crops differ in length");
  if (frame_mask.size() != frame_count(clean_crop.size()))
    throw InvalidArgument("frame mask does not match crop length");
  if (clean_frames > buffer_len) throw InvalidArgument("more clean frames than buffer slots");
  if (position < buffer_len || (position + 2) * kFrameLen > clean_crop.size())
    throw InvalidArgument("position " + std::to_string(position) +
                          " leaves no room for the context or the 320-sample target");
  TrainingExample ex;
  ex.context = assemble_context(clean_crop, degraded_crop, position, buffer_len, clean_frames);
  ex.target.assign(clean_crop.begin() + static_cast<std::ptrdiff_t>(position * kFrameLen),
                   clean_crop.begin() + static_cast<std::ptrdiff_t>((position + 2) * kFrameLen));
  return ex;
}

}  // namespace tplc
