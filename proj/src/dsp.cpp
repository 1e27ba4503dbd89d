#include "tplc/dsp.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "tplc/errors.hpp"
#include "tplc/simd/kernels.hpp"

namespace tplc {

std::vector<double> to_double(std::span<const float> x) { return {x.begin(), x.end()}; }

std::vector<float> to_float(std::span<const double> x) {
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(x[i]);
  return out;
}

Window make_hann(std::size_t length) {
  if (length < 2 || length % 2 != 0)
    throw InvalidArgument("hann window length must be even and >= 2, got " +
                          std::to_string(length));
  Window w;
  w.coefficients.resize(length);
  const double n = static_cast<double>(length);
  for (std::size_t k = 0; k < length; ++k)
    w.coefficients[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / n));
  return w;
}

const Window& frame_window() {
  static const Window w = make_hann(kWindowLen);
  return w;
}

std::array<double, kFrameLen> overlap_add(std::span<const double> prev_windowed,
                                          std::span<const double> curr_windowed) {
  if (prev_windowed.size() != kWindowLen || curr_windowed.size() != kWindowLen)
    throw InvalidArgument("overlap_add expects two 320-sample windows");
  std::array<double, kFrameLen> out{};
  for (std::size_t k = 0; k < kFrameLen; ++k)
    out[k] = prev_windowed[k + kFrameLen] + curr_windowed[k];
  return out;
}

void StftConfig::validate() const {
  if (window_ms != 20 && window_ms != 32 && window_ms != 64)
    throw InvalidArgument("STFT window must be 20, 32 or 64 ms, got " + std::to_string(window_ms));
}

std::size_t StftConfig::frames_for(std::size_t n) const {
  const std::size_t len = window_length();
  return n < len ? 0 : (n - len) / hop() + 1;
}

StftPlan::StftPlan(StftConfig config) : config_(config) {
  config_.validate();
  const std::size_t len = config_.window_length();
  const std::size_t bins = config_.bins();
  window_ = make_hann(len);
  cos_.resize(bins * len);
  sin_.resize(bins * len);
  for (std::size_t f = 0; f < bins; ++f) {
    for (std::size_t n = 0; n < len; ++n) {
      // Reduce f*n mod len first so the phase argument stays exact.
      const double phase = 2.0 * std::numbers::pi * static_cast<double>((f * n) % len) /
                           static_cast<double>(len);
      cos_[f * len + n] = std::cos(phase);
      sin_[f * len + n] = std::sin(phase);
    }
  }
}

Spectrogram StftPlan::analyze(std::span<const double> signal) const {
  const std::size_t len = config_.window_length();
  const std::size_t hop = config_.hop();
  const std::size_t bins = config_.bins();
  if (signal.size() < len)
    throw InvalidArgument("signal of " + std::to_string(signal.size()) +
                          " samples is shorter than the " + std::to_string(len) +
                          "-sample STFT window");
  const auto& k = simd::kernels();
  Spectrogram spec;
  spec.config = config_;
  spec.frames = config_.frames_for(signal.size());
  spec.bins = bins;
  spec.data.resize(spec.frames * bins);

  std::vector<double> frame(len), re(bins), im(bins);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const double* src = signal.data() + t * hop;
    for (std::size_t n = 0; n < len; ++n) frame[n] = window_.coefficients[n] * src[n];
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    k.mat_vec(cos_.data(), bins, len, len, frame.data(), re.data());
    k.mat_vec(sin_.data(), bins, len, len, frame.data(), im.data());
    for (std::size_t f = 0; f < bins; ++f) spec.data[t * bins + f] = {re[f], -im[f]};
  }
  return spec;
}

std::vector<double> StftPlan::adjoint(std::span<const double> grad_re,
                                      std::span<const double> grad_im, std::size_t n) const {
  const std::size_t len = config_.window_length();
  const std::size_t hop = config_.hop();
  const std::size_t bins = config_.bins();
  const std::size_t frames = config_.frames_for(n);
  if (grad_re.size() != frames * bins || grad_im.size() != frames * bins)
    throw InvalidArgument("STFT adjoint: gradient size does not match frame count");
  const auto& k = simd::kernels();
  std::vector<double> out(n, 0.0);
  std::vector<double> acc(len), neg_im(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(acc.begin(), acc.end(), 0.0);
    // Im X = -sum w x sin, so its adjoint carries a minus sign.
    for (std::size_t f = 0; f < bins; ++f) neg_im[f] = -grad_im[t * bins + f];
    k.vec_mat(grad_re.data() + t * bins, cos_.data(), bins, len, len, acc.data());
    k.vec_mat(neg_im.data(), sin_.data(), bins, len, len, acc.data());
    double* dst = out.data() + t * hop;
    for (std::size_t i = 0; i < len; ++i) dst[i] += window_.coefficients[i] * acc[i];
  }
  return out;
}

std::shared_ptr<const StftPlan> stft_plan(StftConfig config) {
  config.validate();
  static std::mutex mu;
  static std::map<int, std::shared_ptr<const StftPlan>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[config.window_ms];
  if (!slot) slot = std::make_shared<const StftPlan>(config);
  return slot;
}

Spectrogram stft(std::span<const double> signal, StftConfig config) {
  return stft_plan(config)->analyze(signal);
}

Spectrogram stft(const Signal& signal, StftConfig config) {
  const auto x = to_double(signal.samples);
  return stft(std::span<const double>(x), config);
}

}  // namespace tplc
