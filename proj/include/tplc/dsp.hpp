#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace tplc {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kFrameLen = 160;               // 10 ms
inline constexpr std::size_t kWindowLen = 2 * kFrameLen;    // current + look-ahead

// One 10 ms frame as delivered by / handed back to the audio path.
using Frame = std::array<float, kFrameLen>;

// Mono 16 kHz audio. Samples are single precision; DSP runs in double.
struct Signal {
  static constexpr int sample_rate = kSampleRate;
  std::vector<float> samples;

  std::size_t size() const { return samples.size(); }
  bool operator==(const Signal&) const = default;
};

std::vector<double> to_double(std::span<const float> x);
std::vector<float> to_float(std::span<const double> x);

// Periodic (DFT-even) hann window: w[k] = 0.5 (1 - cos(2 pi k / N)).
struct Window {
  std::vector<double> coefficients;
  std::size_t size() const { return coefficients.size(); }
  double operator[](std::size_t k) const { return coefficients[k]; }
};

// Throws InvalidArgument for zero or odd length.
Window make_hann(std::size_t length);

// The 320/160 analysis window shared by pipeline and trainer.
const Window& frame_window();

// output[k] = prev_windowed[k + 160] + curr_windowed[k].
std::array<double, kFrameLen> overlap_add(std::span<const double> prev_windowed,
                                          std::span<const double> curr_windowed);

struct StftConfig {
  int window_ms = 32;

  // Throws InvalidArgument unless window_ms is 20, 32 or 64.
  void validate() const;
  std::size_t window_length() const { return static_cast<std::size_t>(window_ms) * 16; }
  std::size_t hop() const { return window_length() / 2; }
  std::size_t bins() const { return window_length() / 2 + 1; }
  // Number of full frames over n samples (no padding); 0 if n < window.
  std::size_t frames_for(std::size_t n) const;
};

struct Spectrogram {
  StftConfig config;
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<double>> data;  // frame-major

  const std::complex<double>& at(std::size_t t, std::size_t f) const { return data[t * bins + f]; }
};

// Precomputed real-input DFT over one window length: windowed frames are
// projected onto cos/sin rows, which keeps both the analysis and its adjoint
// on the dense kernels.
class StftPlan {
 public:
  explicit StftPlan(StftConfig config);

  const StftConfig& config() const { return config_; }
  const Window& window() const { return window_; }

  Spectrogram analyze(std::span<const double> signal) const;

  // Adjoint of analyze: given dL/dRe and dL/dIm per bin (frame-major,
  // frames x bins), returns dL/dsignal for a signal of n samples.
  std::vector<double> adjoint(std::span<const double> grad_re, std::span<const double> grad_im,
                              std::size_t n) const;

 private:
  StftConfig config_;
  Window window_;
  std::vector<double> cos_;  // bins x L
  std::vector<double> sin_;  // bins x L
};

// Shared, immutable plan per window size.
std::shared_ptr<const StftPlan> stft_plan(StftConfig config);

// Throws InvalidArgument if the signal is shorter than one window.
Spectrogram stft(std::span<const double> signal, StftConfig config);
Spectrogram stft(const Signal& signal, StftConfig config);

}  // namespace tplc
