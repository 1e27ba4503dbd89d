#include "tplc/synth.hpp"

#include <cmath>
#include <numbers>
#include <algorithm>
#include <random>

namespace tplc {

Signal synth_speech(double seconds, std::uint64_t seed, double level) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const auto n = static_cast<std::size_t>(seconds * kSampleRate);
  Signal s;
  s.samples.assign(n, 0.0f);

  std::size_t pos = 0;
  while (pos < n) {
    const auto len = static_cast<std::size_t>((0.15 + 0.35 * uni(rng)) * kSampleRate);
    const double f0_start = 90.0 + 160.0 * uni(rng);
    const double f0_end = f0_start * (0.8 + 0.4 * uni(rng));
    const double tilt = 0.5 + 0.4 * uni(rng);
    double phase = 0.0;
    for (std::size_t i = 0; i < len && pos + i < n; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(len);
      const double f0 = f0_start + (f0_end - f0_start) * t;
      phase += 2.0 * std::numbers::pi * f0 / kSampleRate;
      double v = 0.0, amp = 1.0;
      for (int h = 1; h <= 12 && h * f0 < 7000.0; ++h, amp *= tilt) v += amp * std::sin(h * phase);
      const double env = std::sin(std::numbers::pi * t);
      s.samples[pos + i] = static_cast<float>(level * 0.5 * env * v);
    }
    pos += len;
    pos += static_cast<std::size_t>(0.02 * kSampleRate + 0.08 * kSampleRate * uni(rng));
  }
  return s;
}

PacketTrace synth_trace(std::size_t packets, double loss_prob, double mean_burst,
                        std::size_t max_burst, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  // Stationary loss rate p with mean burst length b: leave-bad prob 1/b,
  // enter-bad prob p / (b (1 - p)).
  const double b = std::max(1.0, mean_burst);
  const double p = std::clamp(loss_prob, 0.0, 0.95);
  const double enter = p / (b * (1.0 - p));
  const double leave = 1.0 / b;
  PacketTrace t;
  t.bits.assign(packets, 0);
  bool bad = false;
  std::size_t run = 0;
  for (std::size_t i = 0; i < packets; ++i) {
    bad = bad ? uni(rng) >= leave : uni(rng) < enter;
    if (bad && max_burst > 0 && run >= max_burst) bad = false;
    run = bad ? run + 1 : 0;
    t.bits[i] = bad ? 1 : 0;
  }
  return t;
}

}  // namespace tplc
