#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "test_util.hpp"
#include "tplc/dsp.hpp"
#include "tplc/errors.hpp"

namespace tplc {
namespace {

// Direct DFT of one windowed frame, evaluated with std::polar per term.
std::vector<std::complex<double>> dft_oracle(const std::vector<double>& x, std::size_t start,
                                             std::size_t len) {
  std::vector<std::complex<double>> out(len / 2 + 1);
  for (std::size_t f = 0; f < out.size(); ++f) {
    std::complex<double> s = 0.0;
    for (std::size_t n = 0; n < len; ++n) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / len);
      s += w * x[start + n] * std::polar(1.0, -2.0 * std::numbers::pi * f * n / len);
    }
    out[f] = s;
  }
  return out;
}

TEST(Hann, EndpointAndMidpoint) {
  const Window w = make_hann(320);
  ASSERT_EQ(w.size(), 320u);
  EXPECT_EQ(w[0], 0.0);
  EXPECT_DOUBLE_EQ(w[160], 1.0);
}

TEST(Hann, ConstantOverlapAddAtHalfHop) {
  for (std::size_t len : {2u, 320u, 512u, 1024u}) {
    const Window w = make_hann(len);
    for (std::size_t k = 0; k < len / 2; ++k) EXPECT_NEAR(w[k] + w[k + len / 2], 1.0, 1e-12);
  }
}

TEST(Hann, RejectsOddOrZeroLength) {
  EXPECT_THROW(make_hann(0), InvalidArgument);
  EXPECT_THROW(make_hann(321), InvalidArgument);
}

TEST(OverlapAdd, ZeroInZeroOut) {
  const std::vector<double> z(320, 0.0);
  for (double v : overlap_add(z, z)) EXPECT_EQ(v, 0.0);
}

TEST(OverlapAdd, WindowedConstantReconstructsOne) {
  const Window& w = frame_window();
  const auto out = overlap_add(w.coefficients, w.coefficients);
  for (double v : out) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(OverlapAdd, WindowedSineStreamReconstructs) {
  // 440 Hz over three frames; windows cover frames (0,1) and (1,2).
  std::vector<double> s(480);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sin(2 * std::numbers::pi * 440.0 * i / 16000.0);
  const Window& w = frame_window();
  std::vector<double> a(320), b(320);
  for (std::size_t k = 0; k < 320; ++k) {
    a[k] = w[k] * s[k];
    b[k] = w[k] * s[160 + k];
  }
  const auto out = overlap_add(a, b);
  for (std::size_t k = 0; k < 160; ++k) EXPECT_NEAR(out[k], s[160 + k], 1e-6);
}

TEST(OverlapAdd, RejectsWrongLength) {
  EXPECT_THROW(overlap_add(std::vector<double>(319), std::vector<double>(320)), InvalidArgument);
}

TEST(Stft, ZeroSignalGivesZeroBins) {
  const auto spec = stft(std::vector<double>(2000, 0.0), StftConfig{32});
  EXPECT_EQ(spec.bins, 257u);
  EXPECT_EQ(spec.frames, (2000u - 512u) / 256u + 1u);
  for (const auto& c : spec.data) EXPECT_EQ(std::abs(c), 0.0);
}

TEST(Stft, ImpulseMagnitudeEqualsWindowCoefficient) {
  // Impulse at sample 0 sits on w[0] = 0; at sample 100 every bin has |w[100]|.
  std::vector<double> x(512, 0.0);
  x[0] = 1.0;
  const auto a = stft(x, StftConfig{32});
  for (std::size_t f = 0; f < a.bins; ++f) EXPECT_NEAR(std::abs(a.at(0, f)), 0.0, 1e-15);
  x[0] = 0.0;
  x[100] = 1.0;
  const auto b = stft(x, StftConfig{32});
  const double w100 = make_hann(512)[100];
  for (std::size_t f = 0; f < b.bins; ++f) EXPECT_NEAR(std::abs(b.at(0, f)), w100, 1e-12);
}

TEST(Stft, OneKilohertzPeaksAtBin32) {
  std::vector<double> x(512);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2 * std::numbers::pi * 1000.0 * i / 16000.0);
  const auto spec = stft(x, StftConfig{32});
  std::size_t best = 0;
  for (std::size_t f = 1; f < spec.bins; ++f)
    if (std::abs(spec.at(0, f)) > std::abs(spec.at(0, best))) best = f;
  EXPECT_EQ(best, 32u);
}

TEST(Stft, MatchesDirectDftForAllWindowSizes) {
  const auto x = testing::random_vector(2200, 3);
  for (int ms : {20, 32, 64}) {
    const StftConfig cfg{ms};
    const auto spec = stft(x, cfg);
    for (std::size_t t : {std::size_t{0}, spec.frames - 1}) {
      const auto ref = dft_oracle(x, t * cfg.hop(), cfg.window_length());
      for (std::size_t f = 0; f < spec.bins; ++f) {
        EXPECT_NEAR(spec.at(t, f).real(), ref[f].real(), 1e-9);
        EXPECT_NEAR(spec.at(t, f).imag(), ref[f].imag(), 1e-9);
      }
    }
  }
}

TEST(Stft, Linearity) {
  const auto x = testing::random_vector(1500, 4);
  std::vector<double> ax(x);
  for (double& v : ax) v *= -2.5;
  const auto s1 = stft(x, StftConfig{20});
  const auto s2 = stft(ax, StftConfig{20});
  for (std::size_t i = 0; i < s1.data.size(); ++i)
    EXPECT_LE(std::abs(s2.data[i] + 2.5 * s1.data[i]), 1e-12 * (1.0 + std::abs(s2.data[i])));
}

TEST(Stft, ParsevalPerFrame) {
  // sum_f c_f |X_f|^2 = (L/2) * ... with one-sided weights c_0 = c_{L/2} = 1, others 2:
  // sum over the full spectrum equals L * sum_n (w x)^2.
  const auto x = testing::random_vector(1024, 5);
  const StftConfig cfg{32};
  const auto spec = stft(x, cfg);
  const std::size_t L = cfg.window_length();
  const Window w = make_hann(L);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    double time_e = 0.0, freq_e = 0.0;
    for (std::size_t n = 0; n < L; ++n) time_e += std::pow(w[n] * x[t * cfg.hop() + n], 2);
    for (std::size_t f = 0; f < spec.bins; ++f) {
      const double c = (f == 0 || f == L / 2) ? 1.0 : 2.0;
      freq_e += c * std::norm(spec.at(t, f));
    }
    EXPECT_NEAR(freq_e / (L * time_e), 1.0, 1e-9);
  }
}

TEST(Stft, RejectsShortSignalAndBadWindow) {
  EXPECT_THROW(stft(std::vector<double>(511), StftConfig{32}), InvalidArgument);
  EXPECT_THROW(stft(std::vector<double>(4000), StftConfig{25}), InvalidArgument);
}

TEST(Stft, AdjointMatchesInnerProduct) {
  // <A x, g> == <x, A^T g> for random x and g.
  const StftConfig cfg{20};
  const auto plan = stft_plan(cfg);
  const auto x = testing::random_vector(1300, 8);
  const auto spec = plan->analyze(x);
  const auto gr = testing::random_vector(spec.data.size(), 9);
  const auto gi = testing::random_vector(spec.data.size(), 10);
  double lhs = 0.0;
  for (std::size_t i = 0; i < spec.data.size(); ++i)
    lhs += spec.data[i].real() * gr[i] + spec.data[i].imag() * gi[i];
  const auto back = plan->adjoint(gr, gi, x.size());
  double rhs = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
  EXPECT_NEAR(lhs, rhs, 1e-9 * std::abs(lhs));
}

}  // namespace
}  // namespace tplc
