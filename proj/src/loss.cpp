#include "tplc/loss.hpp"

#include <cmath>
#include <complex>
#include <string>

#include "tplc/errors.hpp"

namespace tplc {

std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::mae_time: return "time";
    case LossKind::mae_mag: return "mag";
    case LossKind::mae_comb: return "comb";
  }
  return "?";
}

std::optional<LossKind> parse_loss_kind(std::string_view s) {
  if (s == "time" || s == "mae_time") return LossKind::mae_time;
  if (s == "mag" || s == "mae_mag") return LossKind::mae_mag;
  if (s == "comb" || s == "mae_comb") return LossKind::mae_comb;
  return std::nullopt;
}

void LossConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
  if (kind != LossKind::mae_time) stft.validate();
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw InvalidArgument("loss inputs differ in length: " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  if (a.empty()) throw InvalidArgument("loss inputs are empty");
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Both spectral terms, optionally with their gradient.
struct SpectralTerms {
  double magnitude = 0.0;
  double complex = 0.0;
};

SpectralTerms spectral(std::span<const double> predicted, std::span<const double> clean,
                       StftConfig cfg, double w_mag, double w_cplx, std::vector<double>* grad) {
  check_pair(predicted, clean);
  const auto plan = stft_plan(cfg);
  const Spectrogram P = plan->analyze(predicted);
  const Spectrogram C = plan->analyze(clean);
  const std::size_t n = P.data.size();
  const double inv = 1.0 / static_cast<double>(n);

  SpectralTerms terms;
  std::vector<double> g_re, g_im;
  if (grad) {
    g_re.assign(n, 0.0);
    g_im.assign(n, 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::complex<double> p = P.data[i], c = C.data[i];
    const double mp = std::abs(p);
    const double dm = mp - std::abs(c);
    const std::complex<double> d = p - c;
    const double md = std::abs(d);
    terms.magnitude += std::abs(dm);
    terms.complex += md;
    if (grad) {
      if (mp > 0.0) {
        const double s = w_mag * sign(dm) * inv / mp;
        g_re[i] += s * p.real();
        g_im[i] += s * p.imag();
      }
      if (md > 0.0) {
        const double s = w_cplx * inv / md;
        g_re[i] += s * d.real();
        g_im[i] += s * d.imag();
      }
    }
  }
  terms.magnitude *= inv;
  terms.complex *= inv;
  if (grad) *grad = plan->adjoint(g_re, g_im, predicted.size());
  return terms;
}

}  // namespace

double mae_time(std::span<const double> predicted, std::span<const double> clean) {
  check_pair(predicted, clean);
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) s += std::abs(predicted[i] - clean[i]);
  return s / static_cast<double>(predicted.size());
}

double mae_mag(std::span<const double> predicted, std::span<const double> clean, StftConfig stft) {
  return spectral(predicted, clean, stft, 0, 0, nullptr).magnitude;
}

double mae_complex(std::span<const double> predicted, std::span<const double> clean,
                   StftConfig stft) {
  return spectral(predicted, clean, stft, 0, 0, nullptr).complex;
}

double mae_comb(std::span<const double> predicted, std::span<const double> clean,
                StftConfig stft, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
  const auto t = spectral(predicted, clean, stft, 0, 0, nullptr);
  return (1.0 - alpha) * t.magnitude + alpha * t.complex;
}

double mae_time(const Signal& predicted, const Signal& clean) {
  return mae_time(to_double(predicted.samples), to_double(clean.samples));
}

double mae_mag(const Signal& predicted, const Signal& clean, StftConfig stft) {
  return mae_mag(to_double(predicted.samples), to_double(clean.samples), stft);
}

double mae_comb(const Signal& predicted, const Signal& clean, StftConfig stft, double alpha) {
  return mae_comb(to_double(predicted.samples), to_double(clean.samples), stft, alpha);
}

double evaluate_loss(const LossConfig& loss, std::span<const double> predicted,
                     std::span<const double> clean) {
  loss.validate();
  switch (loss.kind) {
    case LossKind::mae_time: return mae_time(predicted, clean);
    case LossKind::mae_mag: return mae_mag(predicted, clean, loss.stft);
    case LossKind::mae_comb: return mae_comb(predicted, clean, loss.stft, loss.alpha);
  }
  return 0.0;
}

LossValue loss_with_gradient(const LossConfig& loss, std::span<const double> predicted,
                             std::span<const double> clean) {
  loss.validate();
  LossValue out;
  if (loss.kind == LossKind::mae_time) {
    out.value = mae_time(predicted, clean);
    const double inv = 1.0 / static_cast<double>(predicted.size());
    out.gradient.resize(predicted.size());
    for (std::size_t i = 0; i < predicted.size(); ++i)
      out.gradient[i] = sign(predicted[i] - clean[i]) * inv;
    return out;
  }
  const double alpha = loss.kind == LossKind::mae_comb ? loss.alpha : 0.0;
  const auto t = spectral(predicted, clean, loss.stft, 1.0 - alpha, alpha, &out.gradient);
  out.value = (1.0 - alpha) * t.magnitude + alpha * t.complex;
  return out;
}

}  // namespace tplc
