#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tplc/dsp.hpp"

namespace tplc {

enum class LossKind { mae_time, mae_mag, mae_comb };

std::string_view to_string(LossKind k);
// time|mag|comb (also accepts the mae_ prefixed names).
std::optional<LossKind> parse_loss_kind(std::string_view s);

struct LossConfig {
  LossKind kind = LossKind::mae_comb;
  double alpha = 0.1;  // weight of the complex term, mae_comb only
  StftConfig stft{32};

  void validate() const;
};

// Mean absolute sample difference.
double mae_time(std::span<const double> predicted, std::span<const double> clean);
// Mean over TF bins of | |P| - |C| |.
double mae_mag(std::span<const double> predicted, std::span<const double> clean, StftConfig stft);
// Mean over TF bins of |P - C|.
double mae_complex(std::span<const double> predicted, std::span<const double> clean,
                   StftConfig stft);
// (1 - alpha) * mae_mag + alpha * mae_complex.
double mae_comb(std::span<const double> predicted, std::span<const double> clean,
                StftConfig stft, double alpha);

double mae_time(const Signal& predicted, const Signal& clean);
double mae_mag(const Signal& predicted, const Signal& clean, StftConfig stft);
double mae_comb(const Signal& predicted, const Signal& clean, StftConfig stft, double alpha);

double evaluate_loss(const LossConfig& loss, std::span<const double> predicted,
                     std::span<const double> clean);

struct LossValue {
  double value = 0.0;
  std::vector<double> gradient;  // dL/dpredicted
};

// Exact gradient through the STFT. |.| has subgradient 0 at 0.
LossValue loss_with_gradient(const LossConfig& loss, std::span<const double> predicted,
                             std::span<const double> clean);

inline std::vector<double> loss_gradient(const LossConfig& loss, std::span<const double> predicted,
                                         std::span<const double> clean) {
  return loss_with_gradient(loss, predicted, clean).gradient;
}

}  // namespace tplc
