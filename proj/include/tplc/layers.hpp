#pragma once

// Forward and reverse passes for the layer types of the concealment network.
// Backward functions accumulate into the gradient tensors they are given so
// a caller can sum over many examples without extra copies.

#include <span>
#include <vector>

#include "tplc/tensor.hpp"

namespace tplc {

enum class Activation { none, relu, leaky_relu };

inline constexpr double kDefaultLeakySlope = 0.01;

// ---- Dense ---------------------------------------------------------------

// input (T x in), weights (in x out), bias (out). Applied per row.
Tensor fc_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                  Activation act, double slope = kDefaultLeakySlope);

// `output` is the post-activation result of fc_forward.
void fc_backward(const Tensor& input, const Tensor& weights, const Tensor& output,
                 const Tensor& grad_output, Activation act, double slope, Tensor& grad_weights,
                 Tensor& grad_bias, Tensor* grad_input);

// ---- Conv1D over time, causal zero padding of (taps - 1) ----------------

// sequence (T x in), kernels (taps x in x out), bias (out). Output is T x out.
Tensor conv1d_forward(const Tensor& sequence, const Tensor& kernels, const Tensor& bias,
                      Activation act = Activation::leaky_relu, double slope = kDefaultLeakySlope);

void conv1d_backward(const Tensor& sequence, const Tensor& kernels, const Tensor& output,
                     const Tensor& grad_output, Activation act, double slope,
                     Tensor& grad_kernels, Tensor& grad_bias, Tensor* grad_sequence);

// ---- GRU -----------------------------------------------------------------

// Gate columns are laid out [update z | reset r | candidate]. The reset gate
// multiplies the previous state before the recurrent candidate product.
struct GruParams {
  const Tensor& input_weights;      // in x 3u
  const Tensor& recurrent_weights;  // u x 3u
  const Tensor& bias;               // 3u
  std::size_t units() const { return recurrent_weights.rows(); }
  std::size_t inputs() const { return input_weights.rows(); }
};

struct GruGrads {
  Tensor& input_weights;
  Tensor& recurrent_weights;
  Tensor& bias;
};

// Intermediates of one step, needed by the reverse pass.
struct GruStep {
  std::vector<double> h_prev;
  std::vector<double> z, r, candidate;
  std::vector<double> h;
};

std::vector<double> gru_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                                     const GruParams& p);
GruStep gru_cell_forward_traced(std::span<const double> x, std::span<const double> h_prev,
                                const GruParams& p);

// Given dL/dh for the step output, accumulates parameter gradients and
// writes dL/dx (if requested) and dL/dh_prev (overwritten).
void gru_cell_backward(std::span<const double> x, const GruStep& step, const GruParams& p,
                       std::span<const double> grad_h, GruGrads& grads,
                       std::span<double> grad_x, std::span<double> grad_h_prev);

struct BgruResult {
  Tensor sequence;                      // T x 2u, rows [h_fwd_t ; h_bwd_t]
  std::vector<double> final_forward;    // h_fwd at t = T-1
  std::vector<double> final_backward;   // h_bwd at t = 0
  std::vector<GruStep> forward_steps;   // in time order
  std::vector<GruStep> backward_steps;  // in time order (index t is the step at t)

  // [final_forward ; final_backward], width 2u.
  std::vector<double> final_state() const;
};

// Initial states are zero. Throws InvalidArgument on empty sequences.
BgruResult bgru_forward(const Tensor& sequence, const GruParams& forward,
                        const GruParams& backward);

// grad_sequence may be empty (size 0) when only the final state feeds
// downstream; grad_final may be empty when only the sequence does.
void bgru_backward(const Tensor& sequence, const BgruResult& result, const GruParams& forward,
                   const GruParams& backward, const Tensor* grad_sequence,
                   std::span<const double> grad_final, GruGrads forward_grads,
                   GruGrads backward_grads, Tensor* grad_input);

}  // namespace tplc
