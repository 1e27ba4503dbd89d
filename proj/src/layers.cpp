#include "tplc/layers.hpp"

#include <cmath>
#include <string>

#include "tplc/errors.hpp"
#include "tplc/simd/kernels.hpp"

namespace tplc {
namespace {

void apply_activation(std::span<double> v, Activation act, double slope) {
  switch (act) {
    case Activation::none:
      return;
    case Activation::relu:
      for (double& x : v) x = x > 0.0 ? x : 0.0;
      return;
    case Activation::leaky_relu:
      for (double& x : v) x = x > 0.0 ? x : slope * x;
      return;
  }
}

// dL/dpre from dL/dout, using the sign of the (post-activation) output.
Tensor activation_grad(const Tensor& output, const Tensor& grad_output, Activation act,
                       double slope) {
  Tensor g = grad_output;
  if (act == Activation::none) return g;
  const double neg = act == Activation::relu ? 0.0 : slope;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= output[i] > 0.0 ? 1.0 : neg;
  return g;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor fc_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                  Activation act, double slope) {
  require(weights.rank() == 2, "fc: weights must be a matrix");
  require(input.cols() == weights.rows(),
          "fc: input width " + std::to_string(input.cols()) + " != weight rows " +
              std::to_string(weights.rows()));
  require(bias.size() == weights.cols(), "fc: bias length mismatch");
  const auto& k = simd::kernels();
  const std::size_t in = weights.rows(), out = weights.cols();
  Tensor y = Tensor::matrix(input.rows(), out);
  for (std::size_t t = 0; t < input.rows(); ++t) {
    double* yt = y.data() + t * out;
    std::copy(bias.data(), bias.data() + out, yt);
    k.vec_mat(input.data() + t * in, weights.data(), in, out, out, yt);
  }
  apply_activation(y.values(), act, slope);
  return y;
}

void fc_backward(const Tensor& input, const Tensor& weights, const Tensor& output,
                 const Tensor& grad_output, Activation act, double slope, Tensor& grad_weights,
                 Tensor& grad_bias, Tensor* grad_input) {
  require(grad_output.size() == output.size(), "fc backward: gradient shape mismatch");
  const auto& k = simd::kernels();
  const std::size_t in = weights.rows(), out = weights.cols();
  const Tensor g = activation_grad(output, grad_output, act, slope);
  if (grad_input) *grad_input = Tensor::matrix(input.rows(), in);
  for (std::size_t t = 0; t < input.rows(); ++t) {
    const double* gt = g.data() + t * out;
    k.axpy(1.0, gt, grad_bias.data(), out);
    k.add_outer(input.data() + t * in, in, gt, out, grad_weights.data(), out);
    if (grad_input) k.mat_vec(weights.data(), in, out, out, gt, grad_input->data() + t * in);
  }
}

Tensor conv1d_forward(const Tensor& sequence, const Tensor& kernels, const Tensor& bias,
                      Activation act, double slope) {
  require(kernels.rank() == 3, "conv1d: kernels must be taps x in x out");
  require(sequence.rows() >= 1, "conv1d: empty sequence");
  const std::size_t taps = kernels.dims()[0], in = kernels.dims()[1], out = kernels.dims()[2];
  require(sequence.cols() == in, "conv1d: channel mismatch " + std::to_string(sequence.cols()) +
                                     " vs " + std::to_string(in));
  require(bias.size() == out, "conv1d: bias length mismatch");
  const auto& k = simd::kernels();
  const std::size_t steps = sequence.rows();
  Tensor y = Tensor::matrix(steps, out);
  for (std::size_t t = 0; t < steps; ++t) {
    double* yt = y.data() + t * out;
    std::copy(bias.data(), bias.data() + out, yt);
    for (std::size_t j = 0; j < taps; ++j) {
      // Tap j reads x[t - (taps-1) + j]; positions before the start are zero.
      if (t + j < taps - 1) continue;
      const std::size_t src = t + j - (taps - 1);
      k.vec_mat(sequence.data() + src * in, kernels.data() + j * in * out, in, out, out, yt);
    }
  }
  apply_activation(y.values(), act, slope);
  return y;
}

void conv1d_backward(const Tensor& sequence, const Tensor& kernels, const Tensor& output,
                     const Tensor& grad_output, Activation act, double slope,
                     Tensor& grad_kernels, Tensor& grad_bias, Tensor* grad_sequence) {
  require(grad_output.size() == output.size(), "conv1d backward: gradient shape mismatch");
  const std::size_t taps = kernels.dims()[0], in = kernels.dims()[1], out = kernels.dims()[2];
  const auto& k = simd::kernels();
  const Tensor g = activation_grad(output, grad_output, act, slope);
  if (grad_sequence) *grad_sequence = Tensor::matrix(sequence.rows(), in);
  for (std::size_t t = 0; t < sequence.rows(); ++t) {
    const double* gt = g.data() + t * out;
    k.axpy(1.0, gt, grad_bias.data(), out);
    for (std::size_t j = 0; j < taps; ++j) {
      if (t + j < taps - 1) continue;
      const std::size_t src = t + j - (taps - 1);
      k.add_outer(sequence.data() + src * in, in, gt, out, grad_kernels.data() + j * in * out,
                  out);
      if (grad_sequence)
        k.mat_vec(kernels.data() + j * in * out, in, out, out, gt,
                  grad_sequence->data() + src * in);
    }
  }
}

GruStep gru_cell_forward_traced(std::span<const double> x, std::span<const double> h_prev,
                                const GruParams& p) {
  const std::size_t u = p.units(), in = p.inputs();
  require(p.input_weights.cols() == 3 * u && p.recurrent_weights.cols() == 3 * u &&
              p.bias.size() == 3 * u,
          "gru: weight shapes inconsistent with " + std::to_string(u) + " units");
  require(x.size() == in, "gru: input width " + std::to_string(x.size()) + " != " +
                              std::to_string(in));
  require(h_prev.size() == u, "gru: state width mismatch");
  const auto& k = simd::kernels();

  std::vector<double> a(p.bias.data(), p.bias.data() + 3 * u);
  k.vec_mat(x.data(), p.input_weights.data(), in, 3 * u, 3 * u, a.data());
  // Recurrent contribution to z and r.
  k.vec_mat(h_prev.data(), p.recurrent_weights.data(), u, 2 * u, 3 * u, a.data());

  GruStep s;
  s.h_prev.assign(h_prev.begin(), h_prev.end());
  s.z.resize(u);
  s.r.resize(u);
  s.candidate.resize(u);
  s.h.resize(u);
  std::vector<double> rh(u);
  for (std::size_t i = 0; i < u; ++i) {
    s.z[i] = sigmoid(a[i]);
    s.r[i] = sigmoid(a[u + i]);
    rh[i] = s.r[i] * h_prev[i];
  }
  k.vec_mat(rh.data(), p.recurrent_weights.data() + 2 * u, u, u, 3 * u, a.data() + 2 * u);
  for (std::size_t i = 0; i < u; ++i) {
    s.candidate[i] = std::tanh(a[2 * u + i]);
    s.h[i] = (1.0 - s.z[i]) * h_prev[i] + s.z[i] * s.candidate[i];
  }
  return s;
}

std::vector<double> gru_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                                     const GruParams& p) {
  return gru_cell_forward_traced(x, h_prev, p).h;
}

void gru_cell_backward(std::span<const double> x, const GruStep& s, const GruParams& p,
                       std::span<const double> grad_h, GruGrads& grads,
                       std::span<double> grad_x, std::span<double> grad_h_prev) {
  const std::size_t u = p.units(), in = p.inputs();
  const auto& k = simd::kernels();
  std::vector<double> da(3 * u), rh(u), d_rh(u, 0.0);
  for (std::size_t i = 0; i < u; ++i) {
    const double dz = grad_h[i] * (s.candidate[i] - s.h_prev[i]);
    const double dc = grad_h[i] * s.z[i];
    da[i] = dz * s.z[i] * (1.0 - s.z[i]);
    da[2 * u + i] = dc * (1.0 - s.candidate[i] * s.candidate[i]);
    rh[i] = s.r[i] * s.h_prev[i];
    grad_h_prev[i] = grad_h[i] * (1.0 - s.z[i]);
  }
  // Candidate path through r * h_prev.
  k.mat_vec(p.recurrent_weights.data() + 2 * u, u, u, 3 * u, da.data() + 2 * u, d_rh.data());
  for (std::size_t i = 0; i < u; ++i) {
    const double dr = d_rh[i] * s.h_prev[i];
    da[u + i] = dr * s.r[i] * (1.0 - s.r[i]);
    grad_h_prev[i] += d_rh[i] * s.r[i];
  }
  k.mat_vec(p.recurrent_weights.data(), u, 2 * u, 3 * u, da.data(), grad_h_prev.data());

  k.axpy(1.0, da.data(), grads.bias.data(), 3 * u);
  k.add_outer(x.data(), in, da.data(), 3 * u, grads.input_weights.data(), 3 * u);
  k.add_outer(s.h_prev.data(), u, da.data(), 2 * u, grads.recurrent_weights.data(), 3 * u);
  k.add_outer(rh.data(), u, da.data() + 2 * u, u, grads.recurrent_weights.data() + 2 * u, 3 * u);
  if (!grad_x.empty()) {
    std::fill(grad_x.begin(), grad_x.end(), 0.0);
    k.mat_vec(p.input_weights.data(), in, 3 * u, 3 * u, da.data(), grad_x.data());
  }
}

std::vector<double> BgruResult::final_state() const {
  std::vector<double> s = final_forward;
  s.insert(s.end(), final_backward.begin(), final_backward.end());
  return s;
}

BgruResult bgru_forward(const Tensor& sequence, const GruParams& forward,
                        const GruParams& backward) {
  require(sequence.rows() >= 1, "bgru: empty sequence");
  require(forward.units() == backward.units(), "bgru: direction widths differ");
  const std::size_t steps = sequence.rows(), u = forward.units();
  BgruResult res;
  res.sequence = Tensor::matrix(steps, 2 * u);
  res.forward_steps.reserve(steps);
  res.backward_steps.resize(steps);

  std::vector<double> h(u, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    res.forward_steps.push_back(gru_cell_forward_traced(sequence.row(t), h, forward));
    h = res.forward_steps.back().h;
    std::copy(h.begin(), h.end(), res.sequence.data() + t * 2 * u);
  }
  res.final_forward = h;

  h.assign(u, 0.0);
  for (std::size_t t = steps; t-- > 0;) {
    res.backward_steps[t] = gru_cell_forward_traced(sequence.row(t), h, backward);
    h = res.backward_steps[t].h;
    std::copy(h.begin(), h.end(), res.sequence.data() + t * 2 * u + u);
  }
  res.final_backward = h;
  return res;
}

void bgru_backward(const Tensor& sequence, const BgruResult& result, const GruParams& forward,
                   const GruParams& backward, const Tensor* grad_sequence,
                   std::span<const double> grad_final, GruGrads forward_grads,
                   GruGrads backward_grads, Tensor* grad_input) {
  const std::size_t steps = sequence.rows(), u = forward.units(), in = forward.inputs();
  const bool has_seq = grad_sequence && grad_sequence->size() > 0;
  require(!has_seq || grad_sequence->size() == steps * 2 * u, "bgru backward: bad grad shape");
  require(grad_final.empty() || grad_final.size() == 2 * u, "bgru backward: bad final grad");
  if (grad_input) *grad_input = Tensor::matrix(steps, in);
  std::vector<double> dh(u), dh_prev(u), dx(in);

  // Forward direction: walk time backwards.
  std::fill(dh.begin(), dh.end(), 0.0);
  if (!grad_final.empty()) std::copy(grad_final.begin(), grad_final.begin() + u, dh.begin());
  for (std::size_t t = steps; t-- > 0;) {
    if (has_seq)
      for (std::size_t i = 0; i < u; ++i) dh[i] += grad_sequence->at(t, i);
    gru_cell_backward(sequence.row(t), result.forward_steps[t], forward, dh, forward_grads,
                      grad_input ? std::span<double>(dx) : std::span<double>(), dh_prev);
    if (grad_input)
      for (std::size_t i = 0; i < in; ++i) grad_input->at(t, i) += dx[i];
    dh.swap(dh_prev);
  }

  // Backward direction: its recurrence ran t = T-1 .. 0, so unwind t = 0 .. T-1.
  std::fill(dh.begin(), dh.end(), 0.0);
  if (!grad_final.empty()) std::copy(grad_final.begin() + u, grad_final.end(), dh.begin());
  for (std::size_t t = 0; t < steps; ++t) {
    if (has_seq)
      for (std::size_t i = 0; i < u; ++i) dh[i] += grad_sequence->at(t, u + i);
    gru_cell_backward(sequence.row(t), result.backward_steps[t], backward, dh, backward_grads,
                      grad_input ? std::span<double>(dx) : std::span<double>(), dh_prev);
    if (grad_input)
      for (std::size_t i = 0; i < in; ++i) grad_input->at(t, i) += dx[i];
    dh.swap(dh_prev);
  }
}

}  // namespace tplc
