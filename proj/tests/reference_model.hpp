#pragma once

// Straight-loop reimplementation of the network, used only as a test oracle.
// Shares nothing with the library beyond reading WeightSet tensors.

#include <cmath>
#include <string>
#include <vector>

#include "tplc/model.hpp"

namespace tplc::testing {

using Mat = std::vector<std::vector<double>>;  // [time][channel]

inline double ref_act(double x, int kind, double slope) {
  if (kind == 1) return x > 0 ? x : 0.0;
  if (kind == 2) return x > 0 ? x : slope * x;
  return x;
}

inline Mat ref_dense(const Mat& x, const Tensor& W, const Tensor& b, int act, double slope) {
  const std::size_t in = W.dims()[0], out = W.dims()[1];
  Mat y(x.size(), std::vector<double>(out));
  for (std::size_t t = 0; t < x.size(); ++t)
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < in; ++i) s += x[t][i] * W[i * out + o];
      y[t][o] = ref_act(s, act, slope);
    }
  return y;
}

inline Mat ref_conv(const Mat& x, const Tensor& K, const Tensor& b, double slope) {
  const std::size_t taps = K.dims()[0], in = K.dims()[1], out = K.dims()[2];
  // Explicit left padding with taps - 1 zero rows.
  Mat padded(taps - 1, std::vector<double>(in, 0.0));
  padded.insert(padded.end(), x.begin(), x.end());
  Mat y(x.size(), std::vector<double>(out));
  for (std::size_t t = 0; t < x.size(); ++t)
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      for (std::size_t j = 0; j < taps; ++j)
        for (std::size_t i = 0; i < in; ++i) s += padded[t + j][i] * K[(j * in + i) * out + o];
      y[t][o] = ref_act(s, 2, slope);
    }
  return y;
}

// One GRU step written gate by gate.
inline std::vector<double> ref_gru_step(const std::vector<double>& x, const std::vector<double>& h,
                                        const Tensor& W, const Tensor& U, const Tensor& b) {
  const std::size_t u = U.dims()[0], in = W.dims()[0], g = 3 * u;
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  std::vector<double> z(u), r(u), out(u);
  for (std::size_t j = 0; j < u; ++j) {
    double az = b[j], ar = b[u + j];
    for (std::size_t i = 0; i < in; ++i) {
      az += x[i] * W[i * g + j];
      ar += x[i] * W[i * g + u + j];
    }
    for (std::size_t i = 0; i < u; ++i) {
      az += h[i] * U[i * g + j];
      ar += h[i] * U[i * g + u + j];
    }
    z[j] = sig(az);
    r[j] = sig(ar);
  }
  for (std::size_t j = 0; j < u; ++j) {
    double ah = b[2 * u + j];
    for (std::size_t i = 0; i < in; ++i) ah += x[i] * W[i * g + 2 * u + j];
    for (std::size_t i = 0; i < u; ++i) ah += r[i] * h[i] * U[i * g + 2 * u + j];
    out[j] = (1.0 - z[j]) * h[j] + z[j] * std::tanh(ah);
  }
  return out;
}

struct RefBgru {
  Mat sequence;
  std::vector<double> final_state;
};

inline RefBgru ref_bgru(const Mat& x, const WeightSet& w, const std::string& p) {
  const Tensor& Wf = w.at(p + ".fwd.W");
  const Tensor& Uf = w.at(p + ".fwd.U");
  const Tensor& bf = w.at(p + ".fwd.b");
  const Tensor& Wb = w.at(p + ".bwd.W");
  const Tensor& Ub = w.at(p + ".bwd.U");
  const Tensor& bb = w.at(p + ".bwd.b");
  const std::size_t u = Uf.dims()[0], T = x.size();
  Mat fwd(T), bwd(T);
  std::vector<double> h(u, 0.0);
  for (std::size_t t = 0; t < T; ++t) fwd[t] = h = ref_gru_step(x[t], h, Wf, Uf, bf);
  h.assign(u, 0.0);
  for (std::size_t t = T; t-- > 0;) bwd[t] = h = ref_gru_step(x[t], h, Wb, Ub, bb);
  RefBgru r;
  for (std::size_t t = 0; t < T; ++t) {
    auto row = fwd[t];
    row.insert(row.end(), bwd[t].begin(), bwd[t].end());
    r.sequence.push_back(row);
  }
  r.final_state = fwd[T - 1];
  r.final_state.insert(r.final_state.end(), bwd[0].begin(), bwd[0].end());
  return r;
}

inline std::vector<double> reference_forward(const Tensor& buffer, const WeightSet& w) {
  const double a = w.config.leaky_slope;
  Mat x(buffer.rows());
  for (std::size_t t = 0; t < buffer.rows(); ++t) x[t].assign(buffer.row(t).begin(), buffer.row(t).end());
  Mat h = ref_dense(x, w.at("enc.W"), w.at("enc.b"), 1, a);
  h = ref_dense(h, w.at("emb.W"), w.at("emb.b"), 2, a);
  Mat fin(1);
  if (w.config.recurrent()) {
    h = ref_conv(h, w.at("conv4.W"), w.at("conv4.b"), a);
    h = ref_conv(h, w.at("conv2.W"), w.at("conv2.b"), a);
    h = ref_bgru(h, w, "bgru1").sequence;
    fin[0] = ref_bgru(h, w, "bgru2").final_state;
  } else {
    for (const auto& row : h) fin[0].insert(fin[0].end(), row.begin(), row.end());
    fin = ref_dense(fin, w.at("ff1.W"), w.at("ff1.b"), 2, a);
    fin = ref_dense(fin, w.at("ff2.W"), w.at("ff2.b"), 2, a);
    fin = ref_dense(fin, w.at("ff3.W"), w.at("ff3.b"), 2, a);
  }
  fin = ref_dense(fin, w.at("map1.W"), w.at("map1.b"), 2, a);
  fin = ref_dense(fin, w.at("map2.W"), w.at("map2.b"), 2, a);
  fin = ref_dense(fin, w.at("dec.W"), w.at("dec.b"), 0, a);
  return fin[0];
}

}  // namespace tplc::testing
