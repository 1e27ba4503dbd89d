#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tplc/dsp.hpp"
#include "tplc/layers.hpp"
#include "tplc/tensor.hpp"

namespace tplc {

enum class SizeClass { small, medium, large, feed_forward, custom };

std::string to_string(SizeClass c);
// Accepts small|medium|large|ff|feed_forward|custom.
std::optional<SizeClass> parse_size_class(std::string_view s);

// Layer widths of the concealment network. The three named recurrent sizes
// are fixed; `custom` allows arbitrary (e.g. toy) widths with the same
// topology, `feed_forward` swaps the conv/BGRU stack for flatten + dense.
struct ModelConfig {
  SizeClass size_class = SizeClass::small;
  std::size_t buffer_len = 6;
  std::size_t fc_encoding = 512;
  std::size_t fc_embedding = 128;
  std::size_t conv4_filters = 128;
  std::size_t conv2_filters = 128;
  std::size_t bgru1_units = 64;
  std::size_t bgru2_units = 64;
  std::size_t ff_units = 512;  // feed_forward only, three layers
  std::size_t fc_map1 = 512;
  std::size_t fc_map2 = 512;
  double leaky_slope = kDefaultLeakySlope;

  static constexpr std::size_t fc_decoding = kWindowLen;
  static constexpr std::size_t conv4_taps = 4;
  static constexpr std::size_t conv2_taps = 2;

  static ModelConfig small(std::size_t buffer_len = 6);
  static ModelConfig medium(std::size_t buffer_len = 6);
  static ModelConfig large(std::size_t buffer_len = 6);
  static ModelConfig feed_forward(std::size_t buffer_len = 6);
  // Custom widths small enough for smoke training and gradient checks.
  static ModelConfig toy(std::size_t buffer_len = 6);
  static ModelConfig for_class(SizeClass c, std::size_t buffer_len = 6);

  bool recurrent() const { return size_class != SizeClass::feed_forward; }
  // Throws InvalidArgument on zero widths or named classes with wrong widths.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// Parameter name and shape, in canonical order.
using ParamShape = std::pair<std::string, std::vector<std::size_t>>;
std::vector<ParamShape> parameter_shapes(const ModelConfig& config);

struct WeightSet {
  ModelConfig config;
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  std::size_t parameter_count() const;

  // Exact names/shapes for `config` and all values finite; throws
  // InvalidArgument otherwise.
  void validate() const;

  bool operator==(const WeightSet&) const = default;
};

// Same names and shapes as `config` implies, all zero.
WeightSet zero_weights(const ModelConfig& config);

// Uniform Glorot with zero biases. Values are rounded to single precision so
// that a saved file reproduces the set exactly.
WeightSet init_weights(const ModelConfig& config, std::uint64_t seed);

// Glorot bound sqrt(6 / (fan_in + fan_out)) for a weight of this shape.
double glorot_bound(std::span<const std::size_t> dims);

// ---- Forward / backward --------------------------------------------------

using Prediction = std::vector<double>;  // 320 raw (unwindowed) samples

// Intermediates of one forward pass.
struct ForwardTrace {
  Tensor input;     // buffer_len x 160
  Tensor encoded;   // relu
  Tensor embedded;  // leaky
  // recurrent
  Tensor conv4, conv2;
  BgruResult bgru1, bgru2;
  // feed-forward
  Tensor flat, ff1, ff2, ff3;
  Tensor final_state;  // 1 x width feeding map1
  Tensor map1, map2;
  Tensor output;  // 1 x 320
};

// Recurrent topology. Rows of `buffer` are frames oldest -> newest.
// Throws InvalidArgument on shape/config mismatch and NumericFailure on a
// non-finite prediction.
Prediction model_forward(const Tensor& buffer, const WeightSet& weights);
// Feed-forward baseline topology.
Prediction model_forward_ff(const Tensor& buffer, const WeightSet& weights);
// Dispatches on weights.config.
Prediction predict(const Tensor& buffer, const WeightSet& weights);

ForwardTrace forward_traced(const Tensor& buffer, const WeightSet& weights);

// Accumulates dL/dparams into `grads` (must be zero_weights-shaped) and
// writes dL/dbuffer if requested.
void backward_traced(const ForwardTrace& trace, const WeightSet& weights,
                     std::span<const double> grad_output, WeightSet& grads, Tensor* grad_input);

struct ModelGradients {
  WeightSet params;
  Tensor input;
};

ModelGradients model_backward(const Tensor& buffer, const WeightSet& weights,
                              std::span<const double> grad_output);

// ---- Complexity ----------------------------------------------------------

struct MacReport {
  std::vector<std::pair<std::string, std::uint64_t>> layers;
  std::uint64_t total = 0;
};

// Multiplies in dense, convolution and recurrent matrix products for one
// prediction (all buffer steps, both BGRU directions). Bias adds,
// activations and gate pointwise products are not counted.
MacReport count_macs(const ModelConfig& config);

// ---- Serialization -------------------------------------------------------

// Little-endian "TPLC" container, f32 payloads. The model configuration is
// stored as an extra record named "__config__".
void save_weights(const WeightSet& weights, const std::filesystem::path& path);
// Throws IoError, FormatError.
WeightSet load_weights(const std::filesystem::path& path);

}  // namespace tplc
