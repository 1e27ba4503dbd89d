#include "tplc/model.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "tplc/errors.hpp"

namespace tplc {

std::string to_string(SizeClass c) {
  switch (c) {
    case SizeClass::small: return "small";
    case SizeClass::medium: return "medium";
    case SizeClass::large: return "large";
    case SizeClass::feed_forward: return "ff";
    case SizeClass::custom: return "custom";
  }
  return "?";
}

std::optional<SizeClass> parse_size_class(std::string_view s) {
  if (s == "small") return SizeClass::small;
  if (s == "medium") return SizeClass::medium;
  if (s == "large") return SizeClass::large;
  if (s == "ff" || s == "feed_forward") return SizeClass::feed_forward;
  if (s == "custom") return SizeClass::custom;
  return std::nullopt;
}

namespace {

ModelConfig recurrent_config(SizeClass c, std::size_t width, std::size_t units,
                             std::size_t buffer_len) {
  ModelConfig m;
  m.size_class = c;
  m.buffer_len = buffer_len;
  m.fc_embedding = m.conv4_filters = m.conv2_filters = width;
  m.bgru1_units = m.bgru2_units = units;
  return m;
}

}  // namespace

ModelConfig ModelConfig::small(std::size_t n) { return recurrent_config(SizeClass::small, 128, 64, n); }
ModelConfig ModelConfig::medium(std::size_t n) { return recurrent_config(SizeClass::medium, 256, 128, n); }
ModelConfig ModelConfig::large(std::size_t n) { return recurrent_config(SizeClass::large, 512, 256, n); }

ModelConfig ModelConfig::feed_forward(std::size_t n) {
  ModelConfig m;
  m.size_class = SizeClass::feed_forward;
  m.buffer_len = n;
  m.fc_embedding = 128;
  return m;
}

ModelConfig ModelConfig::toy(std::size_t n) {
  ModelConfig m = recurrent_config(SizeClass::custom, 32, 16, n);
  m.fc_encoding = m.fc_map1 = m.fc_map2 = 64;
  return m;
}

ModelConfig ModelConfig::for_class(SizeClass c, std::size_t n) {
  switch (c) {
    case SizeClass::small: return small(n);
    case SizeClass::medium: return medium(n);
    case SizeClass::large: return large(n);
    case SizeClass::feed_forward: return feed_forward(n);
    case SizeClass::custom: break;
  }
  throw InvalidArgument("custom configurations have no preset widths");
}

void ModelConfig::validate() const {
  if (buffer_len < 1) throw InvalidArgument("buffer_len must be positive");
  const std::size_t widths[] = {fc_encoding, fc_embedding, conv4_filters, conv2_filters,
                                bgru1_units, bgru2_units,  ff_units,      fc_map1,
                                fc_map2};
  for (std::size_t w : widths)
    if (w == 0) throw InvalidArgument("layer widths must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0))
    throw InvalidArgument("leaky slope must lie in [0, 1)");
  if (size_class == SizeClass::small || size_class == SizeClass::medium ||
      size_class == SizeClass::large || size_class == SizeClass::feed_forward) {
    ModelConfig ref = for_class(size_class, buffer_len);
    ref.leaky_slope = leaky_slope;
    if (!(ref == *this))
      throw InvalidArgument("layer widths do not match the '" + to_string(size_class) +
                            "' configuration");
  }
}

std::vector<ParamShape> parameter_shapes(const ModelConfig& c) {
  std::vector<ParamShape> p;
  auto dense = [&](const std::string& name, std::size_t in, std::size_t out) {
    p.push_back({name + ".W", {in, out}});
    p.push_back({name + ".b", {out}});
  };
  auto gru = [&](const std::string& name, std::size_t in, std::size_t units) {
    p.push_back({name + ".W", {in, 3 * units}});
    p.push_back({name + ".U", {units, 3 * units}});
    p.push_back({name + ".b", {3 * units}});
  };
  dense("enc", kFrameLen, c.fc_encoding);
  dense("emb", c.fc_encoding, c.fc_embedding);
  std::size_t mapped_in = 0;
  if (c.recurrent()) {
    p.push_back({"conv4.W", {ModelConfig::conv4_taps, c.fc_embedding, c.conv4_filters}});
    p.push_back({"conv4.b", {c.conv4_filters}});
    p.push_back({"conv2.W", {ModelConfig::conv2_taps, c.conv4_filters, c.conv2_filters}});
    p.push_back({"conv2.b", {c.conv2_filters}});
    gru("bgru1.fwd", c.conv2_filters, c.bgru1_units);
    gru("bgru1.bwd", c.conv2_filters, c.bgru1_units);
    gru("bgru2.fwd", 2 * c.bgru1_units, c.bgru2_units);
    gru("bgru2.bwd", 2 * c.bgru1_units, c.bgru2_units);
    mapped_in = 2 * c.bgru2_units;
  } else {
    dense("ff1", c.buffer_len * c.fc_embedding, c.ff_units);
    dense("ff2", c.ff_units, c.ff_units);
    dense("ff3", c.ff_units, c.ff_units);
    mapped_in = c.ff_units;
  }
  dense("map1", mapped_in, c.fc_map1);
  dense("map2", c.fc_map1, c.fc_map2);
  dense("dec", c.fc_map2, ModelConfig::fc_decoding);
  return p;
}

const Tensor& WeightSet::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw InvalidArgument("missing parameter '" + name + "'");
  return it->second;
}

Tensor& WeightSet::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw InvalidArgument("missing parameter '" + name + "'");
  return it->second;
}

std::size_t WeightSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors) n += t.size();
  return n;
}

void WeightSet::validate() const {
  config.validate();
  const auto shapes = parameter_shapes(config);
  if (shapes.size() != tensors.size())
    throw InvalidArgument("weight set has " + std::to_string(tensors.size()) +
                          " tensors, configuration implies " + std::to_string(shapes.size()));
  for (const auto& [name, dims] : shapes) {
    const Tensor& t = at(name);
    if (t.dims() != dims) throw InvalidArgument("parameter '" + name + "' has shape " +
                                                t.shape_string());
    if (!t.all_finite()) throw InvalidArgument("parameter '" + name + "' is not finite");
  }
}

WeightSet zero_weights(const ModelConfig& config) {
  config.validate();
  WeightSet ws;
  ws.config = config;
  for (const auto& [name, dims] : parameter_shapes(config)) ws.tensors.emplace(name, Tensor(dims));
  return ws;
}

double glorot_bound(std::span<const std::size_t> dims) {
  double fan_in = 0, fan_out = 0;
  if (dims.size() == 3) {
    fan_in = static_cast<double>(dims[0] * dims[1]);
    fan_out = static_cast<double>(dims[0] * dims[2]);
  } else if (dims.size() == 2) {
    fan_in = static_cast<double>(dims[0]);
    fan_out = static_cast<double>(dims[1]);
  } else {
    return 0.0;
  }
  return std::sqrt(6.0 / (fan_in + fan_out));
}

WeightSet init_weights(const ModelConfig& config, std::uint64_t seed) {
  WeightSet ws = zero_weights(config);
  std::mt19937_64 rng(seed);
  for (const auto& [name, dims] : parameter_shapes(config)) {
    if (dims.size() < 2) continue;  // biases stay zero
    const double bound = glorot_bound(dims);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : ws.at(name).values()) v = static_cast<float>(dist(rng));
  }
  return ws;
}

// ---- forward ----------------------------------------------------------------

namespace {

GruParams gru_params(const WeightSet& w, const std::string& prefix) {
  return {w.at(prefix + ".W"), w.at(prefix + ".U"), w.at(prefix + ".b")};
}

GruGrads gru_grads(WeightSet& g, const std::string& prefix) {
  return {g.at(prefix + ".W"), g.at(prefix + ".U"), g.at(prefix + ".b")};
}

void check_input(const Tensor& buffer, const WeightSet& w) {
  if (buffer.rank() != 2 || buffer.rows() != w.config.buffer_len || buffer.cols() != kFrameLen)
    throw InvalidArgument("context buffer must be " + std::to_string(w.config.buffer_len) +
                          " x 160, got " + buffer.shape_string());
}

}  // namespace

ForwardTrace forward_traced(const Tensor& buffer, const WeightSet& w) {
  check_input(buffer, w);
  const ModelConfig& c = w.config;
  const double a = c.leaky_slope;
  ForwardTrace tr;
  tr.input = buffer;
  tr.encoded = fc_forward(buffer, w.at("enc.W"), w.at("enc.b"), Activation::relu);
  tr.embedded = fc_forward(tr.encoded, w.at("emb.W"), w.at("emb.b"), Activation::leaky_relu, a);
  if (c.recurrent()) {
    tr.conv4 = conv1d_forward(tr.embedded, w.at("conv4.W"), w.at("conv4.b"),
                              Activation::leaky_relu, a);
    tr.conv2 = conv1d_forward(tr.conv4, w.at("conv2.W"), w.at("conv2.b"),
                              Activation::leaky_relu, a);
    tr.bgru1 = bgru_forward(tr.conv2, gru_params(w, "bgru1.fwd"), gru_params(w, "bgru1.bwd"));
    tr.bgru2 = bgru_forward(tr.bgru1.sequence, gru_params(w, "bgru2.fwd"),
                            gru_params(w, "bgru2.bwd"));
    const auto fs = tr.bgru2.final_state();
    tr.final_state = Tensor({1, fs.size()}, fs);
  } else {
    tr.flat = Tensor({1, tr.embedded.size()},
                     std::vector<double>(tr.embedded.data(), tr.embedded.data() + tr.embedded.size()));
    tr.ff1 = fc_forward(tr.flat, w.at("ff1.W"), w.at("ff1.b"), Activation::leaky_relu, a);
    tr.ff2 = fc_forward(tr.ff1, w.at("ff2.W"), w.at("ff2.b"), Activation::leaky_relu, a);
    tr.ff3 = fc_forward(tr.ff2, w.at("ff3.W"), w.at("ff3.b"), Activation::leaky_relu, a);
    tr.final_state = tr.ff3;
  }
  tr.map1 = fc_forward(tr.final_state, w.at("map1.W"), w.at("map1.b"), Activation::leaky_relu, a);
  tr.map2 = fc_forward(tr.map1, w.at("map2.W"), w.at("map2.b"), Activation::leaky_relu, a);
  tr.output = fc_forward(tr.map2, w.at("dec.W"), w.at("dec.b"), Activation::none);
  if (!tr.output.all_finite()) throw NumericFailure("model produced a non-finite prediction");
  return tr;
}

Prediction model_forward(const Tensor& buffer, const WeightSet& weights) {
  if (!weights.config.recurrent())
    throw InvalidArgument("model_forward requires a recurrent configuration");
  auto tr = forward_traced(buffer, weights);
  return {tr.output.values().begin(), tr.output.values().end()};
}

Prediction model_forward_ff(const Tensor& buffer, const WeightSet& weights) {
  if (weights.config.recurrent())
    throw InvalidArgument("model_forward_ff requires the feed-forward configuration");
  auto tr = forward_traced(buffer, weights);
  return {tr.output.values().begin(), tr.output.values().end()};
}

Prediction predict(const Tensor& buffer, const WeightSet& weights) {
  auto tr = forward_traced(buffer, weights);
  return {tr.output.values().begin(), tr.output.values().end()};
}

void backward_traced(const ForwardTrace& tr, const WeightSet& w,
                     std::span<const double> grad_output, WeightSet& g, Tensor* grad_input) {
  if (grad_output.size() != ModelConfig::fc_decoding)
    throw InvalidArgument("output gradient must have 320 entries");
  const ModelConfig& c = w.config;
  const double a = c.leaky_slope;
  Tensor d_out({1, grad_output.size()}, std::vector<double>(grad_output.begin(), grad_output.end()));

  Tensor d_map2, d_map1, d_final;
  fc_backward(tr.map2, w.at("dec.W"), tr.output, d_out, Activation::none, a, g.at("dec.W"),
              g.at("dec.b"), &d_map2);
  fc_backward(tr.map1, w.at("map2.W"), tr.map2, d_map2, Activation::leaky_relu, a,
              g.at("map2.W"), g.at("map2.b"), &d_map1);
  fc_backward(tr.final_state, w.at("map1.W"), tr.map1, d_map1, Activation::leaky_relu, a,
              g.at("map1.W"), g.at("map1.b"), &d_final);

  Tensor d_emb;
  if (c.recurrent()) {
    Tensor d_bgru1_seq, d_conv2, d_conv4;
    bgru_backward(tr.bgru1.sequence, tr.bgru2, gru_params(w, "bgru2.fwd"),
                  gru_params(w, "bgru2.bwd"), nullptr, d_final.values(),
                  gru_grads(g, "bgru2.fwd"), gru_grads(g, "bgru2.bwd"), &d_bgru1_seq);
    bgru_backward(tr.conv2, tr.bgru1, gru_params(w, "bgru1.fwd"), gru_params(w, "bgru1.bwd"),
                  &d_bgru1_seq, {}, gru_grads(g, "bgru1.fwd"), gru_grads(g, "bgru1.bwd"),
                  &d_conv2);
    conv1d_backward(tr.conv4, w.at("conv2.W"), tr.conv2, d_conv2, Activation::leaky_relu, a,
                    g.at("conv2.W"), g.at("conv2.b"), &d_conv4);
    conv1d_backward(tr.embedded, w.at("conv4.W"), tr.conv4, d_conv4, Activation::leaky_relu, a,
                    g.at("conv4.W"), g.at("conv4.b"), &d_emb);
  } else {
    Tensor d_ff2, d_ff1, d_flat;
    fc_backward(tr.ff2, w.at("ff3.W"), tr.ff3, d_final, Activation::leaky_relu, a,
                g.at("ff3.W"), g.at("ff3.b"), &d_ff2);
    fc_backward(tr.ff1, w.at("ff2.W"), tr.ff2, d_ff2, Activation::leaky_relu, a, g.at("ff2.W"),
                g.at("ff2.b"), &d_ff1);
    fc_backward(tr.flat, w.at("ff1.W"), tr.ff1, d_ff1, Activation::leaky_relu, a, g.at("ff1.W"),
                g.at("ff1.b"), &d_flat);
    d_emb = Tensor(tr.embedded.dims(),
                   std::vector<double>(d_flat.values().begin(), d_flat.values().end()));
  }
  Tensor d_enc;
  fc_backward(tr.encoded, w.at("emb.W"), tr.embedded, d_emb, Activation::leaky_relu, a,
              g.at("emb.W"), g.at("emb.b"), &d_enc);
  fc_backward(tr.input, w.at("enc.W"), tr.encoded, d_enc, Activation::relu, a, g.at("enc.W"),
              g.at("enc.b"), grad_input);
}

ModelGradients model_backward(const Tensor& buffer, const WeightSet& weights,
                              std::span<const double> grad_output) {
  const ForwardTrace tr = forward_traced(buffer, weights);
  ModelGradients out{zero_weights(weights.config), Tensor()};
  backward_traced(tr, weights, grad_output, out.params, &out.input);
  return out;
}

MacReport count_macs(const ModelConfig& c) {
  c.validate();
  const std::uint64_t n = c.buffer_len;
  MacReport r;
  auto add = [&](std::string name, std::uint64_t macs) {
    r.layers.emplace_back(std::move(name), macs);
    r.total += macs;
  };
  // Two directions, three gate blocks, input and recurrent products.
  auto bgru = [&](std::uint64_t in, std::uint64_t u) { return 2 * n * 3 * (in * u + u * u); };

  add("fc_encoding", n * kFrameLen * c.fc_encoding);
  add("fc_embedding", n * c.fc_encoding * c.fc_embedding);
  std::uint64_t mapped_in = 0;
  if (c.recurrent()) {
    add("conv1x4", n * ModelConfig::conv4_taps * c.fc_embedding * c.conv4_filters);
    add("conv1x2", n * ModelConfig::conv2_taps * c.conv4_filters * c.conv2_filters);
    add("bgru1", bgru(c.conv2_filters, c.bgru1_units));
    add("bgru2", bgru(2 * c.bgru1_units, c.bgru2_units));
    mapped_in = 2 * c.bgru2_units;
  } else {
    add("ff1", n * c.fc_embedding * c.ff_units);
    add("ff2", c.ff_units * c.ff_units);
    add("ff3", c.ff_units * c.ff_units);
    mapped_in = c.ff_units;
  }
  add("fc_mapping1", mapped_in * c.fc_map1);
  add("fc_mapping2", c.fc_map1 * c.fc_map2);
  add("fc_decoding", c.fc_map2 * ModelConfig::fc_decoding);
  return r;
}

}  // namespace tplc
