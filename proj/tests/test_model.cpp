#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "reference_model.hpp"
#include "test_util.hpp"
#include "tplc/errors.hpp"
#include "tplc/model.hpp"

namespace tplc {
namespace {

namespace fs = std::filesystem;
using testing::random_tensor;

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("tplc_test_model_" + name);
}

// Widths 4..8 on the full recurrent topology.
ModelConfig tiny_config(std::size_t buffer_len = 3) {
  ModelConfig c;
  c.size_class = SizeClass::custom;
  c.buffer_len = buffer_len;
  c.fc_encoding = 8;
  c.fc_embedding = 6;
  c.conv4_filters = 5;
  c.conv2_filters = 4;
  c.bgru1_units = 3;
  c.bgru2_units = 4;
  c.fc_map1 = 6;
  c.fc_map2 = 5;
  return c;
}

WeightSet random_weights(const ModelConfig& c, std::uint64_t seed, double scale) {
  WeightSet w = zero_weights(c);
  std::uint64_t s = seed;
  for (auto& [name, t] : w.tensors) t = random_tensor(t.dims(), ++s, scale);
  return w;
}

TEST(ModelConfig, NamedWidths) {
  EXPECT_EQ(ModelConfig::small().fc_embedding, 128u);
  EXPECT_EQ(ModelConfig::small().bgru1_units, 64u);
  EXPECT_EQ(ModelConfig::medium().conv4_filters, 256u);
  EXPECT_EQ(ModelConfig::medium().bgru2_units, 128u);
  EXPECT_EQ(ModelConfig::large().conv2_filters, 512u);
  EXPECT_EQ(ModelConfig::large().bgru1_units, 256u);
  for (const auto& c : {ModelConfig::small(), ModelConfig::medium(), ModelConfig::large()}) {
    EXPECT_EQ(c.fc_encoding, 512u);
    EXPECT_EQ(c.fc_map1, 512u);
    EXPECT_EQ(c.fc_map2, 512u);
    EXPECT_EQ(c.buffer_len, 6u);
  }
}

TEST(ModelConfig, NamedClassRejectsAlteredWidths) {
  ModelConfig c = ModelConfig::small();
  c.bgru1_units = 65;
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_NO_THROW(ModelConfig::toy().validate());
  EXPECT_NO_THROW(tiny_config().validate());
}

TEST(ModelConfig, ParseSizeClass) {
  EXPECT_EQ(parse_size_class("medium"), SizeClass::medium);
  EXPECT_EQ(parse_size_class("ff"), SizeClass::feed_forward);
  EXPECT_FALSE(parse_size_class("huge").has_value());
}

// ---- Forward ---------------------------------------------------------------

TEST(Forward, ZeroWeightsReturnDecodingBias) {
  for (const auto& cfg : {ModelConfig::small(), ModelConfig::feed_forward()}) {
    WeightSet w = zero_weights(cfg);
    const auto out0 = predict(random_tensor({6, kFrameLen}, 1), w);
    ASSERT_EQ(out0.size(), kWindowLen);
    for (double v : out0) EXPECT_EQ(v, 0.0);
    w.at("dec.b") = random_tensor({kWindowLen}, 2);
    const auto out1 = predict(random_tensor({6, kFrameLen}, 3), w);
    for (std::size_t i = 0; i < kWindowLen; ++i) EXPECT_EQ(out1[i], w.at("dec.b")[i]);
  }
}

TEST(Forward, OutputLengthIs320ForEveryConfig) {
  for (const auto& cfg : {ModelConfig::small(2), ModelConfig::toy(8), ModelConfig::feed_forward(4),
                          tiny_config(1)}) {
    const WeightSet w = init_weights(cfg, 4);
    EXPECT_EQ(predict(random_tensor({cfg.buffer_len, kFrameLen}, 5), w).size(), kWindowLen);
  }
}

TEST(Forward, MatchesIndependentReimplementation) {
  for (const auto& cfg : {ModelConfig::small(), ModelConfig::toy(), tiny_config(4),
                          ModelConfig::feed_forward()}) {
    const WeightSet w = init_weights(cfg, 11);
    const Tensor buf = random_tensor({cfg.buffer_len, kFrameLen}, 12, 0.5);
    const auto got = predict(buf, w);
    const auto ref = testing::reference_forward(buf, w);
    for (std::size_t i = 0; i < kWindowLen; ++i) EXPECT_NEAR(got[i], ref[i], 1e-12);
  }
}

TEST(Forward, MatchesRecordedGoldenVector) {
  std::ifstream in(fs::path(TPLC_TEST_DATA_DIR) / "golden_small_seed7.txt");
  ASSERT_TRUE(in) << "golden file missing";
  std::vector<double> golden;
  for (double v; in >> v;) golden.push_back(v);
  ASSERT_EQ(golden.size(), kWindowLen);
  const WeightSet w = init_weights(ModelConfig::small(), 7);
  const auto out = predict(random_tensor({6, kFrameLen}, 2024, 0.5), w);
  for (std::size_t i = 0; i < kWindowLen; ++i) EXPECT_NEAR(out[i], golden[i], 1e-10);
}

TEST(Forward, ShapeMismatchThrows) {
  const WeightSet w = init_weights(ModelConfig::toy(), 1);
  EXPECT_THROW(predict(Tensor::matrix(5, kFrameLen), w), InvalidArgument);
  EXPECT_THROW(predict(Tensor::matrix(6, 159), w), InvalidArgument);
  EXPECT_THROW(model_forward_ff(Tensor::matrix(6, kFrameLen), w), InvalidArgument);
}

TEST(Forward, NonFiniteOutputThrowsNumericFailure) {
  WeightSet w = init_weights(ModelConfig::toy(), 1);
  w.at("dec.b")[7] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(predict(Tensor::matrix(6, kFrameLen), w), NumericFailure);
}

// ---- Backward --------------------------------------------------------------

TEST(Backward, ZeroOutputGradientGivesZeroGradients) {
  const WeightSet w = init_weights(ModelConfig::toy(), 2);
  const auto g = model_backward(random_tensor({6, kFrameLen}, 3), w, std::vector<double>(320, 0.0));
  for (const auto& [name, t] : g.params.tensors)
    for (double v : t.values()) EXPECT_EQ(v, 0.0) << name;
  for (double v : g.input.values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, RejectsWrongGradientLength) {
  const WeightSet w = init_weights(ModelConfig::toy(), 2);
  EXPECT_THROW(model_backward(Tensor::matrix(6, kFrameLen), w, std::vector<double>(319)),
               InvalidArgument);
}

// Components far below the loss scale are dominated by finite-difference
// round-off (|L| * 1e-16 / eps); the floor keeps those from counting.
constexpr double kModelGradFloor = 1e-5;

// Checks every `stride`-th entry of each parameter and of the input.
void check_model_gradients(const ModelConfig& cfg, std::uint64_t seed, double scale,
                           std::size_t stride) {
  WeightSet w = random_weights(cfg, seed, scale);
  Tensor buf = random_tensor({cfg.buffer_len, kFrameLen}, seed + 100, 0.5);
  const auto g = testing::random_vector(kWindowLen, seed + 200);
  auto loss = [&] {
    const auto out = predict(buf, w);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * g[i];
    return s;
  };
  const ModelGradients grads = model_backward(buf, w, g);
  for (auto& [name, t] : w.tensors) {
    const Tensor& gt = grads.params.at(name);
    for (std::size_t i = (seed + name.size()) % stride; i < t.size(); i += stride) {
      const double fd = testing::central_difference(loss, t[i]);
      EXPECT_LE(testing::relative_error(fd, gt[i], kModelGradFloor), 1e-4)
          << name << "[" << i << "] fd=" << fd << " analytic=" << gt[i];
    }
  }
  for (std::size_t i = 0; i < buf.size(); i += 7) {
    const double fd = testing::central_difference(loss, buf[i]);
    EXPECT_LE(testing::relative_error(fd, grads.input[i], kModelGradFloor), 1e-4)
        << "input[" << i << "]";
  }
}

TEST(Backward, TinyRecurrentModelMatchesFiniteDifferences) {
  check_model_gradients(tiny_config(), 300, 0.5, 1);
}

TEST(Backward, FeedForwardModelMatchesFiniteDifferencesOnSampledEntries) {
  check_model_gradients(ModelConfig::feed_forward(2), 400, 0.05, 4099);
}

// ---- Complexity ------------------------------------------------------------

TEST(Macs, WithinFivePercentOfTargetTotals) {
  struct Row { ModelConfig cfg; double paper; };
  for (const Row& r : {Row{ModelConfig::small(), 2.96e6}, Row{ModelConfig::medium(), 7.85e6},
                       Row{ModelConfig::large(), 26.18e6}}) {
    const double total = static_cast<double>(count_macs(r.cfg).total);
    EXPECT_LE(std::abs(total - r.paper) / r.paper, 0.05) << total;
  }
}

TEST(Macs, FeedForwardBaselineMatchesTargetCount) {
  EXPECT_NEAR(static_cast<double>(count_macs(ModelConfig::feed_forward()).total), 2.49e6, 0.005e6);
}

TEST(Macs, LayerBreakdownSumsAndMatchesHandCount) {
  const MacReport r = count_macs(ModelConfig::small());
  std::uint64_t sum = 0;
  for (const auto& [name, macs] : r.layers) sum += macs;
  EXPECT_EQ(sum, r.total);
  ASSERT_EQ(r.layers.size(), 9u);
  EXPECT_EQ(r.layers[0].second, 6u * 160 * 512);
  EXPECT_EQ(r.layers[1].second, 6u * 512 * 128);
  EXPECT_EQ(r.layers[2].second, 6u * 4 * 128 * 128);
  EXPECT_EQ(r.layers[3].second, 6u * 2 * 128 * 128);
  EXPECT_EQ(r.layers[4].second, 2u * 6 * 3 * 64 * (128 + 64));
  EXPECT_EQ(r.layers[5].second, 2u * 6 * 3 * 64 * (128 + 64));
  EXPECT_EQ(r.layers[6].second, 128u * 512);
  EXPECT_EQ(r.layers[8].second, 512u * 320);
}

TEST(Macs, GrowWithBufferLength) {
  EXPECT_LT(count_macs(ModelConfig::small(4)).total, count_macs(ModelConfig::small(8)).total);
}

// ---- Initialization --------------------------------------------------------

TEST(Init, SameSeedIdenticalDifferentSeedDiffers) {
  EXPECT_EQ(init_weights(ModelConfig::small(), 9), init_weights(ModelConfig::small(), 9));
  EXPECT_NE(init_weights(ModelConfig::small(), 9), init_weights(ModelConfig::small(), 10));
}

TEST(Init, GlorotBoundsAndZeroBiases) {
  const WeightSet w = init_weights(ModelConfig::small(), 3);
  for (const auto& [name, t] : w.tensors) {
    if (t.rank() == 1) {
      for (double v : t.values()) EXPECT_EQ(v, 0.0) << name;
      continue;
    }
    const double bound = glorot_bound(t.dims());
    double max_abs = 0.0;
    for (double v : t.values()) {
      EXPECT_LE(std::abs(v), bound) << name;
      max_abs = std::max(max_abs, std::abs(v));
    }
    EXPECT_GT(max_abs, 0.9 * bound) << name;
  }
  const std::vector<std::size_t> dense{160, 512}, conv{4, 128, 128};
  EXPECT_DOUBLE_EQ(glorot_bound(dense), std::sqrt(6.0 / 672.0));
  EXPECT_DOUBLE_EQ(glorot_bound(conv), std::sqrt(6.0 / 1024.0));
}

TEST(Init, ParameterShapesAndCount) {
  const WeightSet w = init_weights(ModelConfig::small(), 1);
  EXPECT_NO_THROW(w.validate());
  EXPECT_EQ(w.at("bgru1.fwd.W").dims(), (std::vector<std::size_t>{128, 192}));
  EXPECT_EQ(w.at("bgru2.bwd.U").dims(), (std::vector<std::size_t>{64, 192}));
  EXPECT_EQ(w.at("map1.W").dims(), (std::vector<std::size_t>{128, 512}));
  EXPECT_EQ(w.at("conv4.W").dims(), (std::vector<std::size_t>{4, 128, 128}));
  std::size_t n = 0;
  for (const auto& [name, dims] : parameter_shapes(ModelConfig::small())) {
    std::size_t k = 1;
    for (auto d : dims) k *= d;
    n += k;
  }
  EXPECT_EQ(w.parameter_count(), n);
}

// ---- Serialization ---------------------------------------------------------

TEST(WeightsIo, RoundTripIsExact) {
  for (const auto& cfg : {ModelConfig::small(), ModelConfig::toy(5), ModelConfig::feed_forward()}) {
    const WeightSet w = init_weights(cfg, 21);
    const auto path = temp_path("roundtrip.tplc");
    save_weights(w, path);
    EXPECT_EQ(load_weights(path), w);
    fs::remove(path);
  }
}

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::vector<char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

class CorruptWeights : public ::testing::Test {
 protected:
  void SetUp() override {
    save_weights(init_weights(ModelConfig::toy(), 1), good_);
    bytes_ = read_bytes(good_);
  }
  void TearDown() override {
    fs::remove(good_);
    fs::remove(bad_);
  }
  void expect_format_error() {
    write_bytes(bad_, bytes_);
    EXPECT_THROW(load_weights(bad_), FormatError);
  }
  fs::path good_ = temp_path("good.tplc"), bad_ = temp_path("bad.tplc");
  std::vector<char> bytes_;
};

TEST_F(CorruptWeights, Truncated) {
  bytes_.resize(bytes_.size() - 3);
  expect_format_error();
}

TEST_F(CorruptWeights, TruncatedInHeader) {
  bytes_.resize(6);
  expect_format_error();
}

TEST_F(CorruptWeights, WrongMagic) {
  bytes_[0] = 'X';
  expect_format_error();
}

TEST_F(CorruptWeights, WrongVersion) {
  bytes_[4] = 9;
  expect_format_error();
}

TEST_F(CorruptWeights, TrailingBytes) {
  bytes_.push_back(0);
  expect_format_error();
}

TEST(WeightsIo, MissingFileIsIoError) {
  EXPECT_THROW(load_weights(temp_path("does_not_exist.tplc")), IoError);
}

}  // namespace
}  // namespace tplc
