#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tplc/errors.hpp"
#include "tplc/model.hpp"

namespace tplc {
namespace {

constexpr std::array<char, 4> kMagic{'T', 'P', 'L', 'C'};
constexpr std::uint32_t kVersion = 1;
const std::string kConfigRecord = "__config__";

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  void le(std::uint32_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return le(4); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    const char* p = take(n);
    return {p, n};
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const char* take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw FormatError("weight file is truncated");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t le(int n) {
    const char* p = take(static_cast<std::size_t>(n));
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

// Small integers only, so every field is exact in f32. The slope is kept in
// parts per million.
std::vector<float> encode_config(const ModelConfig& c) {
  return {static_cast<float>(static_cast<int>(c.size_class)),
          static_cast<float>(c.buffer_len),
          static_cast<float>(c.fc_encoding),
          static_cast<float>(c.fc_embedding),
          static_cast<float>(c.conv4_filters),
          static_cast<float>(c.conv2_filters),
          static_cast<float>(c.bgru1_units),
          static_cast<float>(c.bgru2_units),
          static_cast<float>(c.ff_units),
          static_cast<float>(c.fc_map1),
          static_cast<float>(c.fc_map2),
          static_cast<float>(std::lround(c.leaky_slope * 1e6))};
}

ModelConfig decode_config(const std::vector<float>& v) {
  if (v.size() != 12) throw FormatError("configuration record has wrong length");
  for (float f : v)
    if (!(f >= 0.0f) || f != std::floor(f) || f > 16777216.0f)
      throw FormatError("configuration record holds a non-integer field");
  auto z = [&](int i) { return static_cast<std::size_t>(v[static_cast<std::size_t>(i)]); };
  if (z(0) > static_cast<std::size_t>(SizeClass::custom)) throw FormatError("unknown size class");
  ModelConfig c;
  c.size_class = static_cast<SizeClass>(z(0));
  c.buffer_len = z(1);
  c.fc_encoding = z(2);
  c.fc_embedding = z(3);
  c.conv4_filters = z(4);
  c.conv2_filters = z(5);
  c.bgru1_units = z(6);
  c.bgru2_units = z(7);
  c.ff_units = z(8);
  c.fc_map1 = z(9);
  c.fc_map2 = z(10);
  c.leaky_slope = static_cast<double>(z(11)) / 1e6;
  return c;
}

void write_record(Writer& w, const std::string& name, const std::vector<std::size_t>& dims,
                  std::span<const double> values) {
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.raw(name);
  w.u8(static_cast<std::uint8_t>(dims.size()));
  for (std::size_t d : dims) w.u32(static_cast<std::uint32_t>(d));
  for (double v : values) w.f32(static_cast<float>(v));
}

}  // namespace

void save_weights(const WeightSet& weights, const std::filesystem::path& path) {
  weights.validate();
  Writer w;
  w.raw({kMagic.data(), kMagic.size()});
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(weights.tensors.size() + 1));
  const auto cfg = encode_config(weights.config);
  const std::vector<double> cfg_d(cfg.begin(), cfg.end());
  write_record(w, kConfigRecord, {cfg.size()}, cfg_d);
  for (const auto& [name, dims] : parameter_shapes(weights.config))
    write_record(w, name, dims, weights.at(name).values());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

WeightSet load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight file '" + path.string() + "'");
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

  if (r.str(4) != std::string(kMagic.data(), kMagic.size()))
    throw FormatError("not a weight file (bad magic)");
  if (const auto v = r.u32(); v != kVersion)
    throw FormatError("unsupported weight file version " + std::to_string(v));
  const std::uint32_t count = r.u32();

  std::optional<ModelConfig> config;
  std::map<std::string, Tensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.u16());
    const std::uint8_t rank = r.u8();
    if (rank < 1 || rank > 3) throw FormatError("tensor '" + name + "' has invalid rank");
    std::vector<std::size_t> dims(rank);
    std::size_t n = 1;
    for (auto& d : dims) {
      d = r.u32();
      n *= d;
    }
    if (n > (std::size_t{1} << 30)) throw FormatError("tensor '" + name + "' is implausibly large");
    std::vector<double> values(n);
    for (auto& v : values) v = r.f32();
    if (name == kConfigRecord) {
      config = decode_config(std::vector<float>(values.begin(), values.end()));
    } else if (!tensors.emplace(name, Tensor(dims, std::move(values))).second) {
      throw FormatError("duplicate tensor '" + name + "'");
    }
  }
  if (!r.done()) throw FormatError("trailing bytes after last tensor");
  if (!config) throw FormatError("weight file has no configuration record");

  WeightSet ws{*config, std::move(tensors)};
  try {
    ws.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("inconsistent weight file: ") + e.what());
  }
  return ws;
}

}  // namespace tplc
