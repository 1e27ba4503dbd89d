#include "tplc/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "tplc/errors.hpp"

namespace tplc {
namespace {

std::uint32_t le32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

void put32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(static_cast<unsigned char>(v));
  b.push_back(static_cast<unsigned char>(v >> 8));
}
void put_tag(std::vector<unsigned char>& b, const char* tag) { b.insert(b.end(), tag, tag + 4); }

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

std::int16_t to_pcm16(float sample) {
  const double scaled = std::nearbyint(static_cast<double>(sample) * 32768.0);
  if (!(scaled >= -32768.0)) return -32768;  // also catches NaN
  if (scaled > 32767.0) return 32767;
  return static_cast<std::int16_t>(scaled);
}

Signal read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  const std::vector<unsigned char> b(std::istreambuf_iterator<char>(in), {});
  const std::string where = " in '" + path.string() + "'";
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 ||
      std::memcmp(b.data() + 8, "WAVE", 4) != 0)
    throw FormatError("missing RIFF/WAVE header" + where);

  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const unsigned char* chunk = b.data() + pos;
    const std::size_t len = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || body + len > b.size()) throw FormatError("truncated fmt chunk" + where);
      const unsigned char* f = b.data() + body;
      std::uint16_t format = le16(f);
      if (format == kFormatExtensible && len >= 40) format = le16(f + 24);
      const std::uint16_t channels = le16(f + 2);
      const std::uint32_t rate = le32(f + 4);
      const std::uint16_t bits = le16(f + 14);
      if (format != kFormatPcm) throw UnsupportedFormat("only PCM WAV is supported" + where);
      if (channels != 1)
        throw UnsupportedFormat("expected mono, got " + std::to_string(channels) + " channels" + where);
      if (rate != static_cast<std::uint32_t>(kSampleRate))
        throw UnsupportedFormat("expected 16000 Hz, got " + std::to_string(rate) + where);
      if (bits != 16)
        throw UnsupportedFormat("expected 16-bit samples, got " + std::to_string(bits) + where);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (body + len > b.size()) throw FormatError("truncated data chunk" + where);
      data = b.data() + body;
      data_len = len;
      break;
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt) throw FormatError("no fmt chunk before data" + where);
  if (!data) throw FormatError("no data chunk" + where);
  if (data_len % 2 != 0) throw FormatError("odd data length" + where);

  Signal s;
  s.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    const auto code = static_cast<std::int16_t>(le16(data + 2 * i));
    s.samples[i] = static_cast<float>(code) / 32768.0f;
  }
  return s;
}

void write_wav(const std::filesystem::path& path, const Signal& signal) {
  const std::uint32_t data_len = static_cast<std::uint32_t>(signal.size() * 2);
  std::vector<unsigned char> b;
  b.reserve(44 + data_len);
  put_tag(b, "RIFF");
  put32(b, 36 + data_len);
  put_tag(b, "WAVE");
  put_tag(b, "fmt ");
  put32(b, 16);
  put16(b, kFormatPcm);
  put16(b, 1);
  put32(b, kSampleRate);
  put32(b, kSampleRate * 2);
  put16(b, 2);
  put16(b, 16);
  put_tag(b, "data");
  put32(b, data_len);
  for (float x : signal.samples) put16(b, static_cast<std::uint16_t>(to_pcm16(x)));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace tplc
