#include "tplc/trace.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "tplc/errors.hpp"

namespace tplc {

std::string_view to_string(LossSubset s) {
  switch (s) {
    case LossSubset::low: return "low";
    case LossSubset::med: return "med";
    case LossSubset::high: return "high";
  }
  return "?";
}

PacketTrace parse_trace(std::string_view text) {
  PacketTrace t;
  for (char ch : text) {
    if (ch == '0' || ch == '1') {
      t.bits.push_back(static_cast<std::uint8_t>(ch - '0'));
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      throw FormatError(std::string("trace contains invalid character '") + ch + "'");
    }
  }
  if (t.bits.empty()) throw FormatError("trace is empty");
  return t;
}

PacketTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_trace(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_trace(const std::filesystem::path& path, const PacketTrace& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (auto b : trace.bits) out << static_cast<int>(b) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<bool> trace_to_frame_mask(const PacketTrace& trace, std::size_t n_frames) {
  std::vector<bool> mask(n_frames, false);
  for (std::size_t k = 0; k < n_frames; ++k) mask[k] = trace.lost(k / 2);
  return mask;
}

std::vector<double> apply_trace(std::span<const double> clean, const PacketTrace& trace) {
  std::vector<double> out(clean.begin(), clean.end());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (trace.lost(i / kPacketLen)) out[i] = 0.0;
  return out;
}

Signal apply_trace(const Signal& clean, const PacketTrace& trace) {
  Signal out = clean;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (trace.lost(i / kPacketLen)) out.samples[i] = 0.0f;
  return out;
}

LossSubset classify_burst(int max_burst_ms) {
  if (max_burst_ms <= 120) return LossSubset::low;
  if (max_burst_ms <= 320) return LossSubset::med;
  return LossSubset::high;
}

BurstStats burst_stats(const PacketTrace& trace) {
  BurstStats s;
  int run = 0, longest = 0, lost = 0;
  for (auto b : trace.bits) {
    if (b) {
      ++lost;
      longest = std::max(longest, ++run);
    } else {
      run = 0;
    }
  }
  s.max_burst_ms = longest * kPacketMs;
  s.total_lost_ms = lost * kPacketMs;
  s.loss_ratio = trace.bits.empty() ? 0.0 : static_cast<double>(lost) / trace.bits.size();
  s.subset = classify_burst(s.max_burst_ms);
  return s;
}

PacketTrace reverse_trace(const PacketTrace& trace) {
  PacketTrace r = trace;
  std::reverse(r.bits.begin(), r.bits.end());
  return r;
}

std::vector<CorpusEntry> list_corpus(const std::filesystem::path& clean_dir,
                                     const std::filesystem::path& trace_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(clean_dir)) throw IoError("not a directory: '" + clean_dir.string() + "'");
  std::vector<CorpusEntry> out;
  for (const auto& e : fs::directory_iterator(clean_dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".wav") continue;
    CorpusEntry c;
    c.name = e.path().stem().string();
    c.wav = e.path();
    const fs::path t = trace_dir / (c.name + ".txt");
    if (fs::is_regular_file(t)) c.trace = t;
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(),
            [](const CorpusEntry& a, const CorpusEntry& b) { return a.name < b.name; });
  return out;
}

}  // namespace tplc
