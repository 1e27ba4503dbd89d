#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tplc/dsp.hpp"

namespace tplc {

inline constexpr std::size_t kPacketLen = 2 * kFrameLen;  // 20 ms
inline constexpr int kPacketMs = 20;

// One entry per 20 ms packet, 1 = lost.
struct PacketTrace {
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
  bool lost(std::size_t packet) const { return packet < bits.size() && bits[packet] != 0; }
  bool operator==(const PacketTrace&) const = default;
};

enum class LossSubset { low, med, high };
std::string_view to_string(LossSubset s);

struct BurstStats {
  int max_burst_ms = 0;
  int total_lost_ms = 0;
  double loss_ratio = 0.0;
  LossSubset subset = LossSubset::low;
};

// '0'/'1' characters, contiguous or whitespace separated.
// Throws FormatError on any other character or an empty trace.
PacketTrace parse_trace(std::string_view text);
PacketTrace read_trace(const std::filesystem::path& path);
void write_trace(const std::filesystem::path& path, const PacketTrace& trace);

// Frame k is lost iff packet k/2 is; frames beyond the trace are intact.
std::vector<bool> trace_to_frame_mask(const PacketTrace& trace, std::size_t n_frames);

// Zeroes every sample inside a lost packet. Packets past the end of the
// trace count as received.
Signal apply_trace(const Signal& clean, const PacketTrace& trace);
std::vector<double> apply_trace(std::span<const double> clean, const PacketTrace& trace);

// low: max burst <= 120 ms, med: <= 320 ms, high: above.
LossSubset classify_burst(int max_burst_ms);
BurstStats burst_stats(const PacketTrace& trace);

PacketTrace reverse_trace(const PacketTrace& trace);

// Utterance `name.wav` in the clean directory pairs with `name.txt` in the
// trace directory. Entries are sorted by name; `trace` is empty when the pair
// is missing.
struct CorpusEntry {
  std::string name;
  std::filesystem::path wav;
  std::optional<std::filesystem::path> trace;
};

std::vector<CorpusEntry> list_corpus(const std::filesystem::path& clean_dir,
                                     const std::filesystem::path& trace_dir);

}  // namespace tplc
