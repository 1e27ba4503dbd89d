#pragma once

#include <cstdint>
#include <filesystem>

#include "tplc/dsp.hpp"

namespace tplc {

// PCM16 mono 16 kHz only. Samples map to [-1, 1) as code / 32768.
// Throws IoError, FormatError (malformed RIFF) or UnsupportedFormat.
Signal read_wav(const std::filesystem::path& path);

// Rounds to nearest with clamping to [-32768, 32767].
void write_wav(const std::filesystem::path& path, const Signal& signal);

std::int16_t to_pcm16(float sample);

}  // namespace tplc
