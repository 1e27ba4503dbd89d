#pragma once

#include <cstdint>

#include "tplc/dsp.hpp"
#include "tplc/trace.hpp"

namespace tplc {

// Speech-like test material: voiced segments with a gliding fundamental and
// decaying harmonics, separated by short pauses. Deterministic per seed.
Signal synth_speech(double seconds, std::uint64_t seed, double level = 0.3);

// Two-state (good/bad) Markov loss trace. Bursts never exceed max_burst
// packets when max_burst > 0.
PacketTrace synth_trace(std::size_t packets, double loss_prob, double mean_burst,
                        std::size_t max_burst, std::uint64_t seed);

}  // namespace tplc
