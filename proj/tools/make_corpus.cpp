// Writes a synthetic corpus: clean/<name>.wav and traces/<name>.txt with
// bursts spread over the low, med and high subsets.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tplc/synth.hpp"
#include "tplc/trace.hpp"
#include "tplc/wav.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app("Synthetic speech and loss-trace corpus", "tplc_make_corpus");
  std::string out_dir;
  std::size_t count = 12;
  double seconds = 4.0;
  double loss = 0.1;
  std::uint64_t seed = 1;
  app.add_option("--out-dir", out_dir, "Receives clean/ and traces/")->required();
  app.add_option("--count", count)->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--seconds", seconds)->check(CLI::Range(0.1, 600.0))->capture_default_str();
  app.add_option("--loss", loss, "Mean packet loss rate")->check(CLI::Range(0.0, 0.9))->capture_default_str();
  app.add_option("--seed", seed)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(fs::path(out_dir) / "clean");
    fs::create_directories(fs::path(out_dir) / "traces");
    const auto packets = static_cast<std::size_t>(seconds * 1000.0 / tplc::kPacketMs) + 1;
    // Burst caps cycle through the three subsets: 6, 16 and 40 packets.
    const std::size_t caps[] = {6, 16, 40};
    const double mean_burst[] = {2.0, 5.0, 12.0};
    for (std::size_t i = 0; i < count; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "utt%03zu", i);
      const auto s = tplc::synth_speech(seconds, seed * 1000 + i);
      const auto t = tplc::synth_trace(packets, loss, mean_burst[i % 3], caps[i % 3], seed * 7919 + i);
      tplc::write_wav(fs::path(out_dir) / "clean" / (std::string(name) + ".wav"), s);
      tplc::write_trace(fs::path(out_dir) / "traces" / (std::string(name) + ".txt"), t);
    }
    std::cout << "wrote " << count << " utterances to " << out_dir << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
