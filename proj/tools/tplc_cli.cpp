// tplc: simulate, conceal, train, eval, macs, bench and sweep from one binary.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tplc/errors.hpp"
#include "tplc/eval.hpp"
#include "tplc/loss.hpp"
#include "tplc/model.hpp"
#include "tplc/pipeline.hpp"
#include "tplc/simd/kernels.hpp"
#include "tplc/trace.hpp"
#include "tplc/train.hpp"
#include "tplc/wav.hpp"

namespace fs = std::filesystem;
using namespace tplc;

namespace {

// ---- config file ------------------------------------------------------------

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Flat key=value lines become "--key=value" tokens placed ahead of the
// subcommand's own arguments; every option keeps its last value, so flags win.
std::vector<std::string> config_file_tokens(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  std::vector<std::string> tokens;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty())
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": empty key");
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (value == "true") tokens.push_back("--" + key);
    else if (value != "false") tokens.push_back("--" + key + "=" + value);
  }
  return tokens;
}

std::vector<std::string> expand_config_file(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::optional<fs::path> file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config-file" && i + 1 < args.size()) file = args[i + 1];
    else if (args[i].rfind("--config-file=", 0) == 0) file = args[i].substr(14);
  }
  if (!file) return args;
  // Tokens go right after the subcommand name.
  std::size_t sub = 0;
  while (sub < args.size() && args[sub].rfind("-", 0) == 0) sub += args[sub] == "--config-file" ? 2 : 1;
  if (sub >= args.size()) return args;
  auto tokens = config_file_tokens(*file);
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub) + 1, tokens.begin(), tokens.end());
  return args;
}

// ---- shared helpers ---------------------------------------------------------

ModelConfig model_config(const std::string& name, std::size_t buffer) {
  if (name == "toy") return ModelConfig::toy(buffer);
  const auto c = parse_size_class(name);
  if (!c || *c == SizeClass::custom)
    throw InvalidArgument("unknown --config '" + name + "' (small|medium|large|ff|toy)");
  return ModelConfig::for_class(*c, buffer);
}

struct ConcealerFlags {
  std::string weights;
  bool zero_fill = false;
  std::size_t buffer = 6;

  void add(CLI::App* cmd) {
    auto* w = cmd->add_option("--weights", weights, "TPLC weight file");
    auto* z = cmd->add_flag("--zero-fill", zero_fill, "Zero-filling concealer instead of a model");
    w->excludes(z);
    cmd->add_option("--buffer", buffer, "Context frames for --zero-fill")->check(CLI::Range(2, 64));
  }

  PipelineConfig make() const {
    if (zero_fill) return PipelineConfig::zero_fill(buffer);
    if (weights.empty()) throw InvalidArgument("one of --weights or --zero-fill is required");
    return PipelineConfig::neural(std::make_shared<const WeightSet>(load_weights(weights)));
  }
};

struct TrainFlags {
  std::string config = "small";
  std::size_t buffer = 6;
  std::string loss = "comb";
  int stft_ms = 32;
  double alpha = 0.1;
  TrainConfig train;
  std::optional<std::size_t> clean_context;
  double val_fraction = 0.1;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config, "small|medium|large|ff|toy")->capture_default_str();
    cmd->add_option("--buffer", buffer, "Context buffer length in frames")->capture_default_str();
    cmd->add_option("--loss", loss, "time|mag|comb")->capture_default_str();
    cmd->add_option("--stft-ms", stft_ms, "STFT window for spectral losses")
        ->check(CLI::IsMember({20, 32, 64}))
        ->capture_default_str();
    cmd->add_option("--alpha", alpha, "Weight of the complex term")->capture_default_str();
    cmd->add_option("--epochs", train.epochs)->capture_default_str();
    cmd->add_option("--batch", train.batch_size)->capture_default_str();
    cmd->add_option("--lr", train.learning_rate)->capture_default_str();
    cmd->add_option("--clip", train.grad_clip_norm)->capture_default_str();
    cmd->add_option("--crop-seconds", train.crop_seconds)->capture_default_str();
    cmd->add_option("--reverse-prob", train.trace_reverse_prob)->capture_default_str();
    cmd->add_option("--level-mean-db", train.level_mean_db)->capture_default_str();
    cmd->add_option("--level-std-db", train.level_std_db)->capture_default_str();
    cmd->add_option("--clean-context", clean_context,
                    "Oldest context slots taken from clean speech (default: (n + 1) / 3)");
    cmd->add_option("--bptt-depth", train.bptt_depth, "Gradient hops through write-backs")
        ->capture_default_str();
    cmd->add_option("--val-fraction", val_fraction, "Share of utterances held out")
        ->check(CLI::Range(0.0, 0.5))
        ->capture_default_str();
    cmd->add_option("--seed", train.seed)->capture_default_str();
  }

  ModelConfig model() const { return model_config(config, buffer); }

  TrainConfig resolved() const {
    TrainConfig t = train;
    t.clean_context_frames = clean_context.value_or(clean_context_split(buffer));
    if (t.clean_context_frames > buffer) throw InvalidArgument("--clean-context exceeds --buffer");
    t.degraded_context_frames = buffer - t.clean_context_frames;
    return t;
  }

  LossConfig loss_config() const {
    const auto k = parse_loss_kind(loss);
    if (!k) throw InvalidArgument("unknown --loss '" + loss + "' (time|mag|comb)");
    LossConfig c{*k, alpha, StftConfig{stft_ms}};
    c.validate();
    return c;
  }
};

std::vector<Utterance> load_corpus(const fs::path& clean_dir, const fs::path& trace_dir) {
  if (!fs::is_directory(clean_dir)) throw IoError("not a directory: " + clean_dir.string());
  if (!fs::is_directory(trace_dir)) throw IoError("not a directory: " + trace_dir.string());
  std::vector<Utterance> out;
  for (const CorpusEntry& e : list_corpus(clean_dir, trace_dir)) {
    if (!e.trace) throw FormatError("no trace for '" + e.name + "' in " + trace_dir.string());
    out.push_back({e.name, read_wav(e.wav), read_trace(*e.trace)});
  }
  if (out.empty()) throw InvalidArgument("no .wav files in " + clean_dir.string());
  return out;
}

// Seeded shuffle, then the last share is held out. A single utterance is
// used for both roles.
Dataset split_dataset(std::vector<Utterance> all, double val_fraction, std::uint64_t seed) {
  Dataset d;
  if (all.size() == 1) {
    d.train = all;
    d.validation = all;
    return d;
  }
  Rng rng(seed ^ 0x5a17ULL);
  std::shuffle(all.begin(), all.end(), rng);
  const auto held = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(all.size()))), 1,
      all.size() - 1);
  d.validation.assign(all.end() - static_cast<std::ptrdiff_t>(held), all.end());
  d.train.assign(all.begin(), all.end() - static_cast<std::ptrdiff_t>(held));
  return d;
}

std::vector<std::size_t> parse_lengths(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (item.empty()) continue;
    std::size_t used = 0;
    const unsigned long v = std::stoul(item, &used);
    if (used != item.size()) throw InvalidArgument("bad buffer length '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument("--lengths is empty");
  return out;
}

// ---- subcommands ------------------------------------------------------------

int run_simulate(const std::string& in, const std::string& trace, const std::string& out) {
  const Signal clean = read_wav(in);
  const PacketTrace t = read_trace(trace);
  write_wav(out, apply_trace(clean, t));
  const BurstStats b = burst_stats(t);
  std::cout << "wrote " << out << " (" << clean.size() << " samples, loss "
            << std::setprecision(3) << 100.0 * b.loss_ratio << "%, max burst " << b.max_burst_ms
            << " ms)\n";
  return 0;
}

int run_conceal(const std::string& in, const std::string& trace, const ConcealerFlags& c,
                const std::string& out) {
  const PipelineConfig cfg = c.make();
  const Signal clean = read_wav(in);
  const PacketTrace t = read_trace(trace);
  const Signal degraded = apply_trace(clean, t);
  const auto mask = trace_to_frame_mask(t, frame_count(degraded.size()));
  write_wav(out, conceal_signal(degraded, mask, cfg));
  std::cout << "wrote " << out << " (" << degraded.size() << " samples, "
            << (cfg.model ? "neural" : "zero-fill") << " concealer)\n";
  return 0;
}

int run_train(const std::string& clean_dir, const std::string& trace_dir, const TrainFlags& f,
              const std::string& out, std::string history) {
  const ModelConfig model = f.model();
  const TrainConfig tc = f.resolved();
  const LossConfig loss = f.loss_config();
  tc.validate(model.buffer_len);
  const Dataset data = split_dataset(load_corpus(clean_dir, trace_dir), f.val_fraction, tc.seed);
  if (history.empty()) history = out + ".history.jsonl";

  std::cout << "training " << f.config << " (n=" << model.buffer_len
            << ", " << init_weights(model, 0).parameter_count() << " params) on "
            << data.train.size() << " utterances, " << data.validation.size()
            << " held out\n";
  auto report = [](const EpochRecord& r) {
    std::cout << "epoch " << std::setw(4) << r.epoch << "  train " << std::setprecision(6)
              << r.train_loss << "  val " << r.validation_loss << "  lr " << r.learning_rate
              << std::endl;
  };
  try {
    const TrainResult result = train(data, model, tc, loss, report);
    save_weights(result.weights, out);
    write_history(history, result.history);
  } catch (const TrainingDiverged& e) {
    const fs::path partial = out + ".last_good";
    save_weights(e.last_good.weights, partial);
    write_history(history, e.last_good.history);
    std::cerr << "training diverged; last good weights saved to " << partial.string() << "\n";
    throw;
  }
  std::cout << "wrote " << out << " and " << history << "\n";
  return 0;
}

int run_eval(const std::string& clean_dir, const std::string& trace_dir, const ConcealerFlags& c,
             std::size_t jobs, int lsd_ms, const std::string& records) {
  EvalOptions opt;
  opt.jobs = jobs;
  opt.lsd_stft = StftConfig{lsd_ms};
  const EvalReport report = evaluate_corpus(clean_dir, trace_dir, c.make(), opt);
  print_report(std::cout, report);
  if (!records.empty()) {
    std::ofstream os(records, std::ios::trunc);
    if (!os) throw IoError("cannot open '" + records + "' for writing");
    write_records(os, report);
    if (!os) throw IoError("failed writing '" + records + "'");
  }
  return report.utterance_count > 0 ? 0 : 1;
}

int run_macs(const std::string& config, std::size_t buffer, bool json) {
  const ModelConfig m = model_config(config, buffer);
  const MacReport r = count_macs(m);
  if (json) {
    nlohmann::ordered_json j;
    j["config"] = config;
    j["buffer"] = buffer;
    for (const auto& [name, macs] : r.layers) j["layers"][name] = macs;
    j["total"] = r.total;
    std::cout << j.dump() << "\n";
    return 0;
  }
  std::cout << "config " << config << ", buffer " << buffer << "\n";
  for (const auto& [name, macs] : r.layers)
    std::cout << "  " << std::left << std::setw(14) << name << std::right << std::setw(12) << macs
              << "\n";
  std::cout << "  " << std::left << std::setw(14) << "total" << std::right << std::setw(12)
            << r.total << "  (" << std::fixed << std::setprecision(2) << r.total / 1e6
            << " M)\n";
  return 0;
}

int run_bench(const std::string& config, std::size_t buffer, std::size_t iterations,
              std::uint64_t seed, const std::string& simd_mode) {
  const ModelConfig m = model_config(config, buffer);
  std::optional<simd::ScopedKernels> force;
  if (simd_mode == "scalar") {
    force.emplace(simd::scalar_kernels());
  } else if (simd_mode == "avx2") {
    if (!simd::avx2_kernels()) throw InvalidArgument("AVX2/FMA kernels are not available here");
    force.emplace(*simd::avx2_kernels());
  }
  print_bench(std::cout, bench_inference(m, iterations, seed));
  return 0;
}

int run_sweep(const std::string& clean_dir, const std::string& trace_dir, const TrainFlags& f,
              const std::string& lengths, std::size_t jobs, const std::string& records) {
  SweepRecipe recipe;
  recipe.model = f.model();
  recipe.train = f.resolved();
  recipe.loss = f.loss_config();
  recipe.data = split_dataset(load_corpus(clean_dir, trace_dir), f.val_fraction, f.train.seed);
  recipe.eval_set = recipe.data.validation;
  recipe.eval.jobs = jobs;
  const auto rows = buffer_length_sweep(parse_lengths(lengths), recipe);
  print_sweep(std::cout, rows);
  if (!records.empty()) {
    std::ofstream os(records, std::ios::trunc);
    if (!os) throw IoError("cannot open '" + records + "' for writing");
    for (const SweepRow& r : rows) {
      nlohmann::ordered_json j;
      j["buffer_len"] = r.buffer_len;
      j["macs"] = r.macs;
      j["val_loss"] = r.final_validation_loss;
      j["concealed_snr_db"] = r.concealed_snr_db;
      j["delta_concealed_snr_db"] = r.delta_concealed_snr_db;
      j["lsd_db"] = r.lsd_db;
      os << j.dump() << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Deep packet loss concealment: simulate, conceal, train and evaluate", "tplc");
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_file;
  app.add_option("--config-file", config_file, "Flat key=value file; flags override it");
  app.fallthrough();

  std::string in, out, trace, clean_dir, trace_dir, records, history;

  auto* sim = app.add_subcommand("simulate", "Zero out lost packets of a clean recording");
  sim->add_option("--in", in, "Clean WAV (PCM16 mono 16 kHz)")->required()->check(CLI::ExistingFile);
  sim->add_option("--trace", trace, "Packet loss trace")->required();
  sim->add_option("--out", out, "Degraded WAV")->required();

  ConcealerFlags conceal_flags;
  auto* con = app.add_subcommand("conceal", "Stream a degraded recording through the concealer");
  con->add_option("--in", in, "Clean WAV; the trace is applied before concealment")
      ->required()
      ->check(CLI::ExistingFile);
  con->add_option("--trace", trace, "Packet loss trace")->required();
  con->add_option("--out", out, "Concealed WAV")->required();
  conceal_flags.add(con);

  TrainFlags train_flags;
  auto* trn = app.add_subcommand("train", "Train a concealment model");
  trn->add_option("--clean-dir", clean_dir)->required();
  trn->add_option("--trace-dir", trace_dir)->required();
  trn->add_option("--out", out, "Weight file")->required();
  trn->add_option("--history", history, "JSONL history (default <out>.history.jsonl)");
  train_flags.add(trn);

  ConcealerFlags eval_flags;
  std::size_t jobs = 1;
  int lsd_ms = 32;
  auto* evl = app.add_subcommand("eval", "Score a concealer against the zero-fill baseline");
  evl->add_option("--clean-dir", clean_dir)->required();
  evl->add_option("--trace-dir", trace_dir)->required();
  evl->add_option("--jobs", jobs, "Utterances scored in parallel")->check(CLI::PositiveNumber);
  evl->add_option("--lsd-ms", lsd_ms, "STFT window for log-spectral distance")
      ->check(CLI::IsMember({20, 32, 64}));
  evl->add_option("--records", records, "JSONL output of aggregate cells");
  eval_flags.add(evl);

  std::string config = "small";
  std::size_t buffer = 6;
  bool json = false;
  auto* mac = app.add_subcommand("macs", "Count multiply-accumulates per prediction");
  mac->add_option("--config", config, "small|medium|large|ff|toy")->capture_default_str();
  mac->add_option("--buffer", buffer)->check(CLI::Range(1, 64))->capture_default_str();
  mac->add_flag("--json", json, "Print one JSON object");

  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
  std::string simd_mode = "auto";
  auto* ben = app.add_subcommand("bench", "Time single-frame inference");
  ben->add_option("--config", config, "small|medium|large|ff|toy")->capture_default_str();
  ben->add_option("--buffer", buffer)->check(CLI::Range(1, 64))->capture_default_str();
  ben->add_option("--iterations", iterations)->check(CLI::Range(100, 10000000))->capture_default_str();
  ben->add_option("--seed", seed)->capture_default_str();
  ben->add_option("--simd", simd_mode, "auto|scalar|avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}))
      ->capture_default_str();

  TrainFlags sweep_flags;
  sweep_flags.config = "toy";
  sweep_flags.train.epochs = 20;
  std::string lengths = "2,4,6,8";
  auto* swp = app.add_subcommand("sweep", "Train and score one model per buffer length");
  swp->add_option("--clean-dir", clean_dir)->required();
  swp->add_option("--trace-dir", trace_dir)->required();
  swp->add_option("--lengths", lengths, "Comma separated buffer lengths")->capture_default_str();
  swp->add_option("--jobs", jobs)->check(CLI::PositiveNumber);
  swp->add_option("--records", records, "JSONL output, one row per length");
  sweep_flags.add(swp);

  try {
    auto args = expand_config_file(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*sim) return run_simulate(in, trace, out);
    if (*con) return run_conceal(in, trace, conceal_flags, out);
    if (*trn) return run_train(clean_dir, trace_dir, train_flags, out, history);
    if (*evl) return run_eval(clean_dir, trace_dir, eval_flags, jobs, lsd_ms, records);
    if (*mac) return run_macs(config, buffer, json);
    if (*ben) return run_bench(config, buffer, iterations, seed, simd_mode);
    if (*swp) return run_sweep(clean_dir, trace_dir, sweep_flags, lengths, jobs, records);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
