#include "tplc/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <random>
#include <thread>

#include <json.hpp>

#include "tplc/errors.hpp"
#include "tplc/simd/kernels.hpp"
#include "tplc/wav.hpp"

namespace tplc {
namespace {

double capped_ratio_db(double signal, double error) {
  if (error <= 0.0) return kSnrCapDb;
  if (signal <= 0.0) return -kSnrCapDb;
  return std::clamp(10.0 * std::log10(signal / error), -kSnrCapDb, kSnrCapDb);
}

void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("metric inputs differ in length");
}

const char* const kSubsets[] = {"low", "med", "high"};

}  // namespace

std::optional<double> concealed_snr(std::span<const double> clean,
                                    std::span<const double> enhanced,
                                    const std::vector<bool>& frame_mask) {
  check_lengths(clean, enhanced);
  double sig = 0.0, err = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const std::size_t f = i / kFrameLen;
    if (f >= frame_mask.size() || !frame_mask[f]) continue;
    any = true;
    sig += clean[i] * clean[i];
    err += (clean[i] - enhanced[i]) * (clean[i] - enhanced[i]);
  }
  if (!any) return std::nullopt;
  return capped_ratio_db(sig, err);
}

double overall_snr(std::span<const double> clean, std::span<const double> enhanced) {
  check_lengths(clean, enhanced);
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    sig += clean[i] * clean[i];
    err += (clean[i] - enhanced[i]) * (clean[i] - enhanced[i]);
  }
  return capped_ratio_db(sig, err);
}

double log_spectral_distance(std::span<const double> clean, std::span<const double> enhanced,
                             StftConfig stft_cfg) {
  check_lengths(clean, enhanced);
  constexpr double eps = 1e-8;
  const auto plan = stft_plan(stft_cfg);
  const Spectrogram C = plan->analyze(clean);
  const Spectrogram E = plan->analyze(enhanced);
  double total = 0.0;
  for (std::size_t t = 0; t < C.frames; ++t) {
    double sq = 0.0;
    for (std::size_t f = 0; f < C.bins; ++f) {
      const double d = 20.0 * (std::log10(std::abs(C.at(t, f)) + eps) -
                               std::log10(std::abs(E.at(t, f)) + eps));
      sq += d * d;
    }
    total += std::sqrt(sq / static_cast<double>(C.bins));
  }
  return total / static_cast<double>(C.frames);
}

std::optional<double> EvalReport::value(const std::string& m, const std::string& subset) const {
  auto it = aggregate.find({m, subset});
  if (it == aggregate.end() || it->second.count == 0) return std::nullopt;
  return it->second.mean;
}

UtteranceScore score_utterance(const Utterance& u, const PipelineConfig& concealer,
                               const EvalOptions& options) {
  UtteranceScore s;
  s.name = u.name;
  s.subset = burst_stats(u.trace).subset;
  const std::vector<bool> mask = trace_to_frame_mask(u.trace, frame_count(u.clean.size()));
  const Signal degraded = apply_trace(u.clean, u.trace);
  const Signal enhanced = conceal_signal(degraded, mask, concealer);
  const Signal zero_filled =
      conceal_signal(degraded, mask, PipelineConfig::zero_fill(concealer.buffer_len));

  const auto clean = to_double(u.clean.samples);
  auto score = [&](const Signal& out, std::map<std::string, double>& into) {
    const auto y = to_double(out.samples);
    if (auto c = concealed_snr(clean, y, mask)) into[metric::concealed_snr] = *c;
    into[metric::snr] = overall_snr(clean, y);
    if (clean.size() >= options.lsd_stft.window_length())
      into[metric::lsd] = log_spectral_distance(clean, y, options.lsd_stft);
  };
  score(enhanced, s.concealer);
  score(zero_filled, s.baseline);
  return s;
}

void aggregate_scores(EvalReport& report) {
  report.aggregate.clear();
  report.subset_counts.clear();
  report.utterance_count = 0;
  report.error_count = 0;
  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> sums;
  auto add = [&](const std::string& m, const std::string& subset, double v) {
    auto& cell = sums[{m, subset}];
    cell.first += v;
    cell.second += 1;
  };
  for (const UtteranceScore& s : report.utterances) {
    if (s.error) {
      ++report.error_count;
      continue;
    }
    ++report.utterance_count;
    const std::string subset(to_string(s.subset));
    ++report.subset_counts[subset];
    for (const auto& [m, v] : s.concealer) {
      add(m, subset, v);
      if (auto b = s.baseline.find(m); b != s.baseline.end()) add("delta_" + m, subset, v - b->second);
    }
    for (const auto& [m, v] : s.baseline) add("baseline_" + m, subset, v);
  }
  report.subset_counts["overall"] = report.utterance_count;

  std::map<std::string, std::pair<double, std::size_t>> overall;
  for (const auto& [key, cell] : sums) {
    const AggregateCell agg{cell.first / static_cast<double>(cell.second), cell.second};
    report.aggregate[key] = agg;
    auto& o = overall[key.first];
    o.first += agg.mean * static_cast<double>(agg.count);
    o.second += agg.count;
  }
  for (const auto& [m, o] : overall)
    report.aggregate[{m, "overall"}] = {o.first / static_cast<double>(o.second), o.second};
}

EvalReport evaluate_utterances(const std::vector<Utterance>& utterances,
                               const PipelineConfig& concealer, const EvalOptions& options) {
  EvalReport report;
  report.utterances.resize(utterances.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < utterances.size(); i = next++) {
      try {
        report.utterances[i] = score_utterance(utterances[i], concealer, options);
      } catch (const std::exception& e) {
        report.utterances[i].name = utterances[i].name;
        report.utterances[i].error = e.what();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(1, utterances.size()));
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  aggregate_scores(report);
  return report;
}

EvalReport evaluate_corpus(const std::filesystem::path& clean_dir,
                           const std::filesystem::path& trace_dir,
                           const PipelineConfig& concealer, const EvalOptions& options) {
  std::vector<Utterance> loaded;
  std::vector<UtteranceScore> failures;
  for (const CorpusEntry& e : list_corpus(clean_dir, trace_dir)) {
    UtteranceScore fail;
    fail.name = e.name;
    if (!e.trace) {
      fail.error = "no trace file " + (trace_dir / (e.name + ".txt")).string();
      failures.push_back(fail);
      continue;
    }
    try {
      loaded.push_back({e.name, read_wav(e.wav), read_trace(*e.trace)});
    } catch (const std::exception& ex) {
      fail.error = ex.what();
      failures.push_back(fail);
    }
  }
  EvalReport report = evaluate_utterances(loaded, concealer, options);
  report.utterances.insert(report.utterances.end(), failures.begin(), failures.end());
  std::sort(report.utterances.begin(), report.utterances.end(),
            [](const UtteranceScore& a, const UtteranceScore& b) { return a.name < b.name; });
  aggregate_scores(report);
  return report;
}

void print_report(std::ostream& os, const EvalReport& report) {
  os << "utterances: " << report.utterance_count;
  if (report.error_count) os << " (" << report.error_count << " failed)";
  os << "\n";
  for (const auto& s : report.utterances)
    if (s.error) os << "  error: " << s.name << ": " << *s.error << "\n";

  const char* metrics[] = {metric::concealed_snr, metric::snr, metric::lsd};
  os << std::left << std::setw(10) << "subset" << std::right << std::setw(6) << "n";
  for (const char* m : metrics) {
    os << std::setw(24) << m << std::setw(24) << (std::string("delta_") + m);
  }
  os << "\n";
  std::vector<std::string> subsets(std::begin(kSubsets), std::end(kSubsets));
  subsets.push_back("overall");
  os << std::fixed << std::setprecision(3);
  for (const auto& subset : subsets) {
    auto cnt = report.subset_counts.find(subset);
    os << std::left << std::setw(10) << subset << std::right << std::setw(6)
       << (cnt == report.subset_counts.end() ? 0 : cnt->second);
    for (const char* m : metrics) {
      for (const std::string& name : {std::string(m), std::string("delta_") + m}) {
        if (auto v = report.value(name, subset)) os << std::setw(24) << *v + 0.0;
        else os << std::setw(24) << "-";
      }
    }
    os << "\n";
  }
  os.unsetf(std::ios::floatfield);
}

void write_records(std::ostream& os, const EvalReport& report) {
  for (const auto& [key, cell] : report.aggregate) {
    nlohmann::ordered_json j;
    j["metric"] = key.first;
    j["subset"] = key.second;
    j["value"] = cell.mean;
    j["count"] = cell.count;
    os << j.dump() << '\n';
  }
}

// ---- sweep -----------------------------------------------------------------

std::size_t clean_context_split(std::size_t buffer_len) { return (buffer_len + 1) / 3; }

std::vector<SweepRow> buffer_length_sweep(const std::vector<std::size_t>& lengths,
                                          const SweepRecipe& recipe) {
  for (std::size_t n : lengths)
    if (n < 2) throw InvalidArgument("sweep buffer lengths must be >= 2");
  std::vector<SweepRow> rows;
  for (std::size_t n : lengths) {
    ModelConfig model = recipe.model;
    model.buffer_len = n;
    TrainConfig tc = recipe.train;
    tc.clean_context_frames = clean_context_split(n);
    tc.degraded_context_frames = n - tc.clean_context_frames;
    TrainResult trained = train(recipe.data, model, tc, recipe.loss);

    auto weights = std::make_shared<const WeightSet>(std::move(trained.weights));
    const EvalReport rep =
        evaluate_utterances(recipe.eval_set, PipelineConfig::neural(weights), recipe.eval);
    SweepRow row;
    row.buffer_len = n;
    row.macs = count_macs(model).total;
    row.final_validation_loss = trained.history.back().validation_loss;
    row.concealed_snr_db = rep.value(metric::concealed_snr, "overall").value_or(0.0);
    row.lsd_db = rep.value(metric::lsd, "overall").value_or(0.0);
    row.delta_concealed_snr_db =
        rep.value(std::string("delta_") + metric::concealed_snr, "overall").value_or(0.0);
    rows.push_back(row);
  }
  return rows;
}

void print_sweep(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << std::setw(8) << "buffer" << std::setw(12) << "MACs" << std::setw(12) << "val_loss"
     << std::setw(18) << "concealed_snr_db" << std::setw(14) << "delta_snr_db" << std::setw(10)
     << "lsd_db" << "\n";
  os << std::fixed;
  for (const auto& r : rows) {
    os << std::setw(8) << r.buffer_len << std::setw(12) << r.macs << std::setprecision(5)
       << std::setw(12) << r.final_validation_loss << std::setprecision(3) << std::setw(18)
       << r.concealed_snr_db << std::setw(14) << r.delta_concealed_snr_db << std::setw(10)
       << r.lsd_db << "\n";
  }
  os.unsetf(std::ios::floatfield);
}

// ---- bench -----------------------------------------------------------------

std::uint64_t config_hash(const ModelConfig& c) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<std::uint64_t>(c.size_class));
  for (std::size_t v : {c.buffer_len, c.fc_encoding, c.fc_embedding, c.conv4_filters,
                        c.conv2_filters, c.bgru1_units, c.bgru2_units, c.ff_units, c.fc_map1,
                        c.fc_map2})
    mix(v);
  mix(static_cast<std::uint64_t>(std::llround(c.leaky_slope * 1e6)));
  return h;
}

Tensor bench_input(const ModelConfig& config) {
  std::mt19937_64 rng(config_hash(config));
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  Tensor t = Tensor::matrix(config.buffer_len, kFrameLen);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

BenchReport bench_inference(const ModelConfig& config, std::size_t iterations, std::uint64_t seed) {
  if (iterations < 100) throw InvalidArgument("benchmark needs at least 100 iterations");
  const WeightSet weights = init_weights(config, seed);
  const Tensor input = bench_input(config);
  for (int i = 0; i < 10; ++i) (void)predict(input, weights);

  BenchReport r;
  r.size_class = config.size_class;
  r.buffer_len = config.buffer_len;
  r.isa = std::string(simd::kernels().name);
  r.samples_ms.reserve(iterations);
  for (std::size_t i = 0; i < iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const Prediction p = predict(input, weights);
    const auto t1 = std::chrono::steady_clock::now();
    if (p.size() != ModelConfig::fc_decoding) throw NumericFailure("bad prediction size");
    r.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::vector<double> sorted = r.samples_ms;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  r.mean_ms = sum / static_cast<double>(sorted.size());
  r.median_ms = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                  : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
  r.p95_ms = sorted[std::min(sorted.size() - 1,
                             static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size()))) - 1)];
  r.real_time_factor = r.mean_ms / 10.0;
  return r;
}

void print_bench(std::ostream& os, const BenchReport& r) {
  os << "config: " << to_string(r.size_class) << "  buffer: " << r.buffer_len
     << "  kernels: " << r.isa << "  iterations: " << r.samples_ms.size() << "\n"
     << std::fixed << std::setprecision(4) << "mean_ms: " << r.mean_ms << "\n"
     << "median_ms: " << r.median_ms << "\n"
     << "p95_ms: " << r.p95_ms << "\n"
     << "real_time_factor: " << r.real_time_factor << "\n";
  os.unsetf(std::ios::floatfield);
}

}  // namespace tplc
