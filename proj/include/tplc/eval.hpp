#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tplc/dsp.hpp"
#include "tplc/model.hpp"
#include "tplc/pipeline.hpp"
#include "tplc/train.hpp"

namespace tplc {

inline constexpr double kSnrCapDb = 99.0;

// 10 log10(sum clean^2 / sum (clean - enhanced)^2) over lost-frame samples,
// capped at 99 dB. nullopt when the mask has no lost frames.
std::optional<double> concealed_snr(std::span<const double> clean,
                                    std::span<const double> enhanced,
                                    const std::vector<bool>& frame_mask);

// Same ratio over the whole utterance.
double overall_snr(std::span<const double> clean, std::span<const double> enhanced);

// Mean over frames of the RMS over bins of 20 (log10(|C|+eps) - log10(|E|+eps)).
double log_spectral_distance(std::span<const double> clean, std::span<const double> enhanced,
                             StftConfig stft);

// Metric names used in reports.
namespace metric {
inline constexpr const char* concealed_snr = "concealed_snr_db";
inline constexpr const char* lsd = "lsd_db";
inline constexpr const char* snr = "snr_db";
}  // namespace metric

struct UtteranceScore {
  std::string name;
  LossSubset subset = LossSubset::low;
  std::optional<std::string> error;
  // Concealer and zero-fill baseline; absent metrics are not in the map.
  std::map<std::string, double> concealer;
  std::map<std::string, double> baseline;
};

struct AggregateCell {
  double mean = 0.0;
  std::size_t count = 0;
};

// Aggregated row key: (metric, subset) with subset one of low|med|high|overall.
// Metric names are the plain metric for the concealer, "baseline_<m>" and
// "delta_<m>" (concealer - baseline).
struct EvalReport {
  std::vector<UtteranceScore> utterances;
  std::map<std::pair<std::string, std::string>, AggregateCell> aggregate;
  std::map<std::string, std::size_t> subset_counts;  // utterances per subset and "overall"
  std::size_t utterance_count = 0;
  std::size_t error_count = 0;

  std::optional<double> value(const std::string& metric, const std::string& subset) const;
};

struct EvalOptions {
  StftConfig lsd_stft{32};
  std::size_t jobs = 1;
};

UtteranceScore score_utterance(const Utterance& u, const PipelineConfig& concealer,
                               const EvalOptions& options);

// Builds per-subset means and the overall mean (weighted by subset counts).
void aggregate_scores(EvalReport& report);

EvalReport evaluate_utterances(const std::vector<Utterance>& utterances,
                               const PipelineConfig& concealer, const EvalOptions& options = {});

// Pairs name.wav with trace_dir/name.txt. Missing or unreadable pairs are
// recorded as per-utterance errors.
EvalReport evaluate_corpus(const std::filesystem::path& clean_dir,
                           const std::filesystem::path& trace_dir,
                           const PipelineConfig& concealer, const EvalOptions& options = {});

void print_report(std::ostream& os, const EvalReport& report);
// One JSON object per line: {"metric", "subset", "value"}.
void write_records(std::ostream& os, const EvalReport& report);

// ---- Buffer-length sweep --------------------------------------------------

struct SweepRecipe {
  ModelConfig model;  // buffer_len is overwritten per row
  TrainConfig train;  // context split is re-derived per row
  LossConfig loss;
  Dataset data;
  std::vector<Utterance> eval_set;
  EvalOptions eval;
};

struct SweepRow {
  std::size_t buffer_len = 0;
  std::uint64_t macs = 0;
  double final_validation_loss = 0.0;
  double concealed_snr_db = 0.0;
  double lsd_db = 0.0;
  double delta_concealed_snr_db = 0.0;
};

// round(n / 3) clean slots, the rest degraded (2 + 4 at n = 6).
std::size_t clean_context_split(std::size_t buffer_len);

std::vector<SweepRow> buffer_length_sweep(const std::vector<std::size_t>& lengths,
                                          const SweepRecipe& recipe);

void print_sweep(std::ostream& os, const std::vector<SweepRow>& rows);

// ---- Inference benchmark --------------------------------------------------

struct BenchReport {
  SizeClass size_class = SizeClass::small;
  std::size_t buffer_len = 0;
  std::string isa;
  std::vector<double> samples_ms;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double real_time_factor = 0.0;  // mean / 10 ms
};

std::uint64_t config_hash(const ModelConfig& config);
// Context buffer derived from config_hash, values in [-0.5, 0.5].
Tensor bench_input(const ModelConfig& config);

// Times `iterations` (>= 100) predictions after a short warm-up.
BenchReport bench_inference(const ModelConfig& config, std::size_t iterations,
                            std::uint64_t seed = 0);

void print_bench(std::ostream& os, const BenchReport& report);

}  // namespace tplc
