#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tplc/errors.hpp"
#include "tplc/loss.hpp"
#include "tplc/model.hpp"
#include "tplc/trace.hpp"

namespace tplc {

using Rng = std::mt19937_64;

struct TrainConfig {
  int epochs = 200;
  std::size_t batch_size = 16;
  double learning_rate = 5e-4;
  double plateau_factor = 0.8;
  int plateau_patience = 3;
  double grad_clip_norm = 3.0;
  double crop_seconds = 8.0;
  double trace_reverse_prob = 0.5;
  double level_mean_db = -26.0;
  double level_std_db = 10.0;
  // Oldest context slots come from the clean signal, the newest ones from
  // what the concealer has actually produced.
  std::size_t clean_context_frames = 2;
  std::size_t degraded_context_frames = 4;
  // Hops of gradient allowed through concealed write-backs (0 = detached).
  std::size_t bptt_depth = 0;
  std::uint64_t seed = 0;

  std::size_t crop_samples() const;
  // Throws InvalidArgument on inconsistent values for this buffer length.
  void validate(std::size_t buffer_len) const;
};

// ---- Optimizer -------------------------------------------------------------

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;

  static AdamState for_weights(const WeightSet& weights);
};

void adam_step(WeightSet& weights, const WeightSet& grads, AdamState& state, double learning_rate);

double global_norm(const WeightSet& grads);
// Rescales so the global L2 norm is at most max_norm; returns the norm
// before clipping.
double clip_global_norm(WeightSet& grads, double max_norm);

// Multiplies the rate by `factor` once the monitored loss has failed to
// improve for `patience` consecutive epochs, then restarts the count.
class PlateauScheduler {
 public:
  PlateauScheduler(double learning_rate, double factor, int patience)
      : lr_(learning_rate), factor_(factor), patience_(patience) {}

  double step(double monitored_loss);
  double learning_rate() const { return lr_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int stale_ = 0;
};

// ---- Data ------------------------------------------------------------------

struct AugmentedUtterance {
  std::vector<double> clean;     // level-scaled crop
  std::vector<double> degraded;  // clean with lost packets zeroed
  std::vector<bool> frame_mask;  // 10 ms frames
  PacketTrace trace;             // cropped, possibly reversed
  double target_level_db = 0.0;
  double gain = 1.0;
  bool padded = false;   // utterance was shorter than the crop
  bool clamped = false;  // gain reduced to keep the peak below 0.99
};

// RMS in dBFS over active 10 ms frames: frames whose energy is within 40 dB
// of the loudest frame. -inf for an all-zero signal.
double active_level_db(std::span<const double> x);

// Random crop, optional trace reversal, level sampling and zero-filling.
// Throws InvalidArgument on an empty utterance or trace.
AugmentedUtterance augment_utterance(const Signal& clean, const PacketTrace& trace,
                                     const TrainConfig& config, Rng& rng);

struct TrainingExample {
  Tensor context;               // buffer_len x 160, oldest -> newest
  std::vector<double> target;   // clean frames (position, position + 1)
};

// Context rows before frame 0 are silence. Row r < clean_frames reads
// `clean`, later rows read `recent`.
Tensor assemble_context(std::span<const double> clean, std::span<const double> recent,
                        std::size_t position, std::size_t buffer_len, std::size_t clean_frames);

// Requires position >= buffer_len and (position + 2) * 160 <= length.
TrainingExample build_training_example(std::span<const double> clean_crop,
                                       std::span<const double> degraded_crop,
                                       const std::vector<bool>& frame_mask, std::size_t position,
                                       std::size_t buffer_len, std::size_t clean_frames);

// ---- Whole-utterance objective --------------------------------------------

struct UtteranceLoss {
  double loss = 0.0;
  std::vector<double> enhanced;  // same length as the crop
  std::size_t model_invocations = 0;
  WeightSet grads;               // empty tensors when gradients were not requested
};

// Runs the concealment pipeline in double precision over `degraded` (using
// `frame_mask`), scores the enhanced utterance against `clean`, and
// optionally back-propagates into the weights.
UtteranceLoss utterance_loss(const WeightSet& weights, std::span<const double> clean,
                             std::span<const double> degraded, const std::vector<bool>& frame_mask,
                             const LossConfig& loss, std::size_t clean_context_frames,
                             std::size_t bptt_depth, bool with_gradient);

// ---- Loop ------------------------------------------------------------------

struct Utterance {
  std::string name;
  Signal clean;
  PacketTrace trace;
};

struct Dataset {
  std::vector<Utterance> train;
  std::vector<Utterance> validation;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  WeightSet weights;
  std::vector<EpochRecord> history;
};

// Thrown on a non-finite loss or gradient; carries the last good weights.
struct TrainingDiverged : NumericFailure {
  TrainingDiverged(const std::string& what, TrainResult last_good)
      : NumericFailure(what), last_good(std::move(last_good)) {}
  TrainResult last_good;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const Dataset& data, const ModelConfig& model, const TrainConfig& config,
                  const LossConfig& loss, const EpochCallback& on_epoch = {});

// Same loop from given starting weights.
TrainResult train_from(WeightSet initial, const Dataset& data, const TrainConfig& config,
                       const LossConfig& loss, const EpochCallback& on_epoch = {});

// One JSON object per line: epoch, train_loss, val_loss, lr.
void write_history(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace tplc
