#include "tplc/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "tplc/errors.hpp"
#include "tplc/pipeline.hpp"
#include "tplc/simd/kernels.hpp"

namespace tplc {

// ---- optimizer ---------------------------------------------------------------

AdamState AdamState::for_weights(const WeightSet& weights) {
  AdamState s;
  for (const auto& [name, t] : weights.tensors) {
    s.first_moment.emplace(name, Tensor(t.dims()));
    s.second_moment.emplace(name, Tensor(t.dims()));
  }
  return s;
}

void adam_step(WeightSet& weights, const WeightSet& grads, AdamState& s, double lr) {
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (auto& [name, w] : weights.tensors) {
    const Tensor& g = grads.at(name);
    Tensor& m = s.first_moment.at(name);
    Tensor& v = s.second_moment.at(name);
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + s.epsilon);
    }
  }
}

double global_norm(const WeightSet& grads) {
  double sq = 0.0;
  for (const auto& [_, g] : grads.tensors)
    for (double v : g.values()) sq += v * v;
  return std::sqrt(sq);
}

double clip_global_norm(WeightSet& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& [_, g] : grads.tensors)
      for (double& v : g.values()) v *= scale;
  }
  return norm;
}

double PlateauScheduler::step(double monitored_loss) {
  if (monitored_loss < best_) {
    best_ = monitored_loss;
    stale_ = 0;
  } else if (++stale_ >= patience_) {
    lr_ *= factor_;
    stale_ = 0;
  }
  return lr_;
}

// ---- whole-utterance objective ---------------------------------------------

namespace {

struct Invocation {
  std::size_t position;
  ForwardTrace trace;
};

void add_into(WeightSet& acc, const WeightSet& g, double scale) {
  const auto& k = simd::kernels();
  for (auto& [name, t] : acc.tensors) k.axpy(scale, g.at(name).data(), t.data(), t.size());
}

bool finite(const WeightSet& g) {
  return std::all_of(g.tensors.begin(), g.tensors.end(),
                     [](const auto& kv) { return kv.second.all_finite(); });
}

}  // namespace

UtteranceLoss utterance_loss(const WeightSet& weights, std::span<const double> clean,
                             std::span<const double> degraded, const std::vector<bool>& frame_mask,
                             const LossConfig& loss, std::size_t clean_context_frames,
                             std::size_t bptt_depth, bool with_gradient) {
  const std::size_t n = clean.size();
  if (degraded.size() != n) throw InvalidArgument("clean and degraded lengths differ");
  const std::size_t frames = frame_count(n);
  if (frame_mask.size() != frames) throw InvalidArgument("frame mask does not match signal");
  const std::size_t buffer_len = weights.config.buffer_len;
  if (clean_context_frames > buffer_len) throw InvalidArgument("too many clean context frames");
  const std::size_t padded = frames * kFrameLen;
  std::vector<double> clean_p(clean.begin(), clean.end()), deg_p(degraded.begin(), degraded.end());
  clean_p.resize(padded, 0.0);
  deg_p.resize(padded, 0.0);

  const Window& w = frame_window();
  std::vector<double> y(padded, 0.0), prev(kWindowLen, 0.0), cand(kWindowLen);
  if (frames > 0 && !frame_mask[0])
    for (std::size_t k = 0; k < kFrameLen; ++k) prev[kFrameLen + k] = w[kFrameLen + k] * deg_p[k];
  std::vector<Invocation> calls;
  for (std::size_t i = 0; i < frames; ++i) {
    const bool has_next = i + 1 < frames;
    const bool lost = frame_mask[i] || (has_next && frame_mask[i + 1]);
    if (lost) {
      Invocation inv{i, forward_traced(assemble_context(clean_p, y, i, buffer_len,
                                                        clean_context_frames),
                                       weights)};
      for (std::size_t k = 0; k < kWindowLen; ++k) cand[k] = w[k] * inv.trace.output[k];
      calls.push_back(std::move(inv));
    } else {
      for (std::size_t k = 0; k < kFrameLen; ++k) {
        cand[k] = w[k] * deg_p[i * kFrameLen + k];
        cand[kFrameLen + k] = has_next ? w[kFrameLen + k] * deg_p[(i + 1) * kFrameLen + k] : 0.0;
      }
    }
    for (std::size_t k = 0; k < kFrameLen; ++k) y[i * kFrameLen + k] = prev[kFrameLen + k] + cand[k];
    prev = cand;
  }

  UtteranceLoss out;
  out.model_invocations = calls.size();
  std::span<const double> enhanced(y.data(), n);
  if (!with_gradient) {
    out.loss = evaluate_loss(loss, enhanced, clean);
    out.enhanced.assign(enhanced.begin(), enhanced.end());
    return out;
  }

  LossValue lv = loss_with_gradient(loss, enhanced, clean);
  out.loss = lv.value;
  out.enhanced.assign(enhanced.begin(), enhanced.end());
  out.grads = zero_weights(weights.config);

  std::vector<double> g_level = std::move(lv.gradient);
  g_level.resize(padded, 0.0);
  std::vector<double> g_pred(kWindowLen);
  for (std::size_t level = 0; level <= bptt_depth; ++level) {
    const bool propagate = level < bptt_depth;
    std::vector<double> g_next(propagate ? padded : 0, 0.0);
    for (const Invocation& inv : calls) {
      const std::size_t i = inv.position;
      bool any = false;
      for (std::size_t k = 0; k < kWindowLen; ++k) {
        const std::size_t idx = i * kFrameLen + k;  // second half lands on frame i + 1
        g_pred[k] = idx < padded ? w[k] * g_level[idx] : 0.0;
        any = any || g_pred[k] != 0.0;
      }
      if (!any) continue;
      Tensor g_in;
      backward_traced(inv.trace, weights, g_pred, out.grads, propagate ? &g_in : nullptr);
      if (!propagate) continue;
      for (std::size_t r = clean_context_frames; r < buffer_len; ++r) {
        if (i + r < buffer_len) continue;
        const std::size_t frame = i + r - buffer_len;
        for (std::size_t k = 0; k < kFrameLen; ++k) g_next[frame * kFrameLen + k] += g_in.at(r, k);
      }
    }
    if (!propagate) break;
    g_level = std::move(g_next);
  }
  return out;
}

// ---- loop ------------------------------------------------------------------

TrainResult train(const Dataset& data, const ModelConfig& model, const TrainConfig& config,
                  const LossConfig& loss, const EpochCallback& on_epoch) {
  return train_from(init_weights(model, config.seed), data, config, loss, on_epoch);
}

TrainResult train_from(WeightSet initial, const Dataset& data, const TrainConfig& config,
                       const LossConfig& loss, const EpochCallback& on_epoch) {
  initial.validate();
  config.validate(initial.config.buffer_len);
  loss.validate();
  if (data.train.empty()) throw InvalidArgument("training set is empty");
  if (data.validation.empty()) throw InvalidArgument("validation set is empty");

  TrainResult result{std::move(initial), {}};
  TrainResult last_good = result;
  AdamState adam = AdamState::for_weights(result.weights);
  PlateauScheduler scheduler(config.learning_rate, config.plateau_factor, config.plateau_patience);

  Rng rng(config.seed);
  // Validation crops are drawn once so the monitored loss is comparable
  // across epochs.
  Rng val_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<AugmentedUtterance> val;
  for (const Utterance& u : data.validation) val.push_back(augment_utterance(u.clean, u.trace, config, val_rng));

  const std::size_t count = data.train.size();
  std::vector<std::size_t> speech_order(count), trace_order(count);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = scheduler.learning_rate();
    std::iota(speech_order.begin(), speech_order.end(), 0);
    std::iota(trace_order.begin(), trace_order.end(), 0);
    std::shuffle(speech_order.begin(), speech_order.end(), rng);
    std::shuffle(trace_order.begin(), trace_order.end(), rng);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < count; start += config.batch_size) {
      const std::size_t end = std::min(count, start + config.batch_size);
      WeightSet grads = zero_weights(result.weights.config);
      double batch_loss = 0.0;
      const double scale = 1.0 / static_cast<double>(end - start);
      try {
        for (std::size_t j = start; j < end; ++j) {
          const Utterance& speech = data.train[speech_order[j]];
          const Utterance& trace = data.train[trace_order[j]];
          const AugmentedUtterance ex = augment_utterance(speech.clean, trace.trace, config, rng);
          const UtteranceLoss ul =
              utterance_loss(result.weights, ex.clean, ex.degraded, ex.frame_mask, loss,
                             config.clean_context_frames, config.bptt_depth, true);
          batch_loss += ul.loss * scale;
          add_into(grads, ul.grads, scale);
        }
      } catch (const NumericFailure& e) {
        throw TrainingDiverged(e.what(), std::move(last_good));
      }
      if (!std::isfinite(batch_loss) || !finite(grads))
        throw TrainingDiverged("non-finite loss or gradient in epoch " + std::to_string(epoch),
                               std::move(last_good));
      clip_global_norm(grads, config.grad_clip_norm);
      adam_step(result.weights, grads, adam, lr);
      epoch_loss += batch_loss;
      ++batches;
    }

    double val_loss = 0.0;
    try {
      for (const auto& ex : val)
        val_loss += utterance_loss(result.weights, ex.clean, ex.degraded, ex.frame_mask, loss,
                                   config.clean_context_frames, 0, false)
                        .loss;
    } catch (const NumericFailure& e) {
      throw TrainingDiverged(e.what(), std::move(last_good));
    }
    val_loss /= static_cast<double>(val.size());
    if (!std::isfinite(val_loss) || !finite(result.weights))
      throw TrainingDiverged("non-finite validation loss in epoch " + std::to_string(epoch),
                             std::move(last_good));

    const EpochRecord rec{epoch, epoch_loss / static_cast<double>(batches), val_loss, lr};
    result.history.push_back(rec);
    scheduler.step(val_loss);
    last_good = result;
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

void write_history(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& r : history) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["val_loss"] = r.validation_loss;
    j["lr"] = r.learning_rate;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace tplc
