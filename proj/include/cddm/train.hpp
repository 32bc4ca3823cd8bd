#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cddm/denoiser.hpp"
#include "cddm/optimizer.hpp"
#include "cddm/schedule.hpp"
#include "cddm/source.hpp"

namespace cddm {

// Everything the training loop reads. There is deliberately no channel noise level here:
// one trained model serves every SNR, and in Rayleigh mode the MMSE weights at step t are
// computed at the noise level that step t matches, (1 - abar_t)/abar_t.
struct TrainingConfig {
  Architecture architecture;
  ChannelMode channel = ChannelMode::awgn;
  SourceKind source = SourceKind::gaussian_mixture;
  std::string corpus_path;  // file_corpus only
  std::int64_t steps = 1000;
  int batch = 64;
  std::uint64_t seed = 1;
  LearningRateSchedule learning_rate;
  AdamConfig adam;
  LossWeighting weighting = LossWeighting::plain;

  std::size_t k() const { return static_cast<std::size_t>(architecture.signal_dim / 2); }
};

// Canonical key=value rendering, also the input of the config hash.
std::string describe(const TrainingConfig& config, const DiffusionSchedule& schedule);
std::uint64_t config_hash(const TrainingConfig& config, const DiffusionSchedule& schedule);

struct TrainingState {
  TrainingConfig config;
  DiffusionSchedule schedule;
  DenoiserNet net;
  AdamOptimizer optimizer;
  std::int64_t step = 0;  // completed optimizer steps
};

TrainingState init_training(const TrainingConfig& config, const DiffusionSchedule& schedule);

SourceModel make_source(const TrainingConfig& config);

// One Algorithm-1 minibatch: x from the source, t ~ U{1..T}, fresh Rayleigh moduli (identity
// weights under AWGN), eps ~ N(0, I), x0 = W_s x. A fixed step replaces the uniform draw.
TrainingBatch draw_training_batch(SourceModel& source, const DiffusionSchedule& schedule,
                                  ChannelMode channel, int batch, Stream& rng,
                                  std::optional<int> fixed_step = std::nullopt);

struct TraceRow {
  std::int64_t step;
  double loss;
  double learning_rate;
};

struct TrainOutcome {
  std::vector<TraceRow> trace;
  bool aborted = false;  // non-finite loss or gradient; state holds the last good step
  std::string message;
};

// Runs `steps` more iterations on `state`. Step s draws from a stream keyed by (seed, s), so
// a resumed run replays exactly what an uninterrupted one would have done.
TrainOutcome train(TrainingState& state, SourceModel& source, std::int64_t steps,
                   const std::function<void(const TraceRow&)>& on_step = {});

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);

}  // namespace cddm
