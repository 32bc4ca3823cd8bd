#include "cddm/train.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cddm/equalizer.hpp"
#include "cddm/errors.hpp"
#include "cddm/format.hpp"

namespace cddm {

std::string describe(const TrainingConfig& c, const DiffusionSchedule& s) {
  std::ostringstream out;
  out << "signal_dim=" << c.architecture.signal_dim << '\n'
      << "hidden=" << c.architecture.hidden << '\n'
      << "blocks=" << c.architecture.blocks << '\n'
      << "embed_dim=" << c.architecture.embed_dim << '\n'
      << "schedule_steps=" << s.steps() << '\n'
      << "alpha_first=" << fmt_double(s.alpha_first()) << '\n'
      << "alpha_last=" << fmt_double(s.alpha_last()) << '\n'
      << "t_max=" << s.t_max() << '\n'
      << "channel=" << to_string(c.channel) << '\n'
      << "source=" << to_string(c.source) << '\n'
      << "corpus=" << c.corpus_path << '\n'
      << "steps=" << c.steps << '\n'
      << "batch=" << c.batch << '\n'
      << "seed=" << c.seed << '\n'
      << "lr_base=" << fmt_double(c.learning_rate.base_rate) << '\n'
      << "lr_warmup=" << c.learning_rate.warmup_steps << '\n'
      << "lr_total=" << c.learning_rate.total_steps << '\n'
      << "lr_min=" << fmt_double(c.learning_rate.min_rate) << '\n'
      << "adam_beta1=" << fmt_double(c.adam.beta1) << '\n'
      << "adam_beta2=" << fmt_double(c.adam.beta2) << '\n'
      << "adam_epsilon=" << fmt_double(c.adam.epsilon) << '\n'
      << "weighting=" << (c.weighting == LossWeighting::plain ? "plain" : "weighted") << '\n';
  return out.str();
}

std::uint64_t config_hash(const TrainingConfig& config, const DiffusionSchedule& schedule) {
  return fnv1a64(describe(config, schedule));
}

TrainingState init_training(const TrainingConfig& config, const DiffusionSchedule& schedule) {
  if (config.batch < 1) throw ParameterError("training batch must be at least 1");
  if (config.steps < 0) throw ParameterError("training steps must be nonnegative");
  Stream init = Stream(config.seed).split("init");
  DenoiserNet net(config.architecture, init);
  AdamOptimizer opt(net.parameter_count(), config.adam);
  return TrainingState{config, schedule, std::move(net), std::move(opt), 0};
}

SourceModel make_source(const TrainingConfig& config) {
  if (config.source == SourceKind::file_corpus) {
    auto reader = std::make_shared<CorpusReader>(config.corpus_path,
                                                 static_cast<std::size_t>(config.architecture.signal_dim));
    return SourceModel(std::move(reader), config.k());
  }
  return SourceModel(config.source, config.k());
}

TrainingBatch draw_training_batch(SourceModel& source, const DiffusionSchedule& schedule,
                                  ChannelMode channel, int batch, Stream& rng,
                                  std::optional<int> fixed_step) {
  if (batch < 1) throw ParameterError("training batch must be at least 1");
  if (fixed_step) schedule.alpha_bar(*fixed_step);  // range check
  const std::size_t k = source.k();
  const auto n = static_cast<Eigen::Index>(2 * k);
  TrainingBatch b;
  b.x0.resize(n, batch);
  b.w_n.resize(n, batch);
  b.h_r.resize(n, batch);
  b.eps.resize(n, batch);
  b.steps.resize(static_cast<std::size_t>(batch));
  for (int j = 0; j < batch; ++j) {
    const RealSignalBlock x = source.sample(rng);
    const int t =
        fixed_step ? *fixed_step
                   : static_cast<int>(rng.uniform_int(1, static_cast<std::uint64_t>(schedule.steps())));
    ChannelRealization ch;
    if (channel == ChannelMode::rayleigh) {
      const double sigma_t = std::sqrt(schedule.noise_ratio(t));
      ch = realize(Channel::rayleigh(sample_rayleigh_channel(k, rng)), sigma_t, k);
    } else {
      ch = realize(Channel::awgn(), 0.0, k);
    }
    b.steps[static_cast<std::size_t>(j)] = t;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      b.x0(i, j) = ch.w_s_diag[u] * x[u];
      b.w_n(i, j) = ch.w_n_diag[u];
      b.h_r(i, j) = ch.h_r[u];
      b.eps(i, j) = rng.normal();
    }
  }
  return b;
}

TrainOutcome train(TrainingState& state, SourceModel& source, std::int64_t steps,
                   const std::function<void(const TraceRow&)>& on_step) {
  TrainOutcome outcome;
  if (steps <= 0) return outcome;
  if (source.k() != state.config.k()) {
    throw DimensionError("training source k differs from the network's signal width");
  }
  const Stream root = Stream(state.config.seed).split("train");
  const int batch = state.config.batch;
  for (std::int64_t i = 0; i < steps; ++i) {
    const std::int64_t index = state.step;  // 0-based index of the step about to run
    Stream rng = root.split(static_cast<std::uint64_t>(index));
    source.seek(static_cast<std::uint64_t>(index) * static_cast<std::uint64_t>(batch));
    const TrainingBatch b =
        draw_training_batch(source, state.schedule, state.config.channel, batch, rng);
    const LossGradient lg = grad_loss(state.net, state.schedule, b, state.config.weighting);
    if (!std::isfinite(lg.loss)) {
      outcome.aborted = true;
      outcome.message = "non-finite loss at step " + std::to_string(index + 1);
      return outcome;
    }
    double lr = 0.0;
    try {
      // Adam validates the gradient before touching parameters or moments.
      lr = state.optimizer.step(state.net.mutable_parameters(), lg.gradient,
                                state.config.learning_rate);
    } catch (const NumericError& e) {
      outcome.aborted = true;
      outcome.message = e.what();
      return outcome;
    }
    ++state.step;
    TraceRow row{state.step, lg.loss, lr};
    outcome.trace.push_back(row);
    if (on_step) on_step(row);
  }
  return outcome;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write loss trace: " + path.string());
  out << "step,loss,learning_rate\n";
  for (const auto& r : trace) {
    out << r.step << ',' << fmt_double(r.loss) << ',' << fmt_double(r.learning_rate) << '\n';
  }
  if (!out) throw IoError("write failed for loss trace " + path.string());
}

}  // namespace cddm
