#include "cddm/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cddm/checkpoint.hpp"
#include "cddm/errors.hpp"
#include "cddm/experiment.hpp"
#include "cddm/format.hpp"
#include "cddm/sampler.hpp"

namespace cddm {

namespace {

// Anything wrong with a checkpoint file or its fit to the requested experiment.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flags shared by the experiment subcommands; each one overrides the config file.
struct Overrides {
  std::string config;
  std::string run_id, channel, m_mode, out, checkpoint, source, corpus;
  std::vector<double> snr_db, sigma_h;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  int t_max = 0, batch = 0;
  std::size_t blocks = 0, k = 0, samples = 0;
  double learning_rate = 0.0;
  bool train = false;
  CLI::Option *seed_opt = nullptr, *steps_opt = nullptr, *t_max_opt = nullptr,
              *batch_opt = nullptr, *blocks_opt = nullptr, *k_opt = nullptr,
              *samples_opt = nullptr, *lr_opt = nullptr, *train_opt = nullptr;
};

void add_common(CLI::App& app, Overrides& o) {
  app.add_option("-c,--config", o.config, "YAML experiment config");
  app.add_option("--run-id", o.run_id, "run identifier recorded in every output");
  o.seed_opt = app.add_option("--seed", o.seed, "master seed");
  app.add_option("--channel", o.channel, "awgn or rayleigh");
  app.add_option("--snr-db", o.snr_db, "comma-separated SNR list in dB")->delimiter(',');
  app.add_option("--sigma-h", o.sigma_h, "comma-separated channel-estimate error levels")
      ->delimiter(',');
  app.add_option("--m-mode", o.m_mode, "kl-zero or two-sigma-sq");
  o.t_max_opt = app.add_option("--t-max", o.t_max, "cap on reverse sampling steps");
  o.steps_opt = app.add_option("--steps", o.steps, "training steps");
  o.batch_opt = app.add_option("--batch", o.batch, "training batch size");
  o.lr_opt = app.add_option("--lr", o.learning_rate, "peak learning rate");
  o.k_opt = app.add_option("--k", o.k, "complex symbols per block (signal length 2k)");
  app.add_option("--source", o.source, "gaussian_mixture, unit_sphere, sparse or file_corpus");
  app.add_option("--corpus", o.corpus, "corpus file for the file_corpus source");
  app.add_option("--out", o.out, "output file");
  app.add_option("--checkpoint", o.checkpoint, "checkpoint file");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c;
  if (!o.config.empty()) {
    if (!std::filesystem::exists(o.config)) throw UsageError("config file not found: " + o.config);
    c = load_config(o.config);
  }
  if (!o.run_id.empty()) c.run_id = o.run_id;
  if (o.seed_opt && o.seed_opt->count()) c.seed = o.seed;
  if (!o.channel.empty()) c.channel = parse_channel_mode(o.channel);
  if (!o.snr_db.empty()) c.snr_db = o.snr_db;
  if (!o.sigma_h.empty()) c.sigma_h = o.sigma_h;
  if (!o.m_mode.empty()) c.m_mode = parse_match_mode(o.m_mode);
  if (o.t_max_opt && o.t_max_opt->count()) c.t_max = o.t_max;
  if (o.steps_opt && o.steps_opt->count()) c.train_steps = o.steps;
  if (o.batch_opt && o.batch_opt->count()) c.batch = o.batch;
  if (o.lr_opt && o.lr_opt->count()) c.learning_rate = o.learning_rate;
  if (o.k_opt && o.k_opt->count()) c.k = o.k;
  if (!o.source.empty()) c.source = parse_source_kind(o.source);
  if (!o.corpus.empty()) c.corpus = o.corpus;
  if (!o.checkpoint.empty()) c.checkpoint = o.checkpoint;
  if (!o.out.empty()) c.out = o.out;
  if (o.blocks_opt && o.blocks_opt->count()) c.eval_blocks = o.blocks;
  if (o.samples_opt && o.samples_opt->count()) c.mc_samples = o.samples;
  if (o.train_opt && o.train_opt->count()) c.train_in_run = o.train;
  validate(c);
  return c;
}

TrainingState open_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw CheckpointError("checkpoint not found: " + path.string() +
                          " (run `cddm train` first or set training.in_run)");
  }
  try {
    return load_checkpoint(path);
  } catch (const FormatError& e) {
    throw CheckpointError(e.what());
  } catch (const IoError& e) {
    throw CheckpointError(e.what());
  }
}

void log_progress(std::ostream& err, const TraceRow& row, std::int64_t total) {
  const std::int64_t every = std::max<std::int64_t>(1, total / 10);
  if (row.step % every == 0 || row.step == total) {
    err << "step " << row.step << '/' << total << "  loss " << fmt_double(row.loss) << "  lr "
        << fmt_double(row.learning_rate) << '\n';
  }
}

struct Model {
  DenoiserNet net;
  DiffusionSchedule schedule;
};

// Trains from scratch when the config asks for it, otherwise loads the checkpoint and checks
// that it fits the config. The sampling cap t_max always comes from the config.
Model obtain_model(const ExperimentConfig& c, std::ostream& err) {
  const DiffusionSchedule schedule = make_schedule(c);
  if (c.train_in_run) {
    const TrainingConfig tc = training_config(c);
    TrainingState state = init_training(tc, schedule);
    SourceModel source = make_source(tc);
    const TrainOutcome outcome =
        train(state, source, tc.steps, [&](const TraceRow& r) { log_progress(err, r, tc.steps); });
    if (outcome.aborted) throw TrainingAborted(outcome.message);
    save_checkpoint(c.checkpoint, state);
    return {std::move(state.net), schedule};
  }
  TrainingState state = open_checkpoint(c.checkpoint);
  if (state.net.architecture().signal_dim != static_cast<int>(2 * c.k)) {
    throw CheckpointError("checkpoint " + c.checkpoint + " was trained for signal length " +
                          std::to_string(state.net.architecture().signal_dim) +
                          " but the config asks for 2k = " + std::to_string(2 * c.k));
  }
  const DiffusionSchedule& trained = state.schedule;
  if (trained.steps() != schedule.steps() || trained.alpha_first() != schedule.alpha_first() ||
      trained.alpha_last() != schedule.alpha_last()) {
    throw CheckpointError("checkpoint " + c.checkpoint +
                          " was trained with a different diffusion schedule");
  }
  if (state.config.channel != c.channel) {
    err << "note: checkpoint was trained for the " << to_string(state.config.channel)
        << " channel, evaluating on " << to_string(c.channel) << '\n';
  }
  return {std::move(state.net), schedule};
}

std::filesystem::path output_or(const ExperimentConfig& c, const std::string& fallback) {
  return c.out.empty() ? std::filesystem::path(fallback) : std::filesystem::path(c.out);
}

int run_train(const Overrides& o, bool resume, std::int64_t stop_after, std::ostream& out,
              std::ostream& err) {
  const ExperimentConfig c = resolve(o);
  const DiffusionSchedule schedule = make_schedule(c);
  const TrainingConfig tc = training_config(c);
  TrainingState state = resume ? open_checkpoint(c.checkpoint) : init_training(tc, schedule);
  if (resume && config_hash(state.config, state.schedule) != config_hash(tc, schedule)) {
    throw CheckpointError("checkpoint " + c.checkpoint +
                          " was written for a different training config; refusing to resume");
  }
  std::int64_t remaining = state.config.steps - state.step;
  if (stop_after > 0) remaining = std::min(remaining, stop_after);
  SourceModel source = make_source(state.config);
  const TrainOutcome outcome = train(state, source, remaining, [&](const TraceRow& r) {
    log_progress(err, r, state.config.steps);
  });

  const std::filesystem::path trace_path = output_or(c, c.checkpoint + ".trace.csv");
  if (resume && std::filesystem::exists(trace_path)) {
    std::ofstream app(trace_path, std::ios::app);
    if (!app) throw IoError("cannot append to trace " + trace_path.string());
    for (const auto& r : outcome.trace) {
      app << r.step << ',' << fmt_double(r.loss) << ',' << fmt_double(r.learning_rate) << '\n';
    }
  } else {
    write_trace_csv(trace_path, outcome.trace);
  }
  save_checkpoint(c.checkpoint, state);
  write_manifest(manifest_path(trace_path, c.run_id), c,
                 {{"checkpoint", c.checkpoint},
                  {"completed_steps", std::to_string(state.step)},
                  {"config_hash", std::to_string(config_hash(state.config, state.schedule))},
                  {"aborted", outcome.aborted ? "true" : "false"}});
  out << "trained to step " << state.step << " of " << state.config.steps << "; checkpoint "
      << c.checkpoint << ", trace " << trace_path.string() << '\n';
  if (outcome.aborted) throw TrainingAborted(outcome.message);
  return kExitOk;
}

int run_sample(const Overrides& o, std::ostream& out, std::ostream& err) {
  ExperimentConfig c = resolve(o);
  if (!(o.blocks_opt && o.blocks_opt->count())) c.eval_blocks = 8;
  const Model model = obtain_model(c, err);
  const std::filesystem::path path = output_or(c, "samples.csv");
  std::ostringstream csv;
  csv << "snr_db,sigma_h,m,block,i,x,y_r,y\n";
  for (double sigma_h : c.sigma_h) {
    for (double snr : c.snr_db) {
      const double sigma = sigma_from_snr_db(snr);
      const int m = select_m(model.schedule, sigma, c.m_mode);
      SourceModel source = make_source(training_config(c));
      Stream rng = Stream(c.seed).split("sample").split("snr=" + fmt_double(snr) +
                                                       ";sigma_h=" + fmt_double(sigma_h));
      const auto blocks = static_cast<Eigen::Index>(c.eval_blocks);
      const ObservationBatch b = simulate_observations(c, source, sigma, sigma_h, blocks, rng);
      const Eigen::MatrixXd y = sample_batch(b.y_r, b.h_r, b.w_n, model.net, m, model.schedule);
      for (Eigen::Index j = 0; j < blocks; ++j) {
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
          csv << fmt_double(snr) << ',' << fmt_double(sigma_h) << ',' << m << ',' << j << ','
              << i << ',' << fmt_double(b.x(i, j)) << ',' << fmt_double(b.y_r(i, j)) << ','
              << fmt_double(y(i, j)) << '\n';
        }
      }
    }
  }
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoError("cannot write samples: " + path.string());
  file << csv.str();
  if (!file) throw IoError("write failed for samples " + path.string());
  write_manifest(manifest_path(path, c.run_id), c, {});
  out << "wrote " << c.eval_blocks * c.snr_db.size() * c.sigma_h.size() << " blocks to "
      << path.string() << '\n';
  return kExitOk;
}

int run_mse_bench(const Overrides& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig c = resolve(o);
  const std::filesystem::path path = output_or(c, "metrics.csv");
  ensure_new_run(path, c.run_id);  // before any expensive work
  const Model model = obtain_model(c, err);
  const std::vector<MetricsRecord> records = run_mse_experiment(c, model.net, model.schedule);
  append_metrics_csv(path, records);

  std::vector<std::pair<std::string, std::string>> extra;
  for (const auto& r : records) {
    const std::string key = "snr_" + fmt_double(r.snr_db) + "_sigma_h_" + fmt_double(r.sigma_h);
    extra.emplace_back(key + "_gain_db", fmt_double(r.gain_db()));
    extra.emplace_back(key + "_wall_seconds", fmt_double(r.wall_seconds));
  }
  write_manifest(manifest_path(path, c.run_id), c, extra);

  out << std::left << std::setw(8) << "snr_db" << std::setw(9) << "sigma_h" << std::setw(5) << "m"
      << std::setw(14) << "mse_y_r_db" << std::setw(14) << "mse_cddm_db"
      << "gain_db\n";
  for (const auto& r : records) {
    out << std::left << std::setw(8) << fmt_double(r.snr_db) << std::setw(9)
        << fmt_double(r.sigma_h) << std::setw(5) << r.m << std::fixed << std::setprecision(3)
        << std::setw(14) << to_db(r.mse_without_cddm) << std::setw(14) << to_db(r.mse_with_cddm)
        << r.gain_db() << '\n'
        << std::defaultfloat;
  }
  return kExitOk;
}

int run_entropy_report(const Overrides& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig c = resolve(o);
  const Model model = obtain_model(c, err);
  const EntropyOutcome result = run_entropy_experiment(c, model.net, model.schedule);
  const std::filesystem::path path = output_or(c, "entropy.csv");
  write_report_csv(path, result.report);
  for (const auto& w : result.report.warnings) err << "warning: " << w << '\n';
  if (!result.recommendation.warning.empty()) {
    err << "warning: " << result.recommendation.warning << '\n';
  }
  write_manifest(manifest_path(path, c.run_id), c,
                 {{"recommended_t_max", std::to_string(result.recommendation.t_max)},
                  {"condition_met", result.recommendation.condition_met ? "true" : "false"},
                  {"warnings", std::to_string(result.report.warnings.size())}});
  out << "wrote " << result.report.rows.size() << " rows to " << path.string()
      << "; recommended t_max = " << result.recommendation.t_max << '\n';
  return kExitOk;
}

int run_inspect(const std::string& path, std::ostream& out) {
  const TrainingState s = open_checkpoint(path);
  const Architecture& a = s.net.architecture();
  out << "checkpoint: " << path << '\n'
      << "format version: " << kCheckpointVersion << '\n'
      << "config hash: " << std::hex << std::setw(16) << std::setfill('0')
      << config_hash(s.config, s.schedule) << std::dec << std::setfill(' ') << '\n'
      << "architecture: signal_dim=" << a.signal_dim << " hidden=" << a.hidden
      << " blocks=" << a.blocks << " embed_dim=" << a.embed_dim
      << " parameters=" << s.net.parameter_count() << '\n'
      << "schedule: T=" << s.schedule.steps() << " alpha_first=" << fmt_double(s.schedule.alpha_first())
      << " alpha_last=" << fmt_double(s.schedule.alpha_last()) << " t_max=" << s.schedule.t_max()
      << '\n'
      << "training: channel=" << to_string(s.config.channel)
      << " source=" << to_string(s.config.source) << " batch=" << s.config.batch
      << " seed=" << s.config.seed << " lr=" << fmt_double(s.config.learning_rate.base_rate)
      << '\n'
      << "progress: step " << s.step << " of " << s.config.steps << '\n';
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Channel denoising diffusion models: training, sampling and benchmarks", "cddm"};
  app.require_subcommand(1);

  Overrides train_o, sample_o, bench_o, entropy_o;
  bool resume = false;
  std::int64_t stop_after = 0;
  std::string inspect_path;

  auto* train_cmd = app.add_subcommand("train", "train a noise estimator and write a checkpoint");
  add_common(*train_cmd, train_o);
  train_cmd->add_flag("--resume", resume, "continue from --checkpoint");
  train_cmd->add_option("--stop-after", stop_after, "stop after this many steps of this invocation");

  auto* sample_cmd = app.add_subcommand("sample", "simulate blocks and write y_r and the denoised y");
  add_common(*sample_cmd, sample_o);
  sample_o.blocks_opt = sample_cmd->add_option("--blocks", sample_o.blocks, "blocks per SNR");
  sample_o.train_opt = sample_cmd->add_flag("--train", sample_o.train, "train before sampling");

  auto* bench_cmd = app.add_subcommand("mse-bench", "MSE with and without denoising per SNR");
  add_common(*bench_cmd, bench_o);
  bench_o.blocks_opt = bench_cmd->add_option("--blocks", bench_o.blocks, "blocks per grid point");
  bench_o.train_opt = bench_cmd->add_flag("--train", bench_o.train, "train before evaluating");

  auto* entropy_cmd = app.add_subcommand("entropy-report", "entropy-bound report and t_max advice");
  add_common(*entropy_cmd, entropy_o);
  entropy_o.samples_opt =
      entropy_cmd->add_option("--samples", entropy_o.samples, "Monte-Carlo draws per step");
  entropy_o.train_opt = entropy_cmd->add_flag("--train", entropy_o.train, "train before the report");

  auto* inspect_cmd = app.add_subcommand("inspect-checkpoint", "print a checkpoint's descriptor");
  inspect_cmd->add_option("checkpoint", inspect_path, "checkpoint file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == train_cmd) return run_train(train_o, resume, stop_after, out, err);
    if (active == sample_cmd) return run_sample(sample_o, out, err);
    if (active == bench_cmd) return run_mse_bench(bench_o, out, err);
    if (active == entropy_cmd) return run_entropy_report(entropy_o, out, err);
    return run_inspect(inspect_path, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << active->help();
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitCheckpoint;
  } catch (const DuplicateRunError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDuplicateRun;
  } catch (const TrainingAborted& e) {
    err << "training aborted: " << e.what() << '\n';
    return kExitTrainingAborted;
  } catch (const FormatError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace cddm
