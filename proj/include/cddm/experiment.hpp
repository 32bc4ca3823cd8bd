#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cddm/channel.hpp"
#include "cddm/denoiser.hpp"
#include "cddm/entropy.hpp"
#include "cddm/schedule.hpp"
#include "cddm/source.hpp"
#include "cddm/train.hpp"

namespace cddm {

// Resolved settings of one experiment. Loaded from a YAML file with the sections
// run / channel / source / schedule / model / training / evaluation / entropy, then
// overridden by command-line flags.
struct ExperimentConfig {
  // run
  std::string run_id = "run";
  std::uint64_t seed = 1;
  std::string checkpoint = "cddm.ckpt";
  std::string out;

  // channel
  ChannelMode channel = ChannelMode::awgn;
  std::vector<double> snr_db{5.0, 10.0, 20.0};
  std::vector<double> sigma_h{0.0};

  // source
  SourceKind source = SourceKind::gaussian_mixture;
  std::size_t k = 32;
  std::string corpus;

  // schedule
  int schedule_steps = kDefaultSteps;
  double alpha_first = kDefaultAlphaFirst;
  double alpha_last = kDefaultAlphaLast;
  int t_max = kDefaultTMax;
  MatchMode m_mode = MatchMode::kl_zero;

  // model
  int hidden = 128;
  int blocks = 2;
  int embed_dim = 64;

  // training
  bool train_in_run = false;  // mse-bench / entropy-report train first instead of loading
  std::int64_t train_steps = 4000;
  int batch = 64;
  double learning_rate = 1e-4;
  std::int64_t warmup_steps = 200;
  LossWeighting weighting = LossWeighting::plain;

  // evaluation
  std::size_t eval_blocks = 2000;

  // entropy
  StepWindow window{2, 150, 1};
  std::size_t mc_samples = 10000;
  std::optional<double> tau = 0.3;
  int recommend_first = kTmaxLowerClamp;
  int recommend_last = kTmaxUpperClamp;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& yaml_text);
// YAML with the same sections load_config reads.
std::string render_config(const ExperimentConfig& config);
void validate(const ExperimentConfig& config);

DiffusionSchedule make_schedule(const ExperimentConfig& config);
TrainingConfig training_config(const ExperimentConfig& config);

struct MetricsRecord {
  std::string run_id;
  ChannelMode channel = ChannelMode::awgn;
  double snr_db = 0.0;
  double sigma_h = 0.0;
  int m = 0;
  double mse_with_cddm = 0.0;     // MSE(x, y)
  double mse_without_cddm = 0.0;  // MSE(x, y_r)
  double mse_x0_with_cddm = 0.0;  // MSE(W_s x, y)
  double mse_x0_without_cddm = 0.0;
  std::size_t blocks = 0;
  double wall_seconds = 0.0;  // manifest only; kept out of the CSV so reruns are byte-identical

  double gain_db() const;
};

double to_db(double value);

// Columns are blocks: source draw x, its target W_s x, the receiver's y_r and the h_r / w_n it
// conditions on (computed from the estimate when sigma_h > 0).
struct ObservationBatch {
  Eigen::MatrixXd x, x0, y_r, h_r, w_n;
};

ObservationBatch simulate_observations(const ExperimentConfig& config, SourceModel& source,
                                       double sigma, double sigma_h, Eigen::Index blocks,
                                       Stream& rng);

// For every (SNR, sigma_h) pair: simulate blocks through channel, MMSE and normalize-reshape,
// then run the reverse sampler with m = select_m on the very same y_r. Both MSEs are computed
// on identical realizations.
std::vector<MetricsRecord> run_mse_experiment(const ExperimentConfig& config,
                                              const DenoiserNet& net,
                                              const DiffusionSchedule& schedule);

inline constexpr const char* kMetricsHeader =
    "run_id,channel,snr_db,sigma_h,m,mse_with_cddm,mse_without_cddm,mse_with_cddm_db,"
    "mse_without_cddm_db,gain_db,mse_x0_with_cddm,mse_x0_without_cddm,blocks";

std::string metrics_csv_rows(const std::vector<MetricsRecord>& records);

// Throws DuplicateRunError when the metrics file at `path` already has rows for run_id.
void ensure_new_run(const std::filesystem::path& path, const std::string& run_id);

// Appends rows, writing the header for a new file. Throws DuplicateRunError when the file
// already has rows for any of the records' run ids.
void append_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records);

struct EntropyOutcome {
  MonteCarloReport report;
  TmaxRecommendation recommendation;
};

EntropyOutcome run_entropy_experiment(const ExperimentConfig& config, const DenoiserNet& net,
                                      const DiffusionSchedule& schedule);

// Path of the manifest written next to an output file.
std::filesystem::path manifest_path(const std::filesystem::path& output, const std::string& run_id);

// Resolved config plus free-form key/values (timings, recommendations).
void write_manifest(const std::filesystem::path& path, const ExperimentConfig& config,
                    const std::vector<std::pair<std::string, std::string>>& extra);

}  // namespace cddm
