#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cddm/denoiser.hpp"
#include "cddm/schedule.hpp"
#include "cddm/source.hpp"

namespace cddm {

// Gaussian entropy offset 0.5 ln(2 pi e).
double entropy_constant();

// Batch noise estimate. Receives the whole batch (including the true eps, so oracle
// estimators can be expressed) and the diffused states built from it.
using BatchEstimator = std::function<Eigen::MatrixXd(const TrainingBatch&, const Eigen::MatrixXd&)>;

BatchEstimator as_batch_estimator(const DenoiserNet& net);

inline constexpr double kTauPercentile = 0.95;

struct EpsilonMoments {
  int t = 0;
  std::size_t samples = 0;
  std::vector<double> mean_eps;     // per coordinate, E[eps_theta]
  std::vector<double> mean_eps_sq;  // per coordinate, E[eps_theta^2]
  std::vector<double> mean_sq_err;  // per coordinate, E[(eps - eps_theta)^2]
  double mean_eps_avg = 0.0;        // coordinate average
  double mean_eps_sq_avg = 0.0;
  double max_abs_mean_eps = 0.0;
  double mean_eps_stderr = 0.0;     // largest per-coordinate standard error of mean_eps
  double tau_hat = 0.0;             // kTauPercentile quantile of mean_sq_err over coordinates
};

// Monte-Carlo moments of the estimator output at fixed step t over source, channel and noise
// draws, evaluated in chunks of at most `chunk` blocks.
EpsilonMoments mc_moments(const BatchEstimator& estimator, SourceModel& source,
                          const DiffusionSchedule& schedule, ChannelMode channel, int t,
                          std::size_t n, Stream& rng, std::size_t chunk = 1000);

// Threshold on E[eps_theta^2] above which the entropy bound decreases:
//   f_tau(t) = (1 - abar_t - beta_t g) / (g^2 - beta_t g) - (beta_t^2 - beta_t g) / (g^2 - beta_t g) tau
// with g = gamma_{t-1}. Defined for t >= 2.
double f_tau(int t, double tau, const DiffusionSchedule& schedule);

// Upper bound on H(x_{t-1,i} | x0, h):
//   0.5 ln(w^2 ((g^2 - beta_t g) E[eps_theta^2] + beta_t g + (beta_t^2 - beta_t g) tau)) + C.
// Throws DomainError when the log argument is not positive.
double u_tau(int t, double tau, double mean_eps_sq, double w_n, const DiffusionSchedule& schedule);

// H(x_{t,i} | x0, h) = 0.5 ln(w^2 (1 - abar_t)) + C. Requires w_n > 0.
double conditional_entropy_step(int t, double w_n, const DiffusionSchedule& schedule);

struct ReportRow {
  int t = 0;
  double mean_eps = 0.0;
  double mean_eps_sq = 0.0;
  double max_abs_mean_eps = 0.0;
  double tau_hat = 0.0;
  double tau = 0.0;  // value used for f_tau and u_tau on this row
  double f_tau = 0.0;
  double entropy = 0.0;  // H(x_t | x0, h) at w_n = 1
  double u_tau = 0.0;    // NaN when the bound's log argument is not positive
  double margin = 0.0;   // entropy - u_tau
};

struct MonteCarloReport {
  ChannelMode channel = ChannelMode::awgn;
  std::size_t samples_per_step = 0;
  double percentile = kTauPercentile;
  std::optional<double> fixed_tau;  // empty: each row uses its own tau_hat
  std::vector<ReportRow> rows;
  std::vector<std::string> warnings;
};

struct StepWindow {
  int first = 2;
  int last = 150;
  int stride = 1;

  std::vector<int> steps() const;
};

MonteCarloReport entropy_report(const BatchEstimator& estimator, SourceModel& source,
                                const DiffusionSchedule& schedule, ChannelMode channel,
                                const StepWindow& window, std::size_t samples_per_step,
                                std::optional<double> fixed_tau, Stream& rng);

void write_report_csv(const std::filesystem::path& path, const MonteCarloReport& report);
std::string report_csv(const MonteCarloReport& report);

inline constexpr double kFlatSlopeFraction = 0.01;
inline constexpr int kTmaxLowerClamp = 10;
inline constexpr int kTmaxUpperClamp = 150;

struct TmaxRecommendation {
  int t_max = kTmaxLowerClamp;
  bool condition_met = false;
  std::string warning;
};

// Largest report step in [first, last] where mean_eps_sq >= f_tau and the margin slope is
// still at least kFlatSlopeFraction of its value at the start of the window, clamped to
// [kTmaxLowerClamp, kTmaxUpperClamp]. Falls back to `first` with a warning when the
// condition never holds.
TmaxRecommendation recommend_tmax(const MonteCarloReport& report, int first, int last);

}  // namespace cddm
