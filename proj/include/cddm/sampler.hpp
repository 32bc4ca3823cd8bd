#pragma once

#include <Eigen/Core>
#include <functional>
#include <span>
#include <vector>

#include "cddm/denoiser.hpp"
#include "cddm/equalizer.hpp"
#include "cddm/schedule.hpp"

namespace cddm {

// Anything that predicts the driving noise from (x_t, h_r, t).
using NoiseEstimator =
    std::function<std::vector<double>(std::span<const double>, std::span<const double>, int)>;

NoiseEstimator as_estimator(const DenoiserNet& net);

// (x_t - sqrt(1 - abar_t) w_n * eps_hat) / sqrt(abar_t).
std::vector<double> estimate_x0(std::span<const double> x_t, std::span<const double> eps_hat,
                                std::span<const double> w_n_diag, int t,
                                const DiffusionSchedule& schedule);

// Deterministic reverse step
//   x_{t-1} = sqrt(abar_{t-1}) x0_hat + sqrt(1 - abar_{t-1}) w_n * eps_hat,   t >= 2.
std::vector<double> sample_step(std::span<const double> x_t, std::span<const double> eps_hat,
                                std::span<const double> w_n_diag, int t,
                                const DiffusionSchedule& schedule);

// Starts from x_m = y_r, runs the reverse steps m..2 and finishes with the x0 estimate at
// t = 1. Calls the estimator exactly m times. Requires 1 <= m <= t_max.
RealSignalBlock sample(const EqualizedObservation& observation, const NoiseEstimator& estimator,
                       int m, const DiffusionSchedule& schedule);

// Same recursion for many blocks at once, columns are blocks sharing one m.
Eigen::MatrixXd sample_batch(const Eigen::MatrixXd& y_r, const Eigen::MatrixXd& h_r,
                             const Eigen::MatrixXd& w_n, const DenoiserNet& net, int m,
                             const DiffusionSchedule& schedule);

}  // namespace cddm
