#include "cddm/sampler.hpp"

#include <cmath>
#include <string>

#include "cddm/errors.hpp"

namespace cddm {

NoiseEstimator as_estimator(const DenoiserNet& net) {
  return [&net](std::span<const double> x_t, std::span<const double> h_r, int t) {
    return net.predict(x_t, h_r, t);
  };
}

namespace {

void check_lengths(std::size_t n, std::size_t a, std::size_t b) {
  if (a != n || b != n) throw DimensionError("sampler: vector lengths differ");
}

void check_m(int m, const DiffusionSchedule& schedule) {
  if (m < 1 || m > schedule.t_max()) {
    throw ParameterError("sampling start step m = " + std::to_string(m) + " outside [1, " +
                         std::to_string(schedule.t_max()) + "]");
  }
}

}  // namespace

std::vector<double> estimate_x0(std::span<const double> x_t, std::span<const double> eps_hat,
                                std::span<const double> w_n_diag, int t,
                                const DiffusionSchedule& schedule) {
  check_lengths(x_t.size(), eps_hat.size(), w_n_diag.size());
  const double ab = schedule.alpha_bar(t);
  const double noise = std::sqrt(1.0 - ab);
  const double inv_signal = 1.0 / std::sqrt(ab);
  std::vector<double> x0(x_t.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    x0[i] = inv_signal * (x_t[i] - noise * w_n_diag[i] * eps_hat[i]);
  }
  return x0;
}

std::vector<double> sample_step(std::span<const double> x_t, std::span<const double> eps_hat,
                                std::span<const double> w_n_diag, int t,
                                const DiffusionSchedule& schedule) {
  if (t < 2) throw ParameterError("sample_step needs t >= 2; t = 1 is the final estimate");
  std::vector<double> out = estimate_x0(x_t, eps_hat, w_n_diag, t, schedule);
  const double ab_prev = schedule.alpha_bar(t - 1);
  const double signal = std::sqrt(ab_prev);
  const double noise = std::sqrt(1.0 - ab_prev);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = signal * out[i] + noise * w_n_diag[i] * eps_hat[i];
  }
  return out;
}

RealSignalBlock sample(const EqualizedObservation& observation, const NoiseEstimator& estimator,
                       int m, const DiffusionSchedule& schedule) {
  check_m(m, schedule);
  const auto& h_r = observation.channel.h_r;
  const auto& w_n = observation.channel.w_n_diag;
  std::vector<double> x = observation.y_r.values();
  for (int t = m; t >= 2; --t) {
    const auto eps_hat = estimator(x, h_r, t);
    x = sample_step(x, eps_hat, w_n, t, schedule);
  }
  const auto eps_hat = estimator(x, h_r, 1);
  return RealSignalBlock(estimate_x0(x, eps_hat, w_n, 1, schedule));
}

Eigen::MatrixXd sample_batch(const Eigen::MatrixXd& y_r, const Eigen::MatrixXd& h_r,
                             const Eigen::MatrixXd& w_n, const DenoiserNet& net, int m,
                             const DiffusionSchedule& schedule) {
  check_m(m, schedule);
  if (h_r.rows() != y_r.rows() || h_r.cols() != y_r.cols() || w_n.rows() != y_r.rows() ||
      w_n.cols() != y_r.cols()) {
    throw DimensionError("sample_batch: y_r, h_r and w_n must have the same shape");
  }
  Eigen::MatrixXd x = y_r;
  std::vector<int> steps(static_cast<std::size_t>(y_r.cols()));
  for (int t = m; t >= 1; --t) {
    std::fill(steps.begin(), steps.end(), t);
    const Eigen::MatrixXd z = w_n.cwiseProduct(net.predict_batch(x, h_r, steps));
    const double ab = schedule.alpha_bar(t);
    Eigen::MatrixXd x0_hat = (x - std::sqrt(1.0 - ab) * z) / std::sqrt(ab);
    if (t == 1) return x0_hat;
    const double ab_prev = schedule.alpha_bar(t - 1);
    x = std::sqrt(ab_prev) * x0_hat + std::sqrt(1.0 - ab_prev) * z;
  }
  return x;  // unreachable: m >= 1
}

}  // namespace cddm
