#include "cddm/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cddm/errors.hpp"

namespace cddm {

const char* to_string(MatchMode mode) {
  return mode == MatchMode::kl_zero ? "kl-zero" : "two-sigma-sq";
}

MatchMode parse_match_mode(std::string_view text) {
  if (text == "kl-zero") return MatchMode::kl_zero;
  if (text == "two-sigma-sq") return MatchMode::two_sigma_sq;
  throw ParameterError("unknown m-selection mode '" + std::string(text) + "'");
}

DiffusionSchedule::DiffusionSchedule(int steps, double alpha_first, double alpha_last, int t_max)
    : alpha_first_(alpha_first), alpha_last_(alpha_last), t_max_(t_max) {
  if (steps < 2) throw ParameterError("schedule needs at least 2 steps");
  if (!(0.0 < alpha_last && alpha_last <= alpha_first && alpha_first < 1.0)) {
    throw ParameterError("schedule endpoints must satisfy 0 < alpha_last <= alpha_first < 1");
  }
  if (t_max < 1 || t_max > steps) {
    throw ParameterError("t_max must lie in [1, " + std::to_string(steps) + "], got " +
                         std::to_string(t_max));
  }
  alpha_.resize(steps);
  alpha_bar_.resize(steps);
  const double span = alpha_last - alpha_first;
  double bar = 1.0;
  for (int i = 0; i < steps; ++i) {
    alpha_[i] = alpha_first + span * static_cast<double>(i) / static_cast<double>(steps - 1);
    bar *= alpha_[i];
    alpha_bar_[i] = bar;
  }
}

void DiffusionSchedule::check_step(int t) const {
  if (t < 1 || t > steps()) {
    throw ParameterError("diffusion step " + std::to_string(t) + " outside [1, " +
                         std::to_string(steps()) + "]");
  }
}

double DiffusionSchedule::alpha(int t) const {
  check_step(t);
  return alpha_[t - 1];
}

double DiffusionSchedule::alpha_bar(int t) const {
  check_step(t);
  return alpha_bar_[t - 1];
}

double DiffusionSchedule::noise_ratio(int t) const {
  const double ab = alpha_bar(t);
  return (1.0 - ab) / ab;
}

DiffusionSchedule build_schedule(int steps, double alpha_first, double alpha_last, int t_max) {
  return DiffusionSchedule(steps, alpha_first, alpha_last, t_max);
}

DiffusionSchedule default_schedule() {
  return build_schedule(kDefaultSteps, kDefaultAlphaFirst, kDefaultAlphaLast, kDefaultTMax);
}

RealSignalBlock forward_diffuse(const RealSignalBlock& x0, int t, std::span<const double> w_n_diag,
                                std::span<const double> eps, const DiffusionSchedule& schedule) {
  const std::size_t n = x0.size();
  if (eps.size() != n || w_n_diag.size() != n) {
    throw DimensionError("forward_diffuse: noise or weight length differs from block length");
  }
  const double ab = schedule.alpha_bar(t);
  const double signal = std::sqrt(ab);
  const double noise = std::sqrt(1.0 - ab);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = signal * x0[i] + noise * w_n_diag[i] * eps[i];
  return RealSignalBlock(std::move(out));
}

StepCoefficients step_coefficients(int t, const DiffusionSchedule& schedule) {
  const double ab = schedule.alpha_bar(t);
  StepCoefficients c;
  c.gamma = std::sqrt(1.0 - ab);
  c.beta = c.gamma / std::sqrt(schedule.alpha(t));
  c.gamma_prev = t >= 2 ? std::sqrt(1.0 - schedule.alpha_bar(t - 1)) : 0.0;
  return c;
}

int select_m(const DiffusionSchedule& schedule, double sigma, MatchMode mode) {
  if (!(sigma >= 0.0)) throw ParameterError("select_m: sigma must be nonnegative");
  const double s2 = sigma * sigma;
  const double target = mode == MatchMode::kl_zero ? s2 : 2.0 * s2;
  int best = 1;
  double best_gap = std::abs(target - schedule.noise_ratio(1));
  for (int m = 2; m <= schedule.steps(); ++m) {
    const double gap = std::abs(target - schedule.noise_ratio(m));
    if (gap < best_gap) {
      best_gap = gap;
      best = m;
    }
  }
  return std::min(best, schedule.t_max());
}

}  // namespace cddm
