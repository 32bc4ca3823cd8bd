#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "cddm/channel.hpp"

namespace cddm {

// How the reverse start step m is matched to the channel noise level.
//   kl_zero       ratio (1 - abar_m)/abar_m targets sigma^2, the exact match between the
//                 forward marginal and the equalized channel output.
//   two_sigma_sq  ratio targets 2 sigma^2.
enum class MatchMode { kl_zero, two_sigma_sq };

const char* to_string(MatchMode mode);
MatchMode parse_match_mode(std::string_view text);

struct StepCoefficients {
  double beta;        // sqrt(1 - abar_t) / sqrt(alpha_t)
  double gamma;       // sqrt(1 - abar_t)
  double gamma_prev;  // sqrt(1 - abar_{t-1}); 0 at t = 1
};

// Linear alpha schedule. Steps are 1-based everywhere in the public interface.
class DiffusionSchedule {
 public:
  DiffusionSchedule(int steps, double alpha_first, double alpha_last, int t_max);

  int steps() const { return static_cast<int>(alpha_.size()); }
  int t_max() const { return t_max_; }
  double alpha_first() const { return alpha_first_; }
  double alpha_last() const { return alpha_last_; }

  double alpha(int t) const;
  double alpha_bar(int t) const;
  // (1 - abar_t) / abar_t, the channel noise variance matched by step t.
  double noise_ratio(int t) const;

  const std::vector<double>& alphas() const { return alpha_; }
  const std::vector<double>& alpha_bars() const { return alpha_bar_; }

 private:
  void check_step(int t) const;

  double alpha_first_;
  double alpha_last_;
  int t_max_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
};

// alpha_t = alpha_first + (t-1)/(T-1) (alpha_last - alpha_first).
DiffusionSchedule build_schedule(int steps, double alpha_first, double alpha_last, int t_max);

inline constexpr int kDefaultSteps = 1000;
inline constexpr double kDefaultAlphaFirst = 0.9999;
inline constexpr double kDefaultAlphaLast = 0.98;
inline constexpr int kDefaultTMax = 93;

DiffusionSchedule default_schedule();

// sqrt(abar_t) x0 + sqrt(1 - abar_t) w_n * eps, elementwise.
RealSignalBlock forward_diffuse(const RealSignalBlock& x0, int t, std::span<const double> w_n_diag,
                                std::span<const double> eps, const DiffusionSchedule& schedule);

StepCoefficients step_coefficients(int t, const DiffusionSchedule& schedule);

// m = min(t_max, argmin_m |target - (1 - abar_m)/abar_m|), ties to the smaller m.
int select_m(const DiffusionSchedule& schedule, double sigma, MatchMode mode = MatchMode::kl_zero);

}  // namespace cddm
