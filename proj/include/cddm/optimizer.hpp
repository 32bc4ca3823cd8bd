#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cddm {

// Linear warm-up to `base_rate`, then half-cosine decay to `min_rate` at `total_steps`.
// Steps are 1-based.
struct LearningRateSchedule {
  double base_rate = 1e-4;
  std::int64_t warmup_steps = 100;
  std::int64_t total_steps = 1000;
  double min_rate = 0.0;

  double rate(std::int64_t step) const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::size_t parameter_count, AdamConfig config = {});
  AdamOptimizer(AdamConfig config, std::vector<double> first_moment,
                std::vector<double> second_moment, std::int64_t step);

  // Advances the step counter and applies one bias-corrected update at
  // schedule.rate(step). Throws NumericError if any gradient entry is not finite; the
  // parameters and moments are left untouched in that case.
  double step(std::span<double> parameters, std::span<const double> gradient,
              const LearningRateSchedule& schedule);

  std::int64_t step_count() const { return step_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t step_ = 0;
};

}  // namespace cddm
