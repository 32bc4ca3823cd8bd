#include "cddm/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cddm/errors.hpp"

namespace cddm {

double LearningRateSchedule::rate(std::int64_t step) const {
  if (step < 1) throw ParameterError("learning rate schedule steps start at 1");
  if (warmup_steps > 0 && step <= warmup_steps) {
    return base_rate * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  const std::int64_t decay_span = total_steps - warmup_steps;
  if (decay_span <= 0) return base_rate;
  const double progress =
      std::min(1.0, static_cast<double>(step - warmup_steps) / static_cast<double>(decay_span));
  return min_rate + (base_rate - min_rate) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamOptimizer::AdamOptimizer(std::size_t parameter_count, AdamConfig config)
    : config_(config), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {}

AdamOptimizer::AdamOptimizer(AdamConfig config, std::vector<double> first_moment,
                             std::vector<double> second_moment, std::int64_t step)
    : config_(config), m_(std::move(first_moment)), v_(std::move(second_moment)), step_(step) {
  if (m_.size() != v_.size()) throw DimensionError("Adam moment buffers differ in length");
}

double AdamOptimizer::step(std::span<double> parameters, std::span<const double> gradient,
                           const LearningRateSchedule& schedule) {
  if (parameters.size() != m_.size() || gradient.size() != m_.size()) {
    throw DimensionError("Adam: parameter, gradient and moment sizes must match");
  }
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    if (!std::isfinite(gradient[i])) {
      throw NumericError("Adam: non-finite gradient at index " + std::to_string(i) +
                         " (optimizer step " + std::to_string(step_ + 1) + ")");
    }
  }
  ++step_;
  const double lr = schedule.rate(step_);
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * gradient[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * gradient[i] * gradient[i];
    parameters[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.epsilon);
  }
  return lr;
}

}  // namespace cddm
