#pragma once

#include <algorithm>
#include <cmath>

#include "cddm/denoiser.hpp"
#include "cddm/rng.hpp"
#include "cddm/schedule.hpp"

// A small random problem: every parameter randomized (the default zero output layer would
// hide most of the gradient), random states, steps and weights.
struct GradProblem {
  cddm::DenoiserNet net;
  cddm::TrainingBatch batch;
  cddm::LossWeighting weighting;
};

inline GradProblem random_grad_problem(std::uint64_t seed, const cddm::DiffusionSchedule& schedule) {
  cddm::Stream rng(seed);
  cddm::Architecture a;
  a.signal_dim = 2 * static_cast<int>(rng.uniform_int(1, 3));
  a.hidden = static_cast<int>(rng.uniform_int(3, 16));
  a.blocks = static_cast<int>(rng.uniform_int(0, 3));
  a.embed_dim = 2 * static_cast<int>(rng.uniform_int(1, 4));
  std::vector<double> params(cddm::DenoiserNet::parameter_count(a));
  for (double& p : params) p = 0.6 * rng.normal();
  const int b = static_cast<int>(rng.uniform_int(1, 4));
  const auto n = static_cast<Eigen::Index>(a.signal_dim);
  cddm::TrainingBatch batch;
  batch.x0.resize(n, b);
  batch.w_n.resize(n, b);
  batch.h_r.resize(n, b);
  batch.eps.resize(n, b);
  for (Eigen::Index j = 0; j < b; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      batch.x0(i, j) = 0.3 * rng.normal();
      batch.w_n(i, j) = 0.2 + rng.uniform();
      batch.h_r(i, j) = 0.1 + 1.5 * rng.uniform();
      batch.eps(i, j) = rng.normal();
    }
    batch.steps.push_back(static_cast<int>(rng.uniform_int(1, static_cast<std::uint64_t>(schedule.steps()))));
  }
  const auto w = rng.uniform() < 0.5 ? cddm::LossWeighting::plain : cddm::LossWeighting::weighted;
  return {cddm::DenoiserNet(a, std::move(params)), std::move(batch), w};
}

// max |analytic - central difference| / max |central difference|
inline double gradient_relative_error(const GradProblem& p, const cddm::DiffusionSchedule& schedule,
                                      double h = 1e-6) {
  const cddm::LossGradient g = cddm::grad_loss(p.net, schedule, p.batch, p.weighting);
  cddm::DenoiserNet probe = p.net;
  auto params = probe.mutable_parameters();
  double worst = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = cddm::batch_loss(probe, schedule, p.batch, p.weighting);
    params[i] = keep - h;
    const double down = cddm::batch_loss(probe, schedule, p.batch, p.weighting);
    params[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - g.gradient[i]));
    scale = std::max(scale, std::abs(fd));
  }
  return worst / std::max(scale, 1e-300);
}
