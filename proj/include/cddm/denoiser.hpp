#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

#include "cddm/rng.hpp"
#include "cddm/schedule.hpp"

namespace cddm {

// Aligned storage so vectorized kernels see the same memory layout on every run.
using AlignedVector = std::vector<double, Eigen::aligned_allocator<double>>;

// Shape of the noise estimator eps_theta(x_t, h_r, t).
//
// Input is [x_t; h_r] (width 2 * signal_dim), lifted to `hidden` units. Each residual block
// computes
//     h <- h + W2 silu(W1 silu(h) + b1 + E emb(t)) + b2
// where emb(t) is the sinusoidal timestep embedding and E is the block's own projection of it.
// The output layer maps silu(h) back to signal_dim and starts at zero.
struct Architecture {
  int signal_dim = 0;  // 2k
  int hidden = 128;
  int blocks = 2;
  int embed_dim = 64;

  int input_dim() const { return 2 * signal_dim; }
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// Sinusoidal features [sin(t w_j), cos(t w_j)] with w_j = 10000^(-j / (dim/2)).
std::vector<double> timestep_embedding(int t, int dim);

class DenoiserNet {
 public:
  // Scaled-uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero output layer.
  DenoiserNet(const Architecture& arch, Stream& init_rng);
  DenoiserNet(const Architecture& arch, std::vector<double> parameters);

  const Architecture& architecture() const { return arch_; }
  std::size_t parameter_count() const { return params_.size(); }
  const AlignedVector& parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }

  // Single block. h_r is all ones under AWGN.
  std::vector<double> predict(std::span<const double> x_t, std::span<const double> h_r,
                              int t) const;

  // Column-per-sample batch: x_t and h_r are signal_dim x B, steps has B entries.
  Eigen::MatrixXd predict_batch(const Eigen::MatrixXd& x_t, const Eigen::MatrixXd& h_r,
                                std::span<const int> steps) const;

  struct Cache;
  // Batch forward pass; fills `cache` for backward() when non-null.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x_t, const Eigen::MatrixXd& h_r,
                          std::span<const int> steps, Cache* cache) const;
  // Adds d(objective)/d(params) into `grad` given d(objective)/d(output).
  void backward(const Cache& cache, const Eigen::MatrixXd& d_output, std::span<double> grad) const;

  static std::size_t parameter_count(const Architecture& arch);

 private:
  struct Layout;
  Layout layout() const;
  Eigen::MatrixXd embed(std::span<const int> steps) const;

  Architecture arch_;
  AlignedVector params_;
};

struct DenoiserNet::Cache {
  Eigen::MatrixXd input;              // [x_t; h_r]
  Eigen::MatrixXd embedding;          // embed_dim x B
  std::vector<Eigen::MatrixXd> trunk; // hidden states entering each block, plus the last
  std::vector<Eigen::MatrixXd> inner; // pre-activation inside each block
};

// Samples for the CDDM objective, one per column.
struct TrainingBatch {
  Eigen::MatrixXd x0;     // W_s x
  Eigen::MatrixXd w_n;    // noise coloring diagonal
  Eigen::MatrixXd h_r;    // conditioning
  Eigen::MatrixXd eps;    // driving noise
  std::vector<int> steps; // diffusion step per column

  std::size_t size() const { return steps.size(); }
};

enum class LossWeighting {
  plain,     // ||eps - eps_theta||^2
  weighted,  // ||W_n (eps - eps_theta)||^2
};

// Noisy state sqrt(abar_t) x0 + sqrt(1 - abar_t) W_n eps for every column.
Eigen::MatrixXd diffused_states(const TrainingBatch& batch, const DiffusionSchedule& schedule);

// Per-block objective ||eps - eps_theta(sqrt(abar_t) x0 + sqrt(1-abar_t) W_n eps, h_r, t)||^2.
double loss_cddm(const DenoiserNet& net, const DiffusionSchedule& schedule,
                 std::span<const double> x0, std::span<const double> w_n_diag,
                 std::span<const double> h_r, int t, std::span<const double> eps,
                 LossWeighting weighting = LossWeighting::plain);

struct LossGradient {
  double loss = 0.0;             // mean over the batch
  AlignedVector gradient;  // same layout as the parameters
};

LossGradient grad_loss(const DenoiserNet& net, const DiffusionSchedule& schedule,
                       const TrainingBatch& batch, LossWeighting weighting = LossWeighting::plain);

double batch_loss(const DenoiserNet& net, const DiffusionSchedule& schedule,
                  const TrainingBatch& batch, LossWeighting weighting = LossWeighting::plain);

}  // namespace cddm
