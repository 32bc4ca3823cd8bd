#include "cddm/denoiser.hpp"

#include <cmath>
#include <string>

#include "cddm/errors.hpp"

namespace cddm {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstMatMap = Eigen::Map<const MatrixXd>;
using MatMap = Eigen::Map<MatrixXd>;
using ConstVecMap = Eigen::Map<const VectorXd>;
using VecMap = Eigen::Map<VectorXd>;

namespace {

MatrixXd silu(const MatrixXd& x) {
  return x.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
}

MatrixXd silu_grad(const MatrixXd& x) {
  return x.unaryExpr([](double v) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    return s * (1.0 + v * (1.0 - s));
  });
}

void check_architecture(const Architecture& arch) {
  if (arch.signal_dim <= 0 || arch.signal_dim % 2 != 0) {
    throw ParameterError("architecture: signal_dim must be a positive even number");
  }
  if (arch.hidden <= 0 || arch.blocks < 0) {
    throw ParameterError("architecture: hidden must be positive and blocks nonnegative");
  }
  if (arch.embed_dim <= 0 || arch.embed_dim % 2 != 0) {
    throw ParameterError("architecture: embed_dim must be a positive even number");
  }
}

}  // namespace

std::vector<double> timestep_embedding(int t, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw ParameterError("timestep embedding needs an even width");
  const int half = dim / 2;
  std::vector<double> out(dim);
  for (int j = 0; j < half; ++j) {
    const double freq = std::exp(-std::log(10000.0) * j / half);
    out[j] = std::sin(t * freq);
    out[j + half] = std::cos(t * freq);
  }
  return out;
}

// Offsets of each tensor inside the flat parameter vector. Matrices are column-major.
struct DenoiserNet::Layout {
  struct Block {
    std::size_t w1, b1, emb, w2, b2;
  };
  std::size_t w_in = 0, b_in = 0;
  std::vector<Block> blocks;
  std::size_t w_out = 0, b_out = 0;
  std::size_t total = 0;

  explicit Layout(const Architecture& a) {
    const std::size_t h = a.hidden;
    std::size_t at = 0;
    auto take = [&at](std::size_t n) {
      const std::size_t start = at;
      at += n;
      return start;
    };
    w_in = take(h * a.input_dim());
    b_in = take(h);
    for (int b = 0; b < a.blocks; ++b) {
      Block blk{};
      blk.w1 = take(h * h);
      blk.b1 = take(h);
      blk.emb = take(h * a.embed_dim);
      blk.w2 = take(h * h);
      blk.b2 = take(h);
      blocks.push_back(blk);
    }
    w_out = take(a.signal_dim * h);
    b_out = take(a.signal_dim);
    total = at;
  }
};

DenoiserNet::Layout DenoiserNet::layout() const { return Layout(arch_); }

std::size_t DenoiserNet::parameter_count(const Architecture& arch) {
  check_architecture(arch);
  return Layout(arch).total;
}

DenoiserNet::DenoiserNet(const Architecture& arch, Stream& init_rng) : arch_(arch) {
  const Layout l(arch_);
  params_.assign(parameter_count(arch_), 0.0);
  auto fill = [&](std::size_t offset, std::size_t count, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) {
      params_[offset + i] = bound * (2.0 * init_rng.uniform() - 1.0);
    }
  };
  const std::size_t h = arch_.hidden;
  fill(l.w_in, h * arch_.input_dim(), arch_.input_dim());
  fill(l.b_in, h, arch_.input_dim());
  for (const auto& blk : l.blocks) {
    fill(blk.w1, h * h, arch_.hidden);
    fill(blk.b1, h, arch_.hidden);
    fill(blk.emb, h * arch_.embed_dim, arch_.embed_dim);
    fill(blk.w2, h * h, arch_.hidden);
    fill(blk.b2, h, arch_.hidden);
  }
  // output layer stays zero
}

DenoiserNet::DenoiserNet(const Architecture& arch, std::vector<double> parameters)
    : arch_(arch), params_(parameters.begin(), parameters.end()) {
  if (params_.size() != parameter_count(arch_)) {
    throw DimensionError("denoiser expects " + std::to_string(parameter_count(arch_)) +
                         " parameters, got " + std::to_string(params_.size()));
  }
}

MatrixXd DenoiserNet::embed(std::span<const int> steps) const {
  MatrixXd e(arch_.embed_dim, static_cast<Eigen::Index>(steps.size()));
  for (std::size_t j = 0; j < steps.size(); ++j) {
    const auto col = timestep_embedding(steps[j], arch_.embed_dim);
    e.col(static_cast<Eigen::Index>(j)) = ConstVecMap(col.data(), arch_.embed_dim);
  }
  return e;
}

MatrixXd DenoiserNet::forward(const MatrixXd& x_t, const MatrixXd& h_r, std::span<const int> steps,
                              Cache* cache) const {
  const Eigen::Index n = arch_.signal_dim;
  const Eigen::Index batch = x_t.cols();
  if (x_t.rows() != n || h_r.rows() != n || h_r.cols() != batch ||
      static_cast<Eigen::Index>(steps.size()) != batch) {
    throw DimensionError("denoiser forward: expected " + std::to_string(n) +
                         "-row inputs with one step per column");
  }
  const Layout l = layout();
  const Eigen::Index h = arch_.hidden;
  const double* p = params_.data();

  MatrixXd input(2 * n, batch);
  input.topRows(n) = x_t;
  input.bottomRows(n) = h_r;
  MatrixXd emb = embed(steps);

  MatrixXd state = ConstMatMap(p + l.w_in, h, 2 * n) * input;
  state.colwise() += ConstVecMap(p + l.b_in, h);

  if (cache) {
    cache->trunk.clear();
    cache->inner.clear();
  }
  for (const auto& blk : l.blocks) {
    MatrixXd inner = ConstMatMap(p + blk.w1, h, h) * silu(state);
    inner.noalias() += ConstMatMap(p + blk.emb, h, arch_.embed_dim) * emb;
    inner.colwise() += ConstVecMap(p + blk.b1, h);
    MatrixXd update = ConstMatMap(p + blk.w2, h, h) * silu(inner);
    update.colwise() += ConstVecMap(p + blk.b2, h);
    if (cache) {
      cache->trunk.push_back(state);
      cache->inner.push_back(inner);
    }
    state += update;
  }
  MatrixXd out = ConstMatMap(p + l.w_out, n, h) * silu(state);
  out.colwise() += ConstVecMap(p + l.b_out, n);
  if (cache) {
    cache->trunk.push_back(std::move(state));
    cache->input = std::move(input);
    cache->embedding = std::move(emb);
  }
  return out;
}

void DenoiserNet::backward(const Cache& cache, const MatrixXd& d_output,
                           std::span<double> grad) const {
  if (grad.size() != params_.size()) throw DimensionError("gradient buffer has the wrong size");
  const Layout l = layout();
  const Eigen::Index n = arch_.signal_dim;
  const Eigen::Index h = arch_.hidden;
  const double* p = params_.data();
  double* g = grad.data();

  const MatrixXd& last = cache.trunk.back();
  MatMap(g + l.w_out, n, h).noalias() += d_output * silu(last).transpose();
  VecMap(g + l.b_out, n) += d_output.rowwise().sum();
  MatrixXd d_state =
      (ConstMatMap(p + l.w_out, n, h).transpose() * d_output).cwiseProduct(silu_grad(last));

  for (std::size_t b = l.blocks.size(); b-- > 0;) {
    const auto& blk = l.blocks[b];
    const MatrixXd& entering = cache.trunk[b];
    const MatrixXd& inner = cache.inner[b];
    MatMap(g + blk.w2, h, h).noalias() += d_state * silu(inner).transpose();
    VecMap(g + blk.b2, h) += d_state.rowwise().sum();
    const MatrixXd d_inner =
        (ConstMatMap(p + blk.w2, h, h).transpose() * d_state).cwiseProduct(silu_grad(inner));
    MatMap(g + blk.w1, h, h).noalias() += d_inner * silu(entering).transpose();
    VecMap(g + blk.b1, h) += d_inner.rowwise().sum();
    MatMap(g + blk.emb, h, arch_.embed_dim).noalias() += d_inner * cache.embedding.transpose();
    d_state += (ConstMatMap(p + blk.w1, h, h).transpose() * d_inner)
                   .cwiseProduct(silu_grad(entering));
  }
  MatMap(g + l.w_in, h, 2 * n).noalias() += d_state * cache.input.transpose();
  VecMap(g + l.b_in, h) += d_state.rowwise().sum();
}

MatrixXd DenoiserNet::predict_batch(const MatrixXd& x_t, const MatrixXd& h_r,
                                    std::span<const int> steps) const {
  return forward(x_t, h_r, steps, nullptr);
}

std::vector<double> DenoiserNet::predict(std::span<const double> x_t, std::span<const double> h_r,
                                         int t) const {
  const auto n = static_cast<Eigen::Index>(arch_.signal_dim);
  if (static_cast<Eigen::Index>(x_t.size()) != n || static_cast<Eigen::Index>(h_r.size()) != n) {
    throw DimensionError("predict_epsilon: expected vectors of length " + std::to_string(n));
  }
  const MatrixXd out = forward(ConstMatMap(x_t.data(), n, 1), ConstMatMap(h_r.data(), n, 1),
                               std::span<const int>(&t, 1), nullptr);
  return {out.data(), out.data() + n};
}

MatrixXd diffused_states(const TrainingBatch& batch, const DiffusionSchedule& schedule) {
  MatrixXd x_t(batch.x0.rows(), batch.x0.cols());
  for (Eigen::Index j = 0; j < x_t.cols(); ++j) {
    const double ab = schedule.alpha_bar(batch.steps[j]);
    x_t.col(j) = std::sqrt(ab) * batch.x0.col(j) +
                 std::sqrt(1.0 - ab) * batch.w_n.col(j).cwiseProduct(batch.eps.col(j));
  }
  return x_t;
}

namespace {

void check_batch(const TrainingBatch& batch, const DenoiserNet& net) {
  const Eigen::Index n = net.architecture().signal_dim;
  const auto b = static_cast<Eigen::Index>(batch.steps.size());
  if (b == 0) throw ParameterError("training batch is empty");
  for (const MatrixXd* m : {&batch.x0, &batch.w_n, &batch.h_r, &batch.eps}) {
    if (m->rows() != n || m->cols() != b) {
      throw DimensionError("training batch matrices must be " + std::to_string(n) + " x " +
                           std::to_string(b));
    }
  }
}

// Residual eps - eps_theta, optionally scaled by W_n.
MatrixXd weighted_residual(const TrainingBatch& batch, const MatrixXd& prediction,
                           LossWeighting weighting) {
  MatrixXd r = batch.eps - prediction;
  if (weighting == LossWeighting::weighted) r = r.cwiseProduct(batch.w_n);
  return r;
}

}  // namespace

double loss_cddm(const DenoiserNet& net, const DiffusionSchedule& schedule,
                 std::span<const double> x0, std::span<const double> w_n_diag,
                 std::span<const double> h_r, int t, std::span<const double> eps,
                 LossWeighting weighting) {
  const auto n = static_cast<Eigen::Index>(net.architecture().signal_dim);
  for (auto len : {x0.size(), w_n_diag.size(), h_r.size(), eps.size()}) {
    if (static_cast<Eigen::Index>(len) != n) {
      throw DimensionError("loss_cddm: vectors must have length " + std::to_string(n));
    }
  }
  TrainingBatch batch;
  batch.x0 = ConstMatMap(x0.data(), n, 1);
  batch.w_n = ConstMatMap(w_n_diag.data(), n, 1);
  batch.h_r = ConstMatMap(h_r.data(), n, 1);
  batch.eps = ConstMatMap(eps.data(), n, 1);
  batch.steps = {t};
  return batch_loss(net, schedule, batch, weighting);
}

double batch_loss(const DenoiserNet& net, const DiffusionSchedule& schedule,
                  const TrainingBatch& batch, LossWeighting weighting) {
  check_batch(batch, net);
  const MatrixXd pred = net.predict_batch(diffused_states(batch, schedule), batch.h_r, batch.steps);
  return weighted_residual(batch, pred, weighting).squaredNorm() /
         static_cast<double>(batch.size());
}

LossGradient grad_loss(const DenoiserNet& net, const DiffusionSchedule& schedule,
                       const TrainingBatch& batch, LossWeighting weighting) {
  check_batch(batch, net);
  DenoiserNet::Cache cache;
  const MatrixXd pred = net.forward(diffused_states(batch, schedule), batch.h_r, batch.steps, &cache);
  const MatrixXd r = weighted_residual(batch, pred, weighting);
  const double scale = 1.0 / static_cast<double>(batch.size());

  LossGradient out;
  out.loss = r.squaredNorm() * scale;
  // d/d(pred) of mean ||w (eps - pred)||^2 is -2 w^2 (eps - pred) / B.
  MatrixXd d_pred = -2.0 * scale * r;
  if (weighting == LossWeighting::weighted) d_pred = d_pred.cwiseProduct(batch.w_n);
  out.gradient.assign(net.parameter_count(), 0.0);
  net.backward(cache, d_pred, out.gradient);
  return out;
}

}  // namespace cddm
