#include "cddm/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "cddm/errors.hpp"
#include "cddm/format.hpp"
#include "cddm/train.hpp"

namespace cddm {

double entropy_constant() { return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e); }

BatchEstimator as_batch_estimator(const DenoiserNet& net) {
  return [&net](const TrainingBatch& batch, const Eigen::MatrixXd& x_t) {
    return net.predict_batch(x_t, batch.h_r, batch.steps);
  };
}

namespace {

// Linear-interpolated quantile of an unsorted sample.
double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace

EpsilonMoments mc_moments(const BatchEstimator& estimator, SourceModel& source,
                          const DiffusionSchedule& schedule, ChannelMode channel, int t,
                          std::size_t n, Stream& rng, std::size_t chunk) {
  if (n == 0) throw ParameterError("mc_moments needs at least one sample");
  if (chunk == 0) chunk = n;
  const auto dim = static_cast<Eigen::Index>(2 * source.k());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sum_err = Eigen::VectorXd::Zero(dim);
  std::size_t done = 0;
  for (std::uint64_t c = 0; done < n; ++c) {
    const auto size = static_cast<int>(std::min(chunk, n - done));
    Stream sub = rng.split(c);
    const TrainingBatch batch = draw_training_batch(source, schedule, channel, size, sub, t);
    const Eigen::MatrixXd x_t = diffused_states(batch, schedule);
    const Eigen::MatrixXd pred = estimator(batch, x_t);
    if (pred.rows() != dim || pred.cols() != size) {
      throw DimensionError("mc_moments: estimator returned a matrix of the wrong shape");
    }
    sum += pred.rowwise().sum();
    sum_sq += pred.cwiseAbs2().rowwise().sum();
    sum_err += (batch.eps - pred).cwiseAbs2().rowwise().sum();
    done += static_cast<std::size_t>(size);
  }
  const double inv = 1.0 / static_cast<double>(n);
  EpsilonMoments m;
  m.t = t;
  m.samples = n;
  m.mean_eps.resize(static_cast<std::size_t>(dim));
  m.mean_eps_sq.resize(static_cast<std::size_t>(dim));
  m.mean_sq_err.resize(static_cast<std::size_t>(dim));
  for (Eigen::Index i = 0; i < dim; ++i) {
    const auto u = static_cast<std::size_t>(i);
    m.mean_eps[u] = sum(i) * inv;
    m.mean_eps_sq[u] = sum_sq(i) * inv;
    m.mean_sq_err[u] = sum_err(i) * inv;
    const double var = std::max(0.0, m.mean_eps_sq[u] - m.mean_eps[u] * m.mean_eps[u]);
    m.mean_eps_stderr = std::max(m.mean_eps_stderr, std::sqrt(var * inv));
    m.max_abs_mean_eps = std::max(m.max_abs_mean_eps, std::abs(m.mean_eps[u]));
  }
  m.mean_eps_avg = sum.sum() * inv / static_cast<double>(dim);
  m.mean_eps_sq_avg = sum_sq.sum() * inv / static_cast<double>(dim);
  m.tau_hat = quantile(m.mean_sq_err, kTauPercentile);
  return m;
}

double f_tau(int t, double tau, const DiffusionSchedule& schedule) {
  if (t < 2) throw DomainError("f_tau is undefined at t = 1 (gamma_0 = 0)");
  const StepCoefficients c = step_coefficients(t, schedule);
  const double bg = c.beta * c.gamma_prev;
  const double denom = c.gamma_prev * c.gamma_prev - bg;
  if (denom == 0.0) throw DomainError("f_tau: zero denominator at t = " + std::to_string(t));
  const double one_minus_bar = 1.0 - schedule.alpha_bar(t);
  return (one_minus_bar - bg) / denom - (c.beta * c.beta - bg) / denom * tau;
}

double u_tau(int t, double tau, double mean_eps_sq, double w_n, const DiffusionSchedule& schedule) {
  if (t < 2) throw DomainError("u_tau is undefined at t = 1 (gamma_0 = 0)");
  const StepCoefficients c = step_coefficients(t, schedule);
  const double bg = c.beta * c.gamma_prev;
  const double variance_bound =
      w_n * w_n * ((c.gamma_prev * c.gamma_prev - bg) * mean_eps_sq + bg + (c.beta * c.beta - bg) * tau);
  if (!(variance_bound > 0.0)) {
    std::ostringstream msg;
    msg << "u_tau: variance bound " << variance_bound << " is not positive at t = " << t
        << " (E[eps_theta^2] = " << mean_eps_sq << ", tau = " << tau
        << "); the bounded-loss assumption does not hold for these inputs";
    throw DomainError(msg.str());
  }
  return 0.5 * std::log(variance_bound) + entropy_constant();
}

double conditional_entropy_step(int t, double w_n, const DiffusionSchedule& schedule) {
  if (!(w_n > 0.0)) throw DomainError("conditional entropy needs w_n > 0 (degenerate coordinate)");
  return 0.5 * std::log(w_n * w_n * (1.0 - schedule.alpha_bar(t))) + entropy_constant();
}

std::vector<int> StepWindow::steps() const {
  if (first < 1 || last < first || stride < 1) {
    throw ParameterError("step window must satisfy 1 <= first <= last and stride >= 1");
  }
  std::vector<int> out;
  for (int t = first; t <= last; t += stride) out.push_back(t);
  if (out.back() != last) out.push_back(last);
  return out;
}

MonteCarloReport entropy_report(const BatchEstimator& estimator, SourceModel& source,
                                const DiffusionSchedule& schedule, ChannelMode channel,
                                const StepWindow& window, std::size_t samples_per_step,
                                std::optional<double> fixed_tau, Stream& rng) {
  if (window.first < 2) throw ParameterError("entropy report window must start at t >= 2");
  MonteCarloReport report;
  report.channel = channel;
  report.samples_per_step = samples_per_step;
  report.fixed_tau = fixed_tau;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  bool all_zero = true;
  for (int t : window.steps()) {
    Stream step_rng = rng.split(static_cast<std::uint64_t>(t));
    const EpsilonMoments m =
        mc_moments(estimator, source, schedule, channel, t, samples_per_step, step_rng);
    ReportRow row;
    row.t = t;
    row.mean_eps = m.mean_eps_avg;
    row.mean_eps_sq = m.mean_eps_sq_avg;
    row.max_abs_mean_eps = m.max_abs_mean_eps;
    row.tau_hat = m.tau_hat;
    row.tau = fixed_tau.value_or(m.tau_hat);
    row.f_tau = f_tau(t, row.tau, schedule);
    row.entropy = conditional_entropy_step(t, 1.0, schedule);
    try {
      row.u_tau = u_tau(t, row.tau, row.mean_eps_sq, 1.0, schedule);
      row.margin = row.entropy - row.u_tau;
    } catch (const DomainError& e) {
      row.u_tau = nan;
      row.margin = nan;
      report.warnings.emplace_back(e.what());
    }
    if (row.mean_eps_sq != 0.0) all_zero = false;
    report.rows.push_back(row);
  }
  if (all_zero) {
    report.warnings.emplace_back(
        "estimator output is identically zero (untrained network?); E[eps_theta^2] = 0 at every step");
  }
  return report;
}

std::string report_csv(const MonteCarloReport& report) {
  std::ostringstream out;
  out << "t,mean_eps,mean_eps_sq,tau_hat,f_tau,H,u_tau,margin\n";
  for (const auto& r : report.rows) {
    out << r.t << ',' << fmt_double(r.mean_eps) << ',' << fmt_double(r.mean_eps_sq) << ','
        << fmt_double(r.tau_hat) << ',' << fmt_double(r.f_tau) << ',' << fmt_double(r.entropy)
        << ',' << fmt_double(r.u_tau) << ',' << fmt_double(r.margin) << '\n';
  }
  return out.str();
}

void write_report_csv(const std::filesystem::path& path, const MonteCarloReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write entropy report: " + path.string());
  out << report_csv(report);
  if (!out) throw IoError("write failed for entropy report " + path.string());
}

TmaxRecommendation recommend_tmax(const MonteCarloReport& report, int first, int last) {
  std::vector<const ReportRow*> rows;
  for (const auto& r : report.rows) {
    if (r.t >= first && r.t <= last) rows.push_back(&r);
  }
  if (rows.empty()) {
    throw ParameterError("report has no rows inside the window [" + std::to_string(first) + ", " +
                         std::to_string(last) + "]");
  }
  auto slope = [&rows](std::size_t i) {
    const std::size_t a = i + 1 < rows.size() ? i : i - 1;
    const std::size_t b = a + 1;
    return (rows[b]->margin - rows[a]->margin) / static_cast<double>(rows[b]->t - rows[a]->t);
  };
  const double initial = rows.size() > 1 ? std::abs(slope(0)) : 0.0;

  TmaxRecommendation rec;
  int best = -1;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ReportRow& r = *rows[i];
    if (!(r.mean_eps_sq >= r.f_tau)) continue;
    rec.condition_met = true;
    const double s = rows.size() > 1 ? std::abs(slope(i)) : 0.0;
    if (rows.size() == 1 || !(s < kFlatSlopeFraction * initial)) best = r.t;
  }
  if (!rec.condition_met) {
    rec.t_max = std::clamp(rows.front()->t, kTmaxLowerClamp, kTmaxUpperClamp);
    rec.warning = "E[eps_theta^2] >= f_tau(t) never holds in [" + std::to_string(first) + ", " +
                  std::to_string(last) + "]; falling back to the window start";
    return rec;
  }
  if (best < 0) best = rows.front()->t;
  rec.t_max = std::clamp(best, kTmaxLowerClamp, kTmaxUpperClamp);
  return rec;
}

}  // namespace cddm
