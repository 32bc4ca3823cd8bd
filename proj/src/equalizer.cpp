#include "cddm/equalizer.hpp"

#include <cmath>
#include <string>

#include "cddm/errors.hpp"

namespace cddm {

MmseWeights mmse_weights(std::span<const Complex> h, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("mmse_weights: sigma must be positive");
  const std::size_t k = h.size();
  const double noise = 2.0 * sigma * sigma;
  MmseWeights w;
  w.w_s.resize(2 * k);
  w.w_n.resize(2 * k);
  for (std::size_t i = 0; i < k; ++i) {
    const double mag = std::abs(h[i]);
    const double denom = mag * mag + noise;
    w.w_s[i] = w.w_s[i + k] = mag * mag / denom;
    w.w_n[i] = w.w_n[i + k] = mag / denom;
  }
  return w;
}

ChannelRealization realize(const Channel& channel, double sigma, std::size_t k) {
  ChannelRealization r;
  r.mode = channel.mode;
  r.sigma = sigma;
  if (channel.mode == ChannelMode::awgn) {
    if (!(sigma >= 0.0)) throw ParameterError("realize: sigma must be nonnegative");
    r.h_c.assign(k, Complex{1.0, 0.0});
    r.h_r.assign(2 * k, 1.0);
    r.w_s_diag.assign(2 * k, 1.0);
    r.w_n_diag.assign(2 * k, 1.0);
    return r;
  }
  if (channel.gains.size() != k) {
    throw DimensionError("realize: " + std::to_string(channel.gains.size()) + " gains for k = " +
                         std::to_string(k));
  }
  r.h_c = channel.gains;
  r.h_r.resize(2 * k);
  for (std::size_t i = 0; i < k; ++i) r.h_r[i] = r.h_r[i + k] = std::abs(channel.gains[i]);
  auto w = mmse_weights(channel.gains, sigma);
  r.w_s_diag = std::move(w.w_s);
  r.w_n_diag = std::move(w.w_n);
  return r;
}

ComplexSymbolBlock equalize_mmse(const ComplexSymbolBlock& yc, std::span<const Complex> h,
                                 double sigma) {
  if (yc.re.size() != h.size() || yc.im.size() != h.size()) {
    throw DimensionError("equalize_mmse: " + std::to_string(h.size()) + " gains for " +
                         std::to_string(yc.re.size()) + " symbols");
  }
  const double noise = 2.0 * sigma * sigma;
  ComplexSymbolBlock out;
  out.re.resize(h.size());
  out.im.resize(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double denom = std::norm(h[i]) + noise;
    const Complex v = denom > 0.0 ? std::conj(h[i]) * yc.at(i) / denom : Complex{};
    out.re[i] = v.real();
    out.im[i] = v.imag();
  }
  return out;
}

RealSignalBlock normalize_reshape(const ComplexSymbolBlock& y_eq, double sigma) {
  if (!(sigma >= 0.0)) throw ParameterError("normalize_reshape: sigma must be nonnegative");
  RealSignalBlock y = unpack_real(y_eq);
  const double scale = 1.0 / std::sqrt(1.0 + sigma * sigma);
  for (double& v : y.mutable_values()) v *= scale;
  return y;
}

EqualizedObservation receive(const ComplexSymbolBlock& yc, const ChannelRealization& receiver) {
  EqualizedObservation obs;
  obs.sigma = receiver.sigma;
  obs.channel = receiver;
  obs.y_r = receiver.mode == ChannelMode::rayleigh
                ? normalize_reshape(equalize_mmse(yc, receiver.h_c, receiver.sigma), receiver.sigma)
                : normalize_reshape(yc, receiver.sigma);
  return obs;
}

GaussianMoments conditional_moments(const RealSignalBlock& x, const ChannelRealization& channel) {
  const std::size_t n = x.size();
  if (channel.w_s_diag.size() != n || channel.w_n_diag.size() != n) {
    throw DimensionError("conditional_moments: channel diagonals do not match block length");
  }
  const double s2 = channel.sigma * channel.sigma;
  const double mean_scale = 1.0 / std::sqrt(1.0 + s2);
  const double var_scale = s2 / (1.0 + s2);
  GaussianMoments m;
  m.mean.resize(n);
  m.variance.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double wn = channel.w_n_diag[i];
    m.mean[i] = mean_scale * channel.w_s_diag[i] * x[i];
    m.variance[i] = var_scale * wn * wn;
  }
  return m;
}

}  // namespace cddm
