#include "cddm/channel.hpp"

#include <cmath>
#include <string>

#include "cddm/errors.hpp"

namespace cddm {

RealSignalBlock::RealSignalBlock(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty() || values_.size() % 2 != 0) {
    throw DimensionError("real signal block needs an even, nonzero length, got " +
                         std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw NumericError("real signal block has a non-finite entry");
  }
}

RealSignalBlock RealSignalBlock::zeros(std::size_t k) {
  return RealSignalBlock(std::vector<double>(2 * k, 0.0));
}

double ComplexSymbolBlock::energy() const {
  double e = 0.0;
  for (std::size_t i = 0; i < re.size(); ++i) e += re[i] * re[i] + im[i] * im[i];
  return e;
}

const char* to_string(ChannelMode mode) {
  return mode == ChannelMode::awgn ? "awgn" : "rayleigh";
}

ChannelMode parse_channel_mode(std::string_view text) {
  if (text == "awgn") return ChannelMode::awgn;
  if (text == "rayleigh") return ChannelMode::rayleigh;
  throw ParameterError("unknown channel mode '" + std::string(text) + "'");
}

Channel Channel::rayleigh(std::vector<Complex> gains) {
  return {ChannelMode::rayleigh, std::move(gains)};
}

ComplexSymbolBlock pack_complex(std::span<const double> x) {
  if (x.empty() || x.size() % 2 != 0) {
    throw DimensionError("pack_complex needs an even-length input, got " +
                         std::to_string(x.size()));
  }
  const std::size_t k = x.size() / 2;
  ComplexSymbolBlock out;
  out.re.assign(x.begin(), x.begin() + k);
  out.im.assign(x.begin() + k, x.end());
  return out;
}

ComplexSymbolBlock pack_complex(const RealSignalBlock& x) { return pack_complex(x.values()); }

RealSignalBlock unpack_real(const ComplexSymbolBlock& xc) {
  if (xc.re.size() != xc.im.size()) {
    throw DimensionError("unpack_real: real and imaginary parts differ in length");
  }
  std::vector<double> out(xc.re);
  out.insert(out.end(), xc.im.begin(), xc.im.end());
  return RealSignalBlock(std::move(out));
}

ComplexSymbolBlock normalize_power(const ComplexSymbolBlock& xc) {
  const double e = xc.energy();
  if (!(e > 0.0)) throw DomainError("normalize_power: block has zero energy");
  const double scale = 1.0 / std::sqrt(e);
  ComplexSymbolBlock out = xc;
  for (auto& v : out.re) v *= scale;
  for (auto& v : out.im) v *= scale;
  return out;
}

std::vector<Complex> sample_rayleigh_channel(std::size_t k, Stream& rng) {
  if (k == 0) throw ParameterError("sample_rayleigh_channel: k must be positive");
  const double s = std::sqrt(0.5);
  std::vector<Complex> h(k);
  for (auto& g : h) {
    const double a = rng.normal();
    const double b = rng.normal();
    g = {s * a, s * b};
  }
  return h;
}

ComplexSymbolBlock transmit(const ComplexSymbolBlock& xc, const Channel& channel, double sigma,
                            Stream& rng) {
  if (!(sigma >= 0.0)) throw ParameterError("transmit: sigma must be nonnegative");
  if (xc.re.size() != xc.im.size()) throw DimensionError("transmit: ragged symbol block");
  const std::size_t k = xc.k();
  const bool faded = channel.mode == ChannelMode::rayleigh;
  if (faded && channel.gains.size() != k) {
    throw DimensionError("transmit: " + std::to_string(channel.gains.size()) +
                         " gains for " + std::to_string(k) + " symbols");
  }
  ComplexSymbolBlock y;
  y.re.resize(k);
  y.im.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const Complex h = faded ? channel.gains[i] : Complex{1.0, 0.0};
    // CN(0, 2 sigma^2): variance sigma^2 per real dimension.
    const double nr = rng.normal();
    const double ni = rng.normal();
    const Complex y_i = h * xc.at(i) + Complex{sigma * nr, sigma * ni};
    y.re[i] = y_i.real();
    y.im[i] = y_i.imag();
  }
  return y;
}

std::vector<Complex> perturb_estimate(std::span<const Complex> h, double sigma_h, Stream& rng) {
  if (!(sigma_h >= 0.0)) throw ParameterError("perturb_estimate: sigma_h must be nonnegative");
  const double s = sigma_h * std::sqrt(0.5);
  std::vector<Complex> out(h.begin(), h.end());
  for (auto& g : out) {
    const double a = rng.normal();
    const double b = rng.normal();
    g += Complex{s * a, s * b};
  }
  return out;
}

double sigma_from_snr_db(double snr_db) {
  return std::sqrt(1.0 / (2.0 * std::pow(10.0, snr_db / 10.0)));
}

double snr_db_from_sigma(double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("snr_db_from_sigma: sigma must be positive");
  return 10.0 * std::log10(1.0 / (2.0 * sigma * sigma));
}

}  // namespace cddm
