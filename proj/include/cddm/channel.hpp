#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "cddm/rng.hpp"

namespace cddm {

using Complex = std::complex<double>;

// Real-valued block x in R^{2k}. Entry i and entry i+k are the real and imaginary parts
// of channel use i.
class RealSignalBlock {
 public:
  RealSignalBlock() = default;
  explicit RealSignalBlock(std::vector<double> values);
  static RealSignalBlock zeros(std::size_t k);

  std::size_t k() const { return values_.size() / 2; }
  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  std::span<double> mutable_values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const RealSignalBlock&, const RealSignalBlock&) = default;

 private:
  std::vector<double> values_;
};

struct ComplexSymbolBlock {
  std::vector<double> re;
  std::vector<double> im;

  std::size_t k() const { return re.size(); }
  Complex at(std::size_t i) const { return {re[i], im[i]}; }
  double energy() const;

  friend bool operator==(const ComplexSymbolBlock&, const ComplexSymbolBlock&) = default;
};

enum class ChannelMode { awgn, rayleigh };

const char* to_string(ChannelMode mode);
ChannelMode parse_channel_mode(std::string_view text);

// Channel state seen by a block. AWGN carries no gains; it is the explicit marker that
// selects identity signal and noise weights downstream.
struct Channel {
  ChannelMode mode = ChannelMode::awgn;
  std::vector<Complex> gains;  // empty for AWGN

  static Channel awgn() { return {}; }
  static Channel rayleigh(std::vector<Complex> gains);
};

// Gains and MMSE diagonals of one channel realization at noise level sigma.
struct ChannelRealization {
  ChannelMode mode = ChannelMode::awgn;
  std::vector<Complex> h_c;
  double sigma = 0.0;
  std::vector<double> h_r;       // 2k, |h_c| duplicated
  std::vector<double> w_s_diag;  // 2k
  std::vector<double> w_n_diag;  // 2k
};

ComplexSymbolBlock pack_complex(const RealSignalBlock& x);
ComplexSymbolBlock pack_complex(std::span<const double> x);
RealSignalBlock unpack_real(const ComplexSymbolBlock& xc);

// Scales the block so that sum_i |x_c,i|^2 = 1.
ComplexSymbolBlock normalize_power(const ComplexSymbolBlock& xc);

// k i.i.d. CN(0,1) gains (real and imaginary parts each with variance 1/2).
std::vector<Complex> sample_rayleigh_channel(std::size_t k, Stream& rng);

// y_c = h x_c + n, n ~ CN(0, 2 sigma^2). AWGN uses h = 1.
ComplexSymbolBlock transmit(const ComplexSymbolBlock& xc, const Channel& channel, double sigma,
                            Stream& rng);

// Noisy receiver-side estimate h + dh, dh ~ CN(0, sigma_h^2).
std::vector<Complex> perturb_estimate(std::span<const Complex> h, double sigma_h, Stream& rng);

// SNR convention for unit-energy blocks: SNR_dB = 10 log10(1 / (2 sigma^2)), where sigma^2
// is the noise variance per real dimension.
double sigma_from_snr_db(double snr_db);
double snr_db_from_sigma(double sigma);

}  // namespace cddm
