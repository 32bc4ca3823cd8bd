#pragma once

#include <span>
#include <utility>
#include <vector>

#include "cddm/channel.hpp"

namespace cddm {

struct MmseWeights {
  std::vector<double> w_s;  // 2k
  std::vector<double> w_n;  // 2k
};

// Per-symbol MMSE weights |h|^2/(|h|^2+2 sigma^2) and |h|/(|h|^2+2 sigma^2), duplicated into
// positions i and i+k. Requires sigma > 0.
MmseWeights mmse_weights(std::span<const Complex> h, double sigma);

// Gains plus weights for a k-symbol channel at noise level sigma. The AWGN marker yields
// identity weights and h_r = 1.
ChannelRealization realize(const Channel& channel, double sigma, std::size_t k);

// h^H y / (|h|^2 + 2 sigma^2), symbol by symbol.
ComplexSymbolBlock equalize_mmse(const ComplexSymbolBlock& yc, std::span<const Complex> h,
                                 double sigma);

// Flattens to R^{2k} and scales by 1/sqrt(1 + sigma^2).
RealSignalBlock normalize_reshape(const ComplexSymbolBlock& y_eq, double sigma);

struct EqualizedObservation {
  RealSignalBlock y_r;
  ChannelRealization channel;  // receiver's view of the channel
  double sigma = 0.0;
};

// Equalize (Rayleigh only) and normalize-reshape a received block using the receiver's
// channel realization.
EqualizedObservation receive(const ComplexSymbolBlock& yc, const ChannelRealization& receiver);

struct GaussianMoments {
  std::vector<double> mean;
  std::vector<double> variance;
};

// Closed-form mean W_s x / sqrt(1+sigma^2) and per-coordinate variance
// sigma^2/(1+sigma^2) w_n^2 of y_r given x and the channel.
GaussianMoments conditional_moments(const RealSignalBlock& x, const ChannelRealization& channel);

}  // namespace cddm
