#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace cddm {

// Philox4x32-10 counter-based generator. Output block i is a pure function of (key, i),
// so a stream can be positioned anywhere without replaying earlier draws.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox4x32() = default;
  explicit Philox4x32(std::uint64_t key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  // Jump to the start of 128-bit block `block_index`.
  void seek(std::uint64_t block_index);

  static Block bijection(Block counter, Key key);

 private:
  Key key_{};
  std::uint64_t counter_ = 0;
  Block buffer_{};
  int used_ = 4;
};

// A named random stream. Child streams are derived by mixing a label into the key, so
// every stochastic component of an experiment gets an independent, replayable sequence.
class Stream {
 public:
  explicit Stream(std::uint64_t seed);

  Stream split(std::uint64_t label) const;
  Stream split(std::string_view label) const;

  std::uint64_t key() const { return key_; }

  double uniform();            // [0, 1)
  double normal();             // N(0, 1)
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);  // inclusive

  Philox4x32& engine() { return engine_; }

 private:
  std::uint64_t key_;
  Philox4x32 engine_;
  std::normal_distribution<double> gauss_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace cddm
