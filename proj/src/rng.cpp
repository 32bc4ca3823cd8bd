#include "cddm/rng.hpp"

namespace cddm {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace

Philox4x32::Philox4x32(std::uint64_t key)
    : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

Philox4x32::Block Philox4x32::bijection(Block ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

Philox4x32::result_type Philox4x32::operator()() {
  if (used_ == 4) {
    buffer_ = bijection({static_cast<std::uint32_t>(counter_),
                         static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u},
                        key_);
    ++counter_;
    used_ = 0;
  }
  return buffer_[used_++];
}

void Philox4x32::seek(std::uint64_t block_index) {
  counter_ = block_index;
  used_ = 4;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

Stream::Stream(std::uint64_t seed) : key_(splitmix64(seed)), engine_(key_) {}

Stream Stream::split(std::uint64_t label) const {
  Stream child(0);
  child.key_ = splitmix64(key_ ^ splitmix64(label + 0x632BE59BD9B4E019ull));
  child.engine_ = Philox4x32(child.key_);
  return child;
}

Stream Stream::split(std::string_view label) const { return split(fnv1a64(label)); }

double Stream::uniform() {
  // 53 random bits from two 32-bit outputs.
  const std::uint64_t hi = engine_() >> 5;
  const std::uint64_t lo = engine_() >> 6;
  return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
}

double Stream::normal() { return gauss_(engine_); }

std::uint64_t Stream::uniform_int(std::uint64_t lo, std::uint64_t hi) {
  std::uniform_int_distribution<std::uint64_t> dist(lo, hi);
  return dist(engine_);
}

}  // namespace cddm
