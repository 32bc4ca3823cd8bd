#include <doctest.h>

#include <set>

#include "cddm/rng.hpp"
#include "support.hpp"

using namespace cddm;

TEST_SUITE("rng") {

TEST_CASE("philox known-answer vectors") {
  using B = Philox4x32::Block;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::bijection(B{0, 0, 0, 0}, K{0, 0}) ==
        B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::bijection(B{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                              K{0xffffffff, 0xffffffff}) ==
        B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::bijection(B{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                              K{0xa4093822, 0x299f31d0}) ==
        B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("seek lands on the same words as sequential generation") {
  Philox4x32 a(42);
  std::vector<std::uint32_t> seq;
  for (int i = 0; i < 40; ++i) seq.push_back(a());
  Philox4x32 b(42);
  b.seek(5);
  for (int i = 0; i < 20; ++i) CHECK(b() == seq[20 + static_cast<std::size_t>(i)]);
}

TEST_CASE("streams are reproducible and labels separate them") {
  Stream a = Stream(7).split("train").split(3);
  Stream b = Stream(7).split("train").split(3);
  Stream c = Stream(7).split("train").split(4);
  Stream d = Stream(8).split("train").split(3);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  CHECK(a.key() != c.key());
  CHECK(a.key() != d.key());
  CHECK(Stream(7).split("a").key() != Stream(7).split("b").key());
}

TEST_CASE("uniform and normal moments") {
  Stream s(123);
  RunningMoments u, z;
  for (int i = 0; i < 200000; ++i) {
    const double v = s.uniform();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    u.add(v);
    z.add(s.normal());
  }
  CHECK(std::abs(u.mean - 0.5) < 4 * u.mean_stderr());
  CHECK(std::abs(u.variance() - 1.0 / 12.0) < 4 * u.variance_stderr());
  CHECK(std::abs(z.mean) < 4 * z.mean_stderr());
  CHECK(std::abs(z.variance() - 1.0) < 4 * z.variance_stderr());
}

TEST_CASE("uniform_int stays in range and hits both ends") {
  Stream s(9);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = s.uniform_int(3, 7);
    REQUIRE(v >= 3);
    REQUIRE(v <= 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 5);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

}
