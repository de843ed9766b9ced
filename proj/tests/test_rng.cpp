#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "mel/rng.hpp"

using mel::rng::Philox4x32;
using mel::rng::Stream;

TEST_CASE("philox known-answer vectors") {
  // Reference vectors from the generator's published test suite.
  const auto zero = Philox4x32::block({0u, 0u, 0u, 0u}, {0u, 0u});
  CHECK(zero[0] == 0x6627e8d5u);
  CHECK(zero[1] == 0xe169c58du);
  CHECK(zero[2] == 0xbc57ac4cu);
  CHECK(zero[3] == 0x9b00dbd8u);

  const auto ones = Philox4x32::block(
      {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
      {0xffffffffu, 0xffffffffu});
  CHECK(ones[0] == 0x408f276du);
  CHECK(ones[1] == 0x41c83b0eu);
  CHECK(ones[2] == 0xa20bc7c6u);
  CHECK(ones[3] == 0x6d5451fdu);

  const auto pi = Philox4x32::block(
      {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
      {0xa4093822u, 0x299f31d0u});
  CHECK(pi[0] == 0xd16cfe09u);
  CHECK(pi[1] == 0x94fdccebu);
  CHECK(pi[2] == 0x5001e420u);
  CHECK(pi[3] == 0x24126ea1u);
}

TEST_CASE("streams are deterministic and disjoint") {
  Stream a(42, mel::rng::make_stream_id(7, 1));
  Stream b(42, mel::rng::make_stream_id(7, 1));
  Stream c(42, mel::rng::make_stream_id(8, 1));
  Stream d(43, mel::rng::make_stream_id(7, 1));

  double first = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double va = a.uniform();
    CHECK(va == b.uniform());
    CHECK(va > 0.0);
    CHECK(va < 1.0);
    if (k == 0) first = va;
  }
  CHECK(c.uniform() != first);
  CHECK(d.uniform() != first);
}

TEST_CASE("uniform moments are sane") {
  Stream s(1234, mel::rng::make_stream_id(0, 0));
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double u = s.uniform();
    sum += u;
    sum2 += u * u;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean - 0.5) < 0.005);
  CHECK(std::abs(var - 1.0 / 12.0) < 0.005);
}

TEST_CASE("normal draws match the standard moments") {
  Stream s(99, mel::rng::make_stream_id(0, 2));
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double z = s.normal();
    sum += z;
    sum2 += z * z;
    sum4 += z * z * z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sum2 / n - 1.0) < 0.02);
  CHECK(std::abs(sum4 / n - 3.0) < 0.1);
}
