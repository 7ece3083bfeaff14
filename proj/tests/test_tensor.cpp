#include <doctest.h>

#include <cmath>

#include "lscnn/tensor.hpp"

using namespace lscnn;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("zeros fills the exact shape") {
  const TensorF t = TensorF::zeros({2, 2});
  CHECK(t.shape() == Shape{2, 2});
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0f);

  const TensorF big = TensorF::zeros({3, 96, 96});
  CHECK(big.size() == 27648);
}

TEST_CASE("invalid shapes are rejected") {
  CHECK_THROWS_AS(TensorF::zeros({0}), ShapeError);
  CHECK_THROWS_AS(TensorF::zeros({}), ShapeError);
  CHECK_THROWS_AS(TensorF::zeros({3, 0, 2}), ShapeError);
  CHECK_THROWS_AS(TensorF({2, 2}, {1.0f, 2.0f}), ShapeError);
}

TEST_CASE("normal fill with zero stddev is the mean everywhere") {
  Rng rng(123);
  const TensorF t = TensorF::normal({4, 5}, 0.5f, 0.0f, rng);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.5f);
}

TEST_CASE("normal fill rejects negative stddev") {
  Rng rng(1);
  CHECK_THROWS_AS(TensorF::normal({3}, 0.0f, -1.0f, rng), ConfigError);
}

TEST_CASE("normal fill matches the requested moments") {
  Rng rng(2024);
  const std::size_t n = 10000;
  const double stddev = 0.0001;
  const TensorF t = TensorF::normal({n}, 0.0f, static_cast<float>(stddev), rng);
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += t[i];
    sq += static_cast<double>(t[i]) * t[i];
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) < 3.0 * stddev / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(sd - stddev) < 0.05 * stddev);
}

TEST_CASE("same seed gives bitwise-identical tensors") {
  Rng a(42), b(42);
  const TensorF ta = TensorF::normal({100}, 0.0f, 1.0f, a);
  const TensorF tb = TensorF::normal({100}, 0.0f, 1.0f, b);
  CHECK(ta == tb);
}

TEST_CASE("child streams do not depend on parent consumption") {
  Rng a(7), b(7);
  (void)a.uniform();
  (void)a.uniform();
  Rng ca = a.child(3), cb = b.child(3);
  for (int i = 0; i < 10; ++i) CHECK(ca.next_u64() == cb.next_u64());
}

TEST_CASE("slice_channels copies the requested block") {
  Rng rng(5);
  const TensorF t = TensorF::normal({27, 4, 4}, 0.0f, 1.0f, rng);
  const TensorF s = t.slice_channels(0, 3);
  CHECK(s.shape() == Shape{3, 4, 4});
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == t[i]);

  const TensorF one = t.slice_channels(26, 27);
  CHECK(one.shape() == Shape{1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) CHECK(one[i] == t[26 * 16 + i]);
}

TEST_CASE("slice_channels rejects bad ranges") {
  const TensorF t = TensorF::zeros({4, 2, 2});
  CHECK_THROWS_AS(t.slice_channels(3, 2), ShapeError);
  CHECK_THROWS_AS(t.slice_channels(2, 2), ShapeError);
  CHECK_THROWS_AS(t.slice_channels(0, 5), ShapeError);
}

TEST_CASE("assign/slice round trip reproduces the block and leaves zeros") {
  Rng rng(11);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng r = rng.child(seed);
    const std::size_t c = 3 + r.uniform_index(8);
    const std::size_t h = 1 + r.uniform_index(5);
    const std::size_t lo = r.uniform_index(c - 1);
    const std::size_t hi = lo + 1 + r.uniform_index(c - lo - 1) + 0;
    const TensorF t = TensorF::normal({c, h, h}, 0.0f, 1.0f, r);

    TensorF dst = TensorF::zeros({c, h, h});
    dst.assign_channels(lo, hi, t.slice_channels(lo, hi));
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < h * h; ++i) {
        const float got = dst[ch * h * h + i];
        if (ch >= lo && ch < hi)
          CHECK(got == t[ch * h * h + i]);
        else
          CHECK(got == 0.0f);
      }
  }
}

TEST_SUITE_END();
