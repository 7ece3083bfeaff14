#include <doctest.h>

#include <cmath>

#include "lscnn/adam.hpp"

using namespace lscnn;

TEST_SUITE_BEGIN("adam");

namespace {

// Independent scalar reimplementation of the update recurrence, in double.
struct ScalarAdam {
  double m = 0.0, v = 0.0;
  long t = 0;
  double step(double w, double g, const AdamConfig& c) {
    ++t;
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double mh = m / (1.0 - std::pow(c.beta1, t));
    const double vh = v / (1.0 - std::pow(c.beta2, t));
    return w - c.lr * mh / (std::sqrt(vh) + c.epsilon);
  }
};

}  // namespace

TEST_CASE("first step moves by about -lr * sign(gradient)") {
  AdamConfig cfg;
  for (double g : {3.0, -0.25, 1e-3}) {
    Tensor<double> w({1}, {1.0});
    Tensor<double> grad({1}, {g});
    AdamState<double> st({1});
    adam_step(w, grad, st, cfg);
    const double expected = 1.0 - cfg.lr * g / (std::abs(g) + cfg.epsilon);
    CHECK(w[0] == doctest::Approx(expected).epsilon(1e-9));
    CHECK(std::abs((1.0 - w[0]) - cfg.lr * (g > 0 ? 1.0 : -1.0)) <
          cfg.lr * 1e-3);
  }
}

TEST_CASE("zero gradients leave everything untouched") {
  AdamConfig cfg;
  Tensor<double> w({4}, {1.0, -2.0, 0.5, 3.0});
  const Tensor<double> original = w;
  Tensor<double> grad({4});
  AdamState<double> st({4});
  for (int i = 0; i < 10; ++i) adam_step(w, grad, st, cfg);
  CHECK(w == original);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(st.m[i] == 0.0);
    CHECK(st.v[i] == 0.0);
  }
  CHECK(st.t == 10);
}

TEST_CASE("minimizing (w-3)^2 follows the scalar recurrence and converges") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  Tensor<double> w({1}, {0.0});
  AdamState<double> st({1});
  ScalarAdam oracle;
  double ow = 0.0;
  const double d0 = std::abs(w[0] - 3.0);
  for (int i = 0; i < 100; ++i) {
    const double g = 2.0 * (w[0] - 3.0);
    Tensor<double> grad({1}, {g});
    adam_step(w, grad, st, cfg);
    ow = oracle.step(ow, 2.0 * (ow - 3.0), cfg);
    CHECK(w[0] == doctest::Approx(ow).epsilon(1e-12));
  }
  CHECK(std::abs(w[0] - 3.0) < d0);
  CHECK(std::abs(w[0] - 3.0) < 0.1);  // monotone approach toward the minimum
}

TEST_CASE("per-entry update magnitude is bounded by lr/(1-beta1)") {
  AdamConfig cfg;
  Rng rng(99);
  Tensor<double> w({16});
  AdamState<double> st({16});
  const double bound = cfg.lr / (1.0 - cfg.beta1) + 1e-12;
  for (int it = 0; it < 200; ++it) {
    Tensor<double> prev = w;
    Tensor<double> grad({16});
    for (std::size_t i = 0; i < 16; ++i)
      grad[i] = rng.normal(0.0, std::exp(rng.normal(0.0, 2.0)));
    adam_step(w, grad, st, cfg);
    for (std::size_t i = 0; i < 16; ++i)
      CHECK(std::abs(w[i] - prev[i]) <= bound);
  }
}

TEST_CASE("steps on disjoint tensors are order independent") {
  AdamConfig cfg;
  Rng rng(7);
  Tensor<double> a1 = Tensor<double>::normal({8}, 0.0, 1.0, rng);
  Tensor<double> b1 = Tensor<double>::normal({8}, 0.0, 1.0, rng);
  Tensor<double> a2 = a1, b2 = b1;
  const Tensor<double> ga = Tensor<double>::normal({8}, 0.0, 1.0, rng);
  const Tensor<double> gb = Tensor<double>::normal({8}, 0.0, 1.0, rng);
  AdamState<double> sa1({8}), sb1({8}), sa2({8}), sb2({8});
  adam_step(a1, ga, sa1, cfg);
  adam_step(b1, gb, sb1, cfg);
  adam_step(b2, gb, sb2, cfg);
  adam_step(a2, ga, sa2, cfg);
  CHECK(a1 == a2);
  CHECK(b1 == b2);
}

TEST_CASE("shape mismatches are rejected") {
  AdamConfig cfg;
  Tensor<double> w({4});
  Tensor<double> grad({3});
  AdamState<double> st({4});
  CHECK_THROWS_AS(adam_step(w, grad, st, cfg), ShapeError);
}

TEST_SUITE_END();
