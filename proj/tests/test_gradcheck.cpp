#include <doctest.h>

#include "helpers.hpp"
#include "lscnn/model.hpp"

using namespace lscnn;
using lscnn::testing::central_diff;
using lscnn::testing::rel_err;

TEST_SUITE_BEGIN("gradcheck");

namespace {

constexpr int kSeeds = 20;
constexpr double kTolLayer = 1e-4;
constexpr double kTolEndToEnd = 1e-3;

// Scalar objective: inner product of the layer output with fixed weights,
// so d(loss)/d(output) equals those weights.
double dot(const TensorD& a, const TensorD& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Inputs kept away from the ReLU kink so finite differences stay valid.
TensorD away_from_zero(const Shape& shape, Rng& rng) {
  TensorD t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = rng.normal(0.0, 1.0);
    t[i] = v >= 0.0 ? v + 0.1 : v - 0.1;
  }
  return t;
}

}  // namespace

TEST_CASE("conv gradients match finite differences") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(1000 + static_cast<std::uint64_t>(seed));
    const std::size_t ci = 1 + rng.uniform_index(3);
    const std::size_t co = 1 + rng.uniform_index(3);
    const std::size_t s = 1 + rng.uniform_index(2);
    const std::size_t k = seed % 2 == 0 ? 3 : 5;
    const std::size_t h = k + s * (1 + rng.uniform_index(2));
    ConvParams<double> p{TensorD::normal({co, ci, k, k}, 0.0, 0.7, rng),
                         TensorD::normal({co}, 0.0, 0.7, rng), s};
    TensorD x = TensorD::normal({2, ci, h, h}, 0.0, 1.0, rng);
    const Shape out_shape = conv2d_forward(x, p).shape();
    const TensorD r = TensorD::normal(out_shape, 0.0, 1.0, rng);

    auto loss = [&] { return dot(conv2d_forward(x, p), r); };
    const ConvGrads<double> g = conv2d_backward(x, p, r);

    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      worst = std::max(worst, rel_err(central_diff(loss, x[i], 1e-5),
                                      g.input[i]));
    for (std::size_t i = 0; i < p.weight.size(); ++i)
      worst = std::max(worst, rel_err(central_diff(loss, p.weight[i], 1e-5),
                                      g.weight[i]));
    for (std::size_t i = 0; i < p.bias.size(); ++i)
      worst = std::max(worst, rel_err(central_diff(loss, p.bias[i], 1e-5),
                                      g.bias[i]));
    CHECK(worst < kTolLayer);
  }
}

TEST_CASE("conv backward of a zero upstream gradient is zero") {
  Rng rng(55);
  ConvParams<double> p{TensorD::normal({2, 2, 3, 3}, 0.0, 1.0, rng),
                       TensorD::normal({2}, 0.0, 1.0, rng), 1};
  const TensorD x = TensorD::normal({1, 2, 5, 5}, 0.0, 1.0, rng);
  const ConvGrads<double> g =
      conv2d_backward(x, p, TensorD::zeros({1, 2, 3, 3}));
  for (std::size_t i = 0; i < g.weight.size(); ++i) CHECK(g.weight[i] == 0.0);
  for (std::size_t i = 0; i < g.input.size(); ++i) CHECK(g.input[i] == 0.0);
}

TEST_CASE("maxpool input gradients match finite differences") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(2000 + static_cast<std::uint64_t>(seed));
    const std::size_t c = 1 + rng.uniform_index(4);
    const std::size_t h = 3 + rng.uniform_index(4);
    TensorD x = TensorD::normal({2, c, h, h}, 0.0, 1.0, rng);
    PoolResult<double> fwd = maxpool_forward(x);
    const TensorD r = TensorD::normal(fwd.output.shape(), 0.0, 1.0, rng);

    auto loss = [&] { return dot(maxpool_forward(x).output, r); };
    const TensorD g = maxpool_backward(fwd.argmax, x.shape(), r);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      worst = std::max(worst, rel_err(central_diff(loss, x[i], 1e-6), g[i]));
    CHECK(worst < kTolLayer);
  }
}

TEST_CASE("batchnorm gradients match finite differences in train mode") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(3000 + static_cast<std::uint64_t>(seed));
    const std::size_t c = 1 + rng.uniform_index(3);
    const std::size_t h = 2 + rng.uniform_index(4);
    BnScaleParams<double> p{TensorD({c}), TensorD::full({c}, 1.0),
                            TensorD::normal({c}, 1.0, 0.2, rng),
                            TensorD::normal({c}, 0.0, 0.2, rng), 0.99, 1e-5};
    TensorD x = TensorD::normal({2, c, h, h}, 0.5, 1.5, rng);
    BnCache<double> cache;
    batchnorm_scale_forward(x, p, Mode::kTrain, &cache);
    const TensorD r = TensorD::normal(x.shape(), 0.0, 1.0, rng);

    auto loss = [&] {
      BnScaleParams<double> q = p;  // keep running stats untouched
      return dot(batchnorm_scale_forward(x, q, Mode::kTrain), r);
    };
    const BnGrads<double> g = batchnorm_scale_backward(cache, p, r);

    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      worst = std::max(worst, rel_err(central_diff(loss, x[i], 1e-5),
                                      g.input[i]));
    for (std::size_t i = 0; i < c; ++i) {
      worst = std::max(worst, rel_err(central_diff(loss, p.gamma[i], 1e-5),
                                      g.gamma[i]));
      worst = std::max(worst, rel_err(central_diff(loss, p.beta[i], 1e-5),
                                      g.beta[i]));
    }
    CHECK(worst < kTolLayer);
  }
}

TEST_CASE("relu gradients match finite differences away from the kink") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(4000 + static_cast<std::uint64_t>(seed));
    TensorD x = away_from_zero({3, 6, 6}, rng);
    const TensorD r = TensorD::normal(x.shape(), 0.0, 1.0, rng);
    auto loss = [&] { return dot(relu_forward(x), r); };
    const TensorD g = relu_backward(x, r);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      worst = std::max(worst, rel_err(central_diff(loss, x[i], 1e-6), g[i]));
    CHECK(worst < kTolLayer);
  }
}

TEST_CASE("relu backward passes the gradient through positive inputs") {
  Rng rng(60);
  TensorD x = TensorD::normal({10}, 5.0, 0.5, rng);
  const TensorD r = TensorD::normal({10}, 0.0, 1.0, rng);
  const TensorD g = relu_backward(x, r);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(g[i] == r[i]);
}

TEST_CASE("fc gradients match finite differences") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(5000 + static_cast<std::uint64_t>(seed));
    const std::size_t nin = 2 + rng.uniform_index(6);
    const std::size_t nout = 1 + rng.uniform_index(5);
    FcParams<double> p{TensorD::normal({nout, nin}, 0.0, 0.8, rng),
                       TensorD::normal({nout}, 0.0, 0.8, rng)};
    TensorD x = TensorD::normal({3, nin}, 0.0, 1.0, rng);
    const TensorD r = TensorD::normal({3, nout}, 0.0, 1.0, rng);
    auto loss = [&] { return dot(fc_forward(x, p), r); };
    const FcGrads<double> g = fc_backward(x, p, r);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      worst = std::max(worst, rel_err(central_diff(loss, x[i], 1e-5),
                                      g.input[i]));
    for (std::size_t i = 0; i < p.weight.size(); ++i)
      worst = std::max(worst, rel_err(central_diff(loss, p.weight[i], 1e-5),
                                      g.weight[i]));
    for (std::size_t i = 0; i < p.bias.size(); ++i)
      worst = std::max(worst, rel_err(central_diff(loss, p.bias[i], 1e-5),
                                      g.bias[i]));
    CHECK(worst < kTolLayer);
  }
}

TEST_CASE("dropout gradients match finite differences with a fixed mask") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(6000 + static_cast<std::uint64_t>(seed));
    TensorD x = TensorD::normal({40}, 0.0, 1.0, rng);
    const TensorD r = TensorD::normal({40}, 0.0, 1.0, rng);
    const std::uint64_t mask_seed = rng.next_u64();
    auto loss = [&] {
      Rng mr(mask_seed);
      return dot(dropout_forward(x, 0.3, Mode::kTrain, mr), r);
    };
    Rng mr(mask_seed);
    TensorD mask;
    dropout_forward(x, 0.3, Mode::kTrain, mr, &mask);
    const TensorD g = dropout_backward(mask, r);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      worst = std::max(worst, rel_err(central_diff(loss, x[i], 1e-6), g[i]));
    CHECK(worst < kTolLayer);
  }
}

TEST_CASE("softmax loss gradient matches finite differences") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(7000 + static_cast<std::uint64_t>(seed));
    TensorD logits = TensorD::normal({5, 2}, 0.0, 2.0, rng);
    std::vector<int> labels(5);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_index(2));
    auto loss = [&] { return softmax_xent(logits, labels).loss; };
    const SoftmaxResult<double> sm = softmax_xent(logits, labels);
    double worst = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i)
      worst = std::max(worst, rel_err(central_diff(loss, logits[i], 1e-6),
                                      sm.grad_logits[i]));
    CHECK(worst < kTolLayer);
  }
}

TEST_CASE("whole tiny network matches finite differences, batchnorm in train "
          "mode included") {
  ArchitectureSpec spec;
  spec.name = "tiny";
  spec.input_channels = 1;
  spec.input_size = 8;
  spec.layers = {{LayerKind::kConv, 4, 3, 1, 0.0},
                 {LayerKind::kPool, 0, 2, 2, 0.0},
                 {LayerKind::kConv, 6, 3, 1, 0.0},
                 {LayerKind::kPool, 0, 2, 2, 0.0},
                 {LayerKind::kFc, 8, 0, 1, 0.0},
                 {LayerKind::kDropout, 0, 0, 1, 0.25},
                 {LayerKind::kSoftmaxHead, 2, 0, 1, 0.0}};

  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(8000 + static_cast<std::uint64_t>(seed));
    Model<double> model(spec);
    Rng init = rng.child("init");
    model.init_params(0.5, init);
    // batchnorm scale/shift off identity so their gradients are generic
    for (auto& [name, t] : model.trainable_tensors()) {
      if (name.ends_with(".gamma"))
        for (std::size_t i = 0; i < t->size(); ++i)
          (*t)[i] = 1.0 + rng.normal(0.0, 0.2);
      if (name.ends_with(".beta"))
        for (std::size_t i = 0; i < t->size(); ++i)
          (*t)[i] = rng.normal(0.0, 0.2);
    }

    Rng xr = rng.child("x");
    const TensorD batch = TensorD::normal({2, 1, 8, 8}, 0.0, 1.0, xr);
    std::vector<int> labels = {0, 1};
    const std::uint64_t drop_seed = rng.next_u64();

    auto loss = [&] {
      Rng dr(drop_seed);
      TensorD logits = model.forward(batch, Mode::kTrain, dr);
      return softmax_xent(logits, labels).loss;
    };

    Rng dr(drop_seed);
    ForwardCache<double> cache;
    TensorD logits = model.forward(batch, Mode::kTrain, dr, &cache);
    SoftmaxResult<double> sm = softmax_xent(logits, labels);
    ModelGrads<double> grads = model.backward(cache, sm.grad_logits);

    double worst = 0.0;
    for (auto& [name, t] : model.trainable_tensors()) {
      const TensorD& g = grads.at(name);
      for (std::size_t i = 0; i < t->size(); ++i)
        worst = std::max(worst,
                         rel_err(central_diff(loss, (*t)[i], 1e-5), g[i]));
    }
    CHECK(worst < kTolEndToEnd);
  }
}

TEST_SUITE_END();
