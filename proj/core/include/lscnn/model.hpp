#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lscnn/architecture.hpp"
#include "lscnn/layers.hpp"

namespace lscnn {

// Snapshot of all named parameter tensors of a model.
template <typename T>
using ModelParams = std::map<std::string, Tensor<T>>;

template <typename T>
using ModelGrads = std::map<std::string, Tensor<T>>;

enum class OpKind { kConv, kBn, kRelu, kPool, kFc, kDropout };

struct OpDesc {
  OpKind kind;
  std::string name;  // Conv1, BN1, FC1, FC1-BN, Softmax; empty for the rest
};

template <typename T>
struct ForwardCache {
  std::vector<Tensor<T>> inputs;  // conv/relu/fc ops only; others stay empty
  std::vector<Shape> input_shapes;                 // every op
  std::vector<std::vector<std::uint32_t>> argmax;  // pool ops
  std::vector<BnCache<T>> bn;                      // bn ops
  std::vector<Tensor<T>> mask;                     // dropout ops
  Tensor<T> logits;
};

// Sequential network instantiated from an ArchitectureSpec. Conv and FC rows
// expand to op triples (linear, batchnorm+scale, relu); the head stays a bare
// linear map feeding softmax_xent.
template <typename T>
class Model {
 public:
  explicit Model(ArchitectureSpec spec) : spec_(std::move(spec)) {
    validate_spec(spec_);
    build();
  }

  const ArchitectureSpec& spec() const { return spec_; }
  const std::vector<OpDesc>& op_descs() const { return descs_; }

  // Weights ~ Normal(0, stddev), biases 0, batchnorm identity. The generator
  // is consumed only by weight fills, in op order.
  void init_params(T stddev, Rng& rng) {
    if (stddev <= T(0)) throw ConfigError("init_params: stddev must be > 0");
    for (std::size_t i = 0; i < descs_.size(); ++i) {
      switch (descs_[i].kind) {
        case OpKind::kConv:
          conv_[i].weight =
              Tensor<T>::normal(conv_[i].weight.shape(), T(0), stddev, rng);
          conv_[i].bias = Tensor<T>(conv_[i].bias.shape());
          break;
        case OpKind::kFc:
          fc_[i].weight =
              Tensor<T>::normal(fc_[i].weight.shape(), T(0), stddev, rng);
          fc_[i].bias = Tensor<T>(fc_[i].bias.shape());
          break;
        case OpKind::kBn: {
          const Shape c = bn_[i].gamma.shape();
          bn_[i].gamma = Tensor<T>::full(c, T(1));
          bn_[i].beta = Tensor<T>(c);
          bn_[i].running_mean = Tensor<T>(c);
          bn_[i].running_var = Tensor<T>::full(c, T(1));
          break;
        }
        default:
          break;
      }
    }
  }

  // All named tensors, including batchnorm running statistics.
  std::vector<std::pair<std::string, Tensor<T>*>> named_tensors() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (std::size_t i = 0; i < descs_.size(); ++i) {
      const std::string& n = descs_[i].name;
      switch (descs_[i].kind) {
        case OpKind::kConv:
          out.emplace_back(n + ".weight", &conv_[i].weight);
          out.emplace_back(n + ".bias", &conv_[i].bias);
          break;
        case OpKind::kFc:
          out.emplace_back(n + ".weight", &fc_[i].weight);
          out.emplace_back(n + ".bias", &fc_[i].bias);
          break;
        case OpKind::kBn:
          out.emplace_back(n + ".gamma", &bn_[i].gamma);
          out.emplace_back(n + ".beta", &bn_[i].beta);
          out.emplace_back(n + ".running_mean", &bn_[i].running_mean);
          out.emplace_back(n + ".running_var", &bn_[i].running_var);
          break;
        default:
          break;
      }
    }
    return out;
  }

  // The subset the optimizer updates (running statistics excluded).
  std::vector<std::pair<std::string, Tensor<T>*>> trainable_tensors() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (auto& [name, t] : named_tensors()) {
      if (name.ends_with(".running_mean") || name.ends_with(".running_var"))
        continue;
      out.emplace_back(name, t);
    }
    return out;
  }

  ModelParams<T> params() {
    ModelParams<T> out;
    for (auto& [name, t] : named_tensors()) out.emplace(name, *t);
    return out;
  }

  void set_params(const ModelParams<T>& p) {
    auto named = named_tensors();
    if (p.size() != named.size())
      throw ShapeError("set_params: expected " + std::to_string(named.size()) +
                       " tensors, got " + std::to_string(p.size()));
    for (auto& [name, t] : named) {
      auto it = p.find(name);
      if (it == p.end()) throw ShapeError("set_params: missing " + name);
      if (it->second.shape() != t->shape())
        throw ShapeError("set_params: shape mismatch for " + name + ": " +
                         shape_str(it->second.shape()) + " vs " +
                         shape_str(t->shape()));
      *t = it->second;
    }
  }

  Tensor<T> forward(const Tensor<T>& batch, Mode mode, Rng& rng,
                    ForwardCache<T>* cache = nullptr) {
    check_input(batch);
    if (cache) {
      cache->inputs.assign(descs_.size(), Tensor<T>());
      cache->input_shapes.assign(descs_.size(), Shape());
      cache->argmax.assign(descs_.size(), {});
      cache->bn.assign(descs_.size(), BnCache<T>());
      cache->mask.assign(descs_.size(), Tensor<T>());
    }
    Tensor<T> x = batch;
    for (std::size_t i = 0; i < descs_.size(); ++i)
      x = apply(i, std::move(x), mode, rng, cache);
    if (cache) cache->logits = x;
    return x;
  }

  // Per-op outputs, for diagnostics and structural tests.
  std::vector<Tensor<T>> forward_collect(const Tensor<T>& batch, Mode mode,
                                         Rng& rng) {
    check_input(batch);
    std::vector<Tensor<T>> acts;
    acts.reserve(descs_.size());
    Tensor<T> x = batch;
    for (std::size_t i = 0; i < descs_.size(); ++i) {
      x = apply(i, std::move(x), mode, rng, nullptr);
      acts.push_back(x);
    }
    return acts;
  }

  // Gradients for every trainable tensor given d(loss)/d(logits).
  ModelGrads<T> backward(const ForwardCache<T>& cache,
                         const Tensor<T>& grad_logits) const {
    if (cache.inputs.size() != descs_.size())
      throw StateError("backward: forward cache missing");
    ModelGrads<T> grads;
    Tensor<T> g = grad_logits;
    for (std::size_t ii = descs_.size(); ii-- > 0;) {
      const OpDesc& d = descs_[ii];
      const Shape& xs = cache.input_shapes[ii];
      switch (d.kind) {
        case OpKind::kConv: {
          ConvGrads<T> cg = conv2d_backward(cache.inputs[ii], conv_[ii], g);
          grads.emplace(d.name + ".weight", std::move(cg.weight));
          grads.emplace(d.name + ".bias", std::move(cg.bias));
          g = std::move(cg.input);
          break;
        }
        case OpKind::kBn: {
          Tensor<T> g4 = g.rank() == 2 ? as_nc11(g) : std::move(g);
          BnGrads<T> bg = batchnorm_scale_backward(cache.bn[ii], bn_[ii], g4);
          grads.emplace(d.name + ".gamma", std::move(bg.gamma));
          grads.emplace(d.name + ".beta", std::move(bg.beta));
          g = xs.size() == 2 ? bg.input.reshaped(xs) : std::move(bg.input);
          break;
        }
        case OpKind::kRelu:
          g = relu_backward(cache.inputs[ii], g);
          break;
        case OpKind::kPool:
          g = maxpool_backward(cache.argmax[ii], xs, g);
          break;
        case OpKind::kFc: {
          const Tensor<T>& x = cache.inputs[ii];
          Tensor<T> x2 = x.rank() == 4 ? flatten(x) : x;
          FcGrads<T> fg = fc_backward(x2, fc_[ii], g);
          grads.emplace(d.name + ".weight", std::move(fg.weight));
          grads.emplace(d.name + ".bias", std::move(fg.bias));
          g = xs.size() == 4 ? fg.input.reshaped(xs) : std::move(fg.input);
          break;
        }
        case OpKind::kDropout:
          g = dropout_backward(cache.mask[ii], g);
          break;
      }
    }
    return grads;
  }

 private:
  static Tensor<T> flatten(const Tensor<T>& x) {
    return x.reshaped({x.dim(0), x.dim(1) * x.dim(2) * x.dim(3)});
  }
  static Tensor<T> as_nc11(const Tensor<T>& x) {
    return x.reshaped({x.dim(0), x.dim(1), 1, 1});
  }

  void check_input(const Tensor<T>& batch) const {
    if (batch.rank() != 4 ||
        batch.dim(1) != static_cast<std::size_t>(spec_.input_channels) ||
        batch.dim(2) != static_cast<std::size_t>(spec_.input_size) ||
        batch.dim(3) != static_cast<std::size_t>(spec_.input_size))
      throw ShapeError("forward: batch shape " + shape_str(batch.shape()) +
                       " does not match input " +
                       std::to_string(spec_.input_channels) + "x" +
                       std::to_string(spec_.input_size) + "x" +
                       std::to_string(spec_.input_size));
  }

  Tensor<T> apply(std::size_t i, Tensor<T> x, Mode mode, Rng& rng,
                  ForwardCache<T>* cache) {
    const OpKind kind = descs_[i].kind;
    if (cache) {
      cache->input_shapes[i] = x.shape();
      if (kind == OpKind::kConv || kind == OpKind::kRelu ||
          kind == OpKind::kFc)
        cache->inputs[i] = x;
    }
    switch (kind) {
      case OpKind::kConv:
        return conv2d_forward(x, conv_[i]);
      case OpKind::kBn: {
        const bool was_flat = x.rank() == 2;
        Tensor<T> x4 = was_flat ? as_nc11(x) : std::move(x);
        Tensor<T> y = batchnorm_scale_forward(
            x4, bn_[i], mode, cache ? &cache->bn[i] : nullptr);
        return was_flat ? y.reshaped({y.dim(0), y.dim(1)}) : y;
      }
      case OpKind::kRelu:
        return relu_forward(x);
      case OpKind::kPool: {
        PoolResult<T> r = maxpool_forward(x, 2, 2);
        if (cache) cache->argmax[i] = std::move(r.argmax);
        return std::move(r.output);
      }
      case OpKind::kFc:
        return fc_forward(x.rank() == 4 ? flatten(x) : x, fc_[i]);
      case OpKind::kDropout: {
        Tensor<T> mask;
        Tensor<T> y = dropout_forward(x, rate_[i], mode, rng,
                                      cache ? &mask : nullptr);
        if (cache) cache->mask[i] = std::move(mask);
        return y;
      }
    }
    throw StateError("unreachable op kind");
  }

  void build() {
    const std::vector<Shape> shapes = infer_shapes(spec_);
    std::size_t c = static_cast<std::size_t>(spec_.input_channels);
    std::size_t flat_in = 0;
    bool flat = false;
    int conv_idx = 0, fc_idx = 0;
    auto push = [&](OpKind kind, std::string name) {
      descs_.push_back({kind, std::move(name)});
      conv_.emplace_back();
      bn_.emplace_back();
      fc_.emplace_back();
      rate_.push_back(0.0);
    };
    for (std::size_t li = 0; li < spec_.layers.size(); ++li) {
      const LayerDesc& l = spec_.layers[li];
      switch (l.kind) {
        case LayerKind::kConv: {
          ++conv_idx;
          const std::string cn = "Conv" + std::to_string(conv_idx);
          const std::size_t co = static_cast<std::size_t>(l.out_channels);
          const std::size_t k = static_cast<std::size_t>(l.kernel);
          push(OpKind::kConv, cn);
          conv_.back().weight = Tensor<T>({co, c, k, k});
          conv_.back().bias = Tensor<T>({co});
          conv_.back().stride = static_cast<std::size_t>(l.stride);
          push(OpKind::kBn, "BN" + std::to_string(conv_idx));
          init_bn(bn_.back(), co);
          push(OpKind::kRelu, "");
          c = co;
          break;
        }
        case LayerKind::kPool:
          push(OpKind::kPool, "");
          break;
        case LayerKind::kFc: {
          ++fc_idx;
          const std::string fn = "FC" + std::to_string(fc_idx);
          const std::size_t nin = flat ? flat_in : prev_flat_size(shapes, li);
          const std::size_t nout = static_cast<std::size_t>(l.out_channels);
          push(OpKind::kFc, fn);
          fc_.back().weight = Tensor<T>({nout, nin});
          fc_.back().bias = Tensor<T>({nout});
          push(OpKind::kBn, fn + "-BN");
          init_bn(bn_.back(), nout);
          push(OpKind::kRelu, "");
          flat = true;
          flat_in = nout;
          break;
        }
        case LayerKind::kDropout:
          push(OpKind::kDropout, "");
          rate_.back() = l.rate;
          break;
        case LayerKind::kSoftmaxHead: {
          const std::size_t nin = flat ? flat_in : prev_flat_size(shapes, li);
          const std::size_t nout = static_cast<std::size_t>(l.out_channels);
          push(OpKind::kFc, "Softmax");
          fc_.back().weight = Tensor<T>({nout, nin});
          fc_.back().bias = Tensor<T>({nout});
          flat = true;
          flat_in = nout;
          break;
        }
      }
    }
  }

  void init_bn(BnScaleParams<T>& p, std::size_t c) {
    p.gamma = Tensor<T>::full({c}, T(1));
    p.beta = Tensor<T>({c});
    p.running_mean = Tensor<T>({c});
    p.running_var = Tensor<T>::full({c}, T(1));
    p.ema_factor = static_cast<T>(spec_.bn_ema);
    p.epsilon = static_cast<T>(spec_.bn_epsilon);
  }

  static std::size_t prev_flat_size(const std::vector<Shape>& shapes,
                                    std::size_t li) {
    if (li == 0) throw ShapeError("fc cannot be the first layer");
    const Shape& s = shapes[li - 1];
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  ArchitectureSpec spec_;
  std::vector<OpDesc> descs_;
  std::vector<ConvParams<T>> conv_;
  std::vector<BnScaleParams<T>> bn_;
  std::vector<FcParams<T>> fc_;
  std::vector<double> rate_;
};

using ModelF = Model<float>;
using ModelD = Model<double>;

}  // namespace lscnn
