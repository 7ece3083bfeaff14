#include "lscnn/architecture.hpp"

#include <sstream>

#include "lscnn/layers.hpp"

namespace lscnn {

namespace {

LayerDesc conv(int out, int k, int s) {
  return {LayerKind::kConv, out, k, s, 0.0};
}
LayerDesc pool() { return {LayerKind::kPool, 0, 2, 2, 0.0}; }
LayerDesc fc(int out) { return {LayerKind::kFc, out, 0, 1, 0.0}; }
LayerDesc dropout(double rate) { return {LayerKind::kDropout, 0, 0, 1, rate}; }
LayerDesc head() { return {LayerKind::kSoftmaxHead, 2, 0, 1, 0.0}; }

}  // namespace

ArchitectureSpec lscnn_spec(double dropout_rate) {
  ArchitectureSpec s;
  s.name = "lscnn";
  s.input_channels = 3;
  s.input_size = 96;
  s.layers = {conv(27, 3, 1), pool(), conv(36, 3, 1), pool(),
              conv(45, 3, 1), pool(), conv(54, 3, 1), pool(),
              fc(450),        dropout(dropout_rate), head()};
  return s;
}

ArchitectureSpec patchnet_spec(double dropout_rate) {
  ArchitectureSpec s;
  s.name = "patchnet";
  s.input_channels = 3;
  s.input_size = 32;
  s.layers = {conv(3, 3, 1), pool(), conv(4, 3, 1), pool(),
              conv(5, 3, 1), pool(), conv(6, 3, 1), pool(),
              fc(50),        dropout(dropout_rate), head()};
  return s;
}

ArchitectureSpec shallow_spec(bool for_patch, double dropout_rate) {
  ArchitectureSpec s;
  s.name = for_patch ? "shallow-patch" : "shallow-face";
  s.input_channels = 1;
  s.input_size = for_patch ? 21 : 64;
  const int w1 = for_patch ? 10 : 90;
  const int w2 = for_patch ? 15 : 135;
  const int f = for_patch ? 150 : 1350;
  s.layers = {conv(w1, 5, 2), pool(), conv(w2, 5, 2), pool(),
              fc(f),          dropout(dropout_rate), head()};
  return s;
}

std::vector<Shape> infer_shapes(const ArchitectureSpec& spec) {
  if (spec.layers.empty()) throw ShapeError("architecture has no layers");
  if (spec.input_channels < 1 || spec.input_size < 1)
    throw ShapeError("architecture input must be at least 1x1x1");
  std::vector<Shape> out;
  out.reserve(spec.layers.size());
  std::size_t c = static_cast<std::size_t>(spec.input_channels);
  std::size_t h = static_cast<std::size_t>(spec.input_size);
  std::size_t w = h;
  bool flat = false;
  std::size_t f = 0;
  for (const LayerDesc& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::kConv: {
        if (flat) throw ShapeError("conv after flatten");
        const std::size_t k = static_cast<std::size_t>(l.kernel);
        const std::size_t s = static_cast<std::size_t>(l.stride);
        h = detail::conv_out_dim(h, k, s);
        w = detail::conv_out_dim(w, k, s);
        c = static_cast<std::size_t>(l.out_channels);
        out.push_back({c, h, w});
        break;
      }
      case LayerKind::kPool: {
        if (flat) throw ShapeError("pool after flatten");
        h = detail::pool_out_dim(h, 2, 2);
        w = detail::pool_out_dim(w, 2, 2);
        out.push_back({c, h, w});
        break;
      }
      case LayerKind::kFc: {
        flat = true;
        f = static_cast<std::size_t>(l.out_channels);
        out.push_back({f});
        break;
      }
      case LayerKind::kDropout: {
        out.push_back(flat ? Shape{f} : Shape{c, h, w});
        break;
      }
      case LayerKind::kSoftmaxHead: {
        flat = true;
        f = static_cast<std::size_t>(l.out_channels);
        out.push_back({f});
        break;
      }
    }
  }
  return out;
}

void validate_spec(const ArchitectureSpec& spec) {
  if (spec.layers.empty() || spec.layers.back().kind != LayerKind::kSoftmaxHead)
    throw ShapeError("architecture must end in a softmax head");
  if (spec.layers.back().out_channels != 2)
    throw ShapeError("softmax head must have 2 outputs");
  infer_shapes(spec);
}

std::string canonical_string(const ArchitectureSpec& spec) {
  std::ostringstream os;
  os << "v1|" << spec.name << "|in:" << spec.input_channels << "x"
     << spec.input_size << "x" << spec.input_size;
  for (const LayerDesc& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::kConv:
        os << "|conv:o" << l.out_channels << ",k" << l.kernel << ",s"
           << l.stride;
        break;
      case LayerKind::kPool:
        os << "|pool:k2,s2";
        break;
      case LayerKind::kFc:
        os << "|fc:" << l.out_channels;
        break;
      case LayerKind::kDropout:
        os << "|drop:" << l.rate;
        break;
      case LayerKind::kSoftmaxHead:
        os << "|head:" << l.out_channels;
        break;
    }
  }
  return os.str();
}

}  // namespace lscnn
