#pragma once

#include <string>
#include <vector>

#include "lscnn/tensor.hpp"

namespace lscnn {

enum class LayerKind { kConv, kPool, kFc, kDropout, kSoftmaxHead };

// One table row. Conv and Fc are implicitly followed by batch
// normalization + scale + ReLU; the softmax head is a plain linear map.
struct LayerDesc {
  LayerKind kind;
  int out_channels = 0;  // conv: output maps; fc: neurons; head: classes
  int kernel = 0;        // conv only
  int stride = 1;        // conv only
  double rate = 0.0;     // dropout only
};

struct ArchitectureSpec {
  std::string name;
  int input_channels = 3;
  int input_size = 96;  // H == W
  std::vector<LayerDesc> layers;
  // Normalization knobs carried alongside the structure; excluded from the
  // canonical string / digest (they do not affect tensor shapes).
  double bn_epsilon = 1e-5;
  double bn_ema = 0.99;
};

// Whole-face network: conv widths 27/36/45/54 (3x3, stride 1), four 2x2
// pools, FC 450, dropout, 2-way softmax on 3x96x96 inputs.
ArchitectureSpec lscnn_spec(double dropout_rate = 0.5);

// Per-patch network: conv widths 3/4/5/6, FC 50, on 3x32x32 inputs. Exactly
// one ninth of the whole-face widths so nine of them compose block-wise.
ArchitectureSpec patchnet_spec(double dropout_rate = 0.5);

// Shallow grayscale variant for small low-resolution sets: two 5x5/stride-2
// convs. Whole-face: 64x64 input, widths 90/135, FC 1350. Patch: 21x21
// input, widths 10/15, FC 150.
ArchitectureSpec shallow_spec(bool for_patch, double dropout_rate = 0.5);

// Output shape after each LayerDesc (batch dimension excluded): conv/pool
// rows give {C, H, W}, fc/dropout/head rows give {F}. Throws ShapeError when
// a dimension collapses below 1 before pooling's truncation applies.
std::vector<Shape> infer_shapes(const ArchitectureSpec& spec);

// Deterministic structural encoding used for checkpoint digests.
std::string canonical_string(const ArchitectureSpec& spec);

// Structural validation: softmax-2 tail, shape chain feasible.
void validate_spec(const ArchitectureSpec& spec);

}  // namespace lscnn
