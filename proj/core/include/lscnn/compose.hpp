#pragma once

#include <array>
#include <string>
#include <vector>

#include "lscnn/model.hpp"

namespace lscnn {

// Fixed 3x3 decomposition of a face into non-overlapping patches p1..p9,
// row-major from the top-left. When the side is not divisible by 3 the
// leftover pixels are dropped (right/bottom by default, split evenly with
// the centered origin).
struct PatchGrid {
  enum class Origin { kTopLeft, kCenter };

  std::size_t image_size = 96;
  std::size_t patch_size = 32;
  Origin origin = Origin::kTopLeft;

  static PatchGrid for_image(std::size_t image_size,
                             Origin origin = Origin::kTopLeft);

  // Top-left (row, col) of patch k, k in [0, 9).
  std::pair<std::size_t, std::size_t> offset(std::size_t k) const;
};

std::array<TensorF, 9> split_patches(const TensorF& face,
                                     const PatchGrid& grid);

struct BlockRange {
  std::size_t out_lo = 0, out_hi = 0;
  std::size_t in_lo = 0, in_hi = 0;
};

// Per conv stage, the output/input channel ranges each of the nine part
// networks occupies inside the whole network. The first stage shares its
// input channels (the image planes), so in_lo/in_hi span all of them.
struct BlockMap {
  std::vector<std::array<BlockRange, 9>> conv;  // one entry per conv stage
};

BlockMap block_map(const ArchitectureSpec& whole, const ArchitectureSpec& part);

// Builds whole-network parameters from nine trained part networks. Conv
// weights/biases and batchnorm tensors are copied block-wise; every
// cross-block conv weight is exactly zero; the fully connected top (FC and
// softmax weights) is drawn fresh from Normal(0, fc_std) with zero biases
// and an identity batchnorm.
ModelParams<float> compose(const std::array<ModelParams<float>, 9>& nets,
                           const ArchitectureSpec& whole,
                           const ArchitectureSpec& part, float fc_std,
                           Rng& rng);

struct IndependenceReport {
  struct Block {
    bool ok = false;
    float max_abs_diff = 0.0f;
  };
  bool ok = false;
  std::array<Block, 9> blocks;
  std::string summary() const;
};

// Structural check of the composition: perturbing all conv-stage parameters
// of blocks j != k must leave block k's channels of the final pool output
// bitwise unchanged in infer mode.
IndependenceReport verify_block_independence(
    const ModelParams<float>& composed, const ArchitectureSpec& whole,
    const ArchitectureSpec& part, Rng& rng, int trials = 2);

}  // namespace lscnn
