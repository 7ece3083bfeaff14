#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lscnn/rng.hpp"
#include "lscnn/tensor.hpp"

namespace lscnn {

// 8-bit image stored planar (C x H x W), matching the tensor layout.
// Channels: 1 (grayscale) or 3 (RGB).
struct ImageU8 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;
};

ImageU8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageU8& img);

// [0,255]-valued float tensor <-> 8-bit image (round to nearest, clamp).
TensorF image_to_tensor(const ImageU8& img);
ImageU8 tensor_to_image(const TensorF& t);

TensorF bilinear_resize(const TensorF& img, std::size_t out_h,
                        std::size_t out_w);

// Luma conversion (Rec. 601 weights) and plane replication.
TensorF rgb_to_gray(const TensorF& img);
TensorF gray_to_rgb(const TensorF& img);

// Adds delta to every channel, clamped to [0, 255].
TensorF brightness_shift(const TensorF& img, float delta);

// 2x2 sampled-Gaussian filter: weights exp(-(u^2+v^2)/(2 sigma^2)) at offsets
// u,v in {0,1} from the anchor pixel, normalized to sum 1. The bottom/right
// edges are handled by replication, so a constant image stays constant.
TensorF gaussian_blur_2x2(const TensorF& img, float sigma);

// Additive Gaussian noise with stddev given on the [0,1] intensity scale;
// the result is clamped back to [0, 255].
TensorF add_gaussian_noise(const TensorF& img, float sigma01, Rng& rng);

}  // namespace lscnn
