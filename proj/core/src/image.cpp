#include "lscnn/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace lscnn {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

float clamp255(float v) { return std::min(255.0f, std::max(0.0f, v)); }

}  // namespace

ImageU8 read_png(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError("cannot open " + path.string());

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("malformed PNG: " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unsupported PNG channel count in " + path.string());
  }

  std::vector<std::uint8_t> interleaved(static_cast<std::size_t>(w) * h *
                                        channels);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 i = 0; i < h; ++i)
    rows[i] = interleaved.data() + static_cast<std::size_t>(i) * w * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  ImageU8 img{channels, static_cast<int>(h), static_cast<int>(w), {}};
  img.data.resize(interleaved.size());
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < channels; ++c)
      img.data[c * plane + i] = interleaved[i * channels + c];
  return img;
}

void write_png(const std::filesystem::path& path, const ImageU8& img) {
  if (img.channels != 1 && img.channels != 3)
    throw ConfigError("write_png: channels must be 1 or 3");
  if (img.data.size() != static_cast<std::size_t>(img.channels) * img.height *
                             img.width)
    throw ShapeError("write_png: data size does not match dimensions");

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError("cannot write " + path.string());

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG write failed: " + path.string());
  }
  png_init_io(png, f.get());
  // Fixed settings keep the output byte-identical for identical pixels.
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_SUB);
  png_set_IHDR(png, info, img.width, img.height, 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const std::size_t plane =
      static_cast<std::size_t>(img.width) * img.height;
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) *
                                img.channels);
  for (int i = 0; i < img.height; ++i) {
    for (int j = 0; j < img.width; ++j)
      for (int c = 0; c < img.channels; ++c)
        row[static_cast<std::size_t>(j) * img.channels + c] =
            img.data[c * plane + static_cast<std::size_t>(i) * img.width + j];
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

TensorF image_to_tensor(const ImageU8& img) {
  TensorF t({static_cast<std::size_t>(img.channels),
             static_cast<std::size_t>(img.height),
             static_cast<std::size_t>(img.width)});
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>(img.data[i]);
  return t;
}

ImageU8 tensor_to_image(const TensorF& t) {
  if (t.rank() != 3 || (t.dim(0) != 1 && t.dim(0) != 3))
    throw ShapeError("tensor_to_image: expects 1|3 x H x W");
  ImageU8 img{static_cast<int>(t.dim(0)), static_cast<int>(t.dim(1)),
              static_cast<int>(t.dim(2)), {}};
  img.data.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    img.data[i] = static_cast<std::uint8_t>(std::lround(clamp255(t[i])));
  return img;
}

TensorF bilinear_resize(const TensorF& img, std::size_t out_h,
                        std::size_t out_w) {
  if (img.rank() != 3) throw ShapeError("bilinear_resize: expects C x H x W");
  if (out_h < 1 || out_w < 1)
    throw ConfigError("bilinear_resize: output must be at least 1x1");
  const std::size_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  if (h == out_h && w == out_w) return img;
  TensorF out({c, out_h, out_w});
  const float sy = static_cast<float>(h) / static_cast<float>(out_h);
  const float sx = static_cast<float>(w) / static_cast<float>(out_w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < out_h; ++i) {
      float fy = (static_cast<float>(i) + 0.5f) * sy - 0.5f;
      fy = std::max(0.0f, std::min(fy, static_cast<float>(h - 1)));
      const std::size_t y0 = static_cast<std::size_t>(fy);
      const std::size_t y1 = std::min(y0 + 1, h - 1);
      const float wy = fy - static_cast<float>(y0);
      for (std::size_t j = 0; j < out_w; ++j) {
        float fx = (static_cast<float>(j) + 0.5f) * sx - 0.5f;
        fx = std::max(0.0f, std::min(fx, static_cast<float>(w - 1)));
        const std::size_t x0 = static_cast<std::size_t>(fx);
        const std::size_t x1 = std::min(x0 + 1, w - 1);
        const float wx = fx - static_cast<float>(x0);
        const float top = img.at(ch, y0, x0) * (1.0f - wx) +
                          img.at(ch, y0, x1) * wx;
        const float bot = img.at(ch, y1, x0) * (1.0f - wx) +
                          img.at(ch, y1, x1) * wx;
        out.at(ch, i, j) = top * (1.0f - wy) + bot * wy;
      }
    }
  }
  return out;
}

TensorF rgb_to_gray(const TensorF& img) {
  if (img.rank() != 3 || img.dim(0) != 3)
    throw ShapeError("rgb_to_gray: expects 3 x H x W");
  const std::size_t plane = img.dim(1) * img.dim(2);
  TensorF out({1, img.dim(1), img.dim(2)});
  for (std::size_t i = 0; i < plane; ++i)
    out[i] = 0.299f * img[i] + 0.587f * img[plane + i] +
             0.114f * img[2 * plane + i];
  return out;
}

TensorF gray_to_rgb(const TensorF& img) {
  if (img.rank() != 3 || img.dim(0) != 1)
    throw ShapeError("gray_to_rgb: expects 1 x H x W");
  const std::size_t plane = img.dim(1) * img.dim(2);
  TensorF out({3, img.dim(1), img.dim(2)});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = img[i];
  return out;
}

TensorF brightness_shift(const TensorF& img, float delta) {
  TensorF out(img.shape());
  for (std::size_t i = 0; i < img.size(); ++i)
    out[i] = clamp255(img[i] + delta);
  return out;
}

TensorF gaussian_blur_2x2(const TensorF& img, float sigma) {
  if (img.rank() != 3) throw ShapeError("gaussian_blur_2x2: expects C x H x W");
  if (sigma <= 0.0f) throw ConfigError("gaussian_blur_2x2: sigma must be > 0");
  const double s2 = 2.0 * static_cast<double>(sigma) * sigma;
  double k[4] = {1.0, std::exp(-1.0 / s2), std::exp(-1.0 / s2),
                 std::exp(-2.0 / s2)};
  const double sum = k[0] + k[1] + k[2] + k[3];
  for (double& v : k) v /= sum;

  const std::size_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  TensorF out(img.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < h; ++i) {
      const std::size_t i1 = std::min(i + 1, h - 1);
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t j1 = std::min(j + 1, w - 1);
        const double v = k[0] * img.at(ch, i, j) + k[1] * img.at(ch, i, j1) +
                         k[2] * img.at(ch, i1, j) + k[3] * img.at(ch, i1, j1);
        out.at(ch, i, j) = clamp255(static_cast<float>(v));
      }
    }
  }
  return out;
}

TensorF add_gaussian_noise(const TensorF& img, float sigma01, Rng& rng) {
  if (sigma01 < 0.0f)
    throw ConfigError("add_gaussian_noise: sigma must be >= 0");
  TensorF out(img.shape());
  for (std::size_t i = 0; i < img.size(); ++i)
    out[i] = clamp255(img[i] +
                      255.0f * static_cast<float>(rng.normal(0.0, sigma01)));
  return out;
}

}  // namespace lscnn
