#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "lscnn/image.hpp"

using namespace lscnn;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("image");

namespace {

fs::path temp_dir() {
  const fs::path p = fs::temp_directory_path() / "lscnn_image_tests";
  fs::create_directories(p);
  return p;
}

ImageU8 random_image(int channels, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  ImageU8 img{channels, h, w, {}};
  img.data.resize(static_cast<std::size_t>(channels) * h * w);
  for (auto& b : img.data)
    b = static_cast<std::uint8_t>(rng.uniform_index(256));
  return img;
}

}  // namespace

TEST_CASE("png round trip is lossless") {
  for (int channels : {1, 3}) {
    const ImageU8 img = random_image(channels, 37, 41, 77);
    const fs::path p = temp_dir() / ("rt_" + std::to_string(channels) + ".png");
    write_png(p, img);
    const ImageU8 back = read_png(p);
    CHECK(back.channels == img.channels);
    CHECK(back.height == img.height);
    CHECK(back.width == img.width);
    CHECK(back.data == img.data);
  }
}

TEST_CASE("png writing is byte-deterministic") {
  const ImageU8 img = random_image(3, 24, 24, 88);
  const fs::path a = temp_dir() / "det_a.png";
  const fs::path b = temp_dir() / "det_b.png";
  write_png(a, img);
  write_png(b, img);
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  const std::string da((std::istreambuf_iterator<char>(fa)), {});
  const std::string db((std::istreambuf_iterator<char>(fb)), {});
  CHECK(da == db);
}

TEST_CASE("reading a non-png file raises a format error") {
  const fs::path p = temp_dir() / "not_a_png.png";
  std::ofstream(p) << "hello";
  CHECK_THROWS_AS(read_png(p), FormatError);
  CHECK_THROWS_AS(read_png(temp_dir() / "missing.png"), DataError);
}

TEST_CASE("tensor conversion rounds and clamps") {
  TensorF t({1, 1, 4}, {-3.0f, 0.4f, 254.6f, 300.0f});
  const ImageU8 img = tensor_to_image(t);
  CHECK(img.data[0] == 0);
  CHECK(img.data[1] == 0);
  CHECK(img.data[2] == 255);
  CHECK(img.data[3] == 255);
}

TEST_CASE("bilinear resize keeps constants constant and hits target size") {
  const TensorF c = TensorF::full({3, 128, 128}, 37.0f);
  const TensorF r = bilinear_resize(c, 96, 96);
  CHECK(r.shape() == Shape{3, 96, 96});
  for (std::size_t i = 0; i < r.size(); ++i)
    CHECK(r[i] == doctest::Approx(37.0f));

  Rng rng(5);
  const TensorF x = TensorF::normal({1, 10, 10}, 128.0f, 10.0f, rng);
  CHECK(bilinear_resize(x, 10, 10) == x);  // no-op path
}

TEST_CASE("gray/rgb conversions") {
  TensorF rgb({3, 1, 2}, {10.0f, 20.0f, 10.0f, 20.0f, 10.0f, 20.0f});
  const TensorF gray = rgb_to_gray(rgb);
  CHECK(gray.shape() == Shape{1, 1, 2});
  CHECK(gray[0] == doctest::Approx(10.0f));
  CHECK(gray[1] == doctest::Approx(20.0f));
  const TensorF back = gray_to_rgb(gray);
  CHECK(back.shape() == Shape{3, 1, 2});
  CHECK(back[0] == back[2]);
}

TEST_CASE("brightness shift clamps at the dynamic range") {
  TensorF t({1, 1, 3}, {230.0f, 10.0f, 128.0f});
  const TensorF up = brightness_shift(t, 50.0f);
  CHECK(up[0] == 255.0f);
  CHECK(up[1] == 60.0f);
  const TensorF down = brightness_shift(t, -50.0f);
  CHECK(down[1] == 0.0f);
  CHECK(down[2] == 78.0f);
}

TEST_CASE("blur keeps a constant image constant at every level") {
  const TensorF c = TensorF::full({3, 16, 16}, 77.0f);
  for (float sigma : {0.1f, 0.5f, 1.0f}) {
    const TensorF b = gaussian_blur_2x2(c, sigma);
    for (std::size_t i = 0; i < b.size(); ++i)
      CHECK(b[i] == doctest::Approx(77.0f).epsilon(1e-6));
  }
}

TEST_CASE("blur levels are ordered: wider sigma smooths more") {
  Rng rng(6);
  TensorF x({1, 32, 32});
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = static_cast<float>(128.0 + 100.0 * ((i % 2 == 0) ? 1 : -1));
  auto variance = [](const TensorF& t) {
    double s = 0.0, q = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      s += t[i];
      q += static_cast<double>(t[i]) * t[i];
    }
    const double m = s / static_cast<double>(t.size());
    return q / static_cast<double>(t.size()) - m * m;
  };
  const double v01 = variance(gaussian_blur_2x2(x, 0.1f));
  const double v05 = variance(gaussian_blur_2x2(x, 0.5f));
  const double v10 = variance(gaussian_blur_2x2(x, 1.0f));
  CHECK(v01 > v05);
  CHECK(v05 > v10);
}

TEST_CASE("noise is deterministic per seed and clamped") {
  const TensorF x = TensorF::full({3, 8, 8}, 254.0f);
  Rng r1(9), r2(9);
  const TensorF a = add_gaussian_noise(x, 0.001f, r1);
  const TensorF b = add_gaussian_noise(x, 0.001f, r2);
  CHECK(a == b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] >= 0.0f);
    CHECK(a[i] <= 255.0f);
  }
}

TEST_SUITE_END();
