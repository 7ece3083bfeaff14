#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "lscnn/dataset.hpp"
#include "lscnn/synth.hpp"

using namespace lscnn;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("data");

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Sample constant_sample(float value, Label label = Label::kReal) {
  Sample s;
  s.image = TensorF::full({3, 12, 12}, value);
  s.label = label;
  s.video_id = "v";
  return s;
}

}  // namespace

TEST_CASE("normalization arithmetic") {
  NormalizationStats stats;
  stats.channel_mean = {100.0f};
  TensorF img = TensorF::full({1, 2, 2}, 128.0f);
  const TensorF out = normalize(img, stats);
  CHECK(out[0] == doctest::Approx(0.21875f));

  TensorF at_mean = TensorF::full({1, 2, 2}, 100.0f);
  const TensorF zero = normalize(at_mean, stats);
  CHECK(zero[0] == 0.0f);
}

TEST_CASE("normalized values stay within the derived bounds") {
  Rng rng(1);
  NormalizationStats stats;
  stats.channel_mean = {40.0f, 128.0f, 250.0f};
  for (int trial = 0; trial < 5; ++trial) {
    Rng r = rng.child(static_cast<std::uint64_t>(trial));
    TensorF img({3, 6, 6});
    for (std::size_t i = 0; i < img.size(); ++i)
      img[i] = static_cast<float>(r.uniform_index(256));
    const TensorF out = normalize(img, stats);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i] >= -255.0f / 128.0f);
      CHECK(out[i] <= 255.0f / 128.0f);
    }
  }
}

TEST_CASE("normalization statistics come from the training split only") {
  Dataset ds;
  ds.samples.push_back(constant_sample(10.0f));
  ds.samples.back().split = Split::kTrain;
  ds.samples.push_back(constant_sample(30.0f));
  ds.samples.back().split = Split::kTrain;
  ds.samples.push_back(constant_sample(250.0f));
  ds.samples.back().split = Split::kValidation;
  ds.samples.push_back(constant_sample(250.0f));
  ds.samples.back().split = Split::kTest;
  const NormalizationStats stats = compute_normalization(ds);
  for (float m : stats.channel_mean) CHECK(m == doctest::Approx(20.0f));

  Dataset empty;
  empty.samples.push_back(constant_sample(1.0f));
  empty.samples.back().split = Split::kTest;
  CHECK_THROWS_AS(compute_normalization(empty), DataError);
}

TEST_CASE("augment emits exactly 19 in-range images") {
  Rng rng(2);
  Sample s = constant_sample(128.0f);
  for (std::size_t i = 0; i < s.image.size(); ++i)
    s.image[i] = static_cast<float>(rng.uniform_index(256));
  const AugmentConfig cfg;
  const std::vector<Sample> out = augment(s, cfg, rng);
  CHECK(out.size() == 19);
  for (const Sample& o : out) {
    CHECK(o.label == s.label);
    CHECK(o.video_id == s.video_id);
    for (std::size_t i = 0; i < o.image.size(); ++i) {
      CHECK(o.image[i] >= 0.0f);
      CHECK(o.image[i] <= 255.0f);
    }
  }
  // variant 0 is the untouched original
  CHECK(out[0].image == s.image);
}

TEST_CASE("bare brightness variants are config-selectable (21 outputs)") {
  Rng rng(3);
  Sample s = constant_sample(100.0f);
  AugmentConfig cfg;
  cfg.emit_bare_brightness = true;
  const std::vector<Sample> out = augment(s, cfg, rng);
  CHECK(out.size() == 21);
  CHECK(out[19].image[0] == 150.0f);
  CHECK(out[20].image[0] == 50.0f);
}

TEST_CASE("brightness shift saturates inside augmentation") {
  Rng rng(4);
  Sample s = constant_sample(230.0f);
  AugmentConfig cfg;
  const std::vector<Sample> out = augment(s, cfg, rng);
  // variants 7..9 are +50 then blur: a constant clamped image stays 255
  CHECK(out[7].image[0] == doctest::Approx(255.0f));
}

TEST_CASE("blur variants keep a constant image identical") {
  Rng rng(5);
  Sample s = constant_sample(90.0f);
  AugmentConfig cfg;
  const std::vector<Sample> out = augment(s, cfg, rng);
  for (int v : {1, 2, 3}) {  // blur of the unshifted image
    for (std::size_t i = 0; i < out[v].image.size(); ++i)
      CHECK(out[v].image[i] == doctest::Approx(90.0f).epsilon(1e-6));
  }
}

TEST_CASE("augment variants are deterministic given the stream") {
  Rng rng(6);
  Sample s = constant_sample(128.0f);
  const AugmentConfig cfg;
  const TensorF a = augment_variant(s.image, 5, cfg, rng);
  const TensorF b = augment_variant(s.image, 5, cfg, rng);
  CHECK(a == b);  // noise draws come from a child stream keyed by variant
}

TEST_CASE("manifest round trip and strict keys") {
  const fs::path dir = fresh_dir("lscnn_manifest_test");
  std::vector<ManifestEntry> entries = {
      {"train/v0/*.png", Label::kReal, Split::kTrain, "v0"},
      {"test/v1/*.png", Label::kAttack, Split::kTest, "v1"}};
  write_manifest(dir / "manifest.json", entries);
  const std::vector<ManifestEntry> back = read_manifest(dir / "manifest.json");
  REQUIRE(back.size() == 2);
  CHECK(back[0].glob == "train/v0/*.png");
  CHECK(back[0].label == Label::kReal);
  CHECK(back[1].split == Split::kTest);
  CHECK(back[1].video_id == "v1");

  std::ofstream(dir / "bad.json")
      << R"({"entries":[{"glob":"a","label":"real","split":"train","video_id":"v","extra":1}]})";
  CHECK_THROWS_AS(read_manifest(dir / "bad.json"), FormatError);
  CHECK_THROWS_AS(read_manifest(dir / "missing.json"), ConfigError);
}

TEST_CASE("folder loading decodes, labels and resizes") {
  const fs::path dir = fresh_dir("lscnn_loader_test");
  // two real frames at 128px (to be resized), two attack frames at 96px
  Dataset src;
  for (int i = 0; i < 2; ++i) {
    Sample s;
    s.image = TensorF::full({3, 128, 128}, static_cast<float>(40 + i));
    s.label = Label::kReal;
    s.video_id = "vr";
    s.frame_index = i;
    s.split = Split::kTrain;
    src.samples.push_back(s);
  }
  for (int i = 0; i < 2; ++i) {
    Sample s;
    s.image = TensorF::full({3, 96, 96}, static_cast<float>(200 + i));
    s.label = Label::kAttack;
    s.video_id = "va";
    s.frame_index = i;
    s.split = Split::kTrain;
    src.samples.push_back(s);
  }
  write_dataset_png(src, dir);

  const Dataset ds = load_folder(dir, dir / "manifest.json", 3, 96);
  REQUIRE(ds.samples.size() == 4);
  int real = 0, attack = 0;
  for (const Sample& s : ds.samples) {
    CHECK(s.image.shape() == Shape{3, 96, 96});
    (s.label == Label::kReal ? real : attack) += 1;
  }
  CHECK(real == 2);
  CHECK(attack == 2);

  // deterministic path order -> frame indices follow file order
  const auto vids = ds.videos(Split::kTrain);
  CHECK(vids.at("vr").size() == 2);
  CHECK(vids.at("va").size() == 2);

  CHECK_THROWS_AS(load_folder(dir, dir / "nope.json", 3, 96), ConfigError);
}

TEST_CASE("unreadable files are collected, run continues") {
  const fs::path dir = fresh_dir("lscnn_loader_bad");
  Dataset src;
  Sample s;
  s.image = TensorF::full({3, 32, 32}, 10.0f);
  s.label = Label::kReal;
  s.video_id = "v0";
  s.frame_index = 0;
  s.split = Split::kTrain;
  src.samples.push_back(s);
  write_dataset_png(src, dir);
  std::ofstream(dir / "train" / "v0" / "frame_0001.png") << "garbage";

  std::vector<std::string> errors;
  const Dataset ds = load_folder(dir, dir / "manifest.json", 3, 32, &errors);
  CHECK(ds.samples.size() == 1);
  CHECK(errors.size() == 1);
}

TEST_SUITE_END();
