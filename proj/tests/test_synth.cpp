#include <doctest.h>

#include <cmath>

#include "lscnn/compose.hpp"
#include "lscnn/synth.hpp"

using namespace lscnn;

TEST_SUITE_BEGIN("synth");

TEST_CASE("same seed gives a bitwise-identical dataset") {
  const Dataset a = synth_generate(10, 4, CueProfile::standard(), 42);
  const Dataset b = synth_generate(10, 4, CueProfile::standard(), 42);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].image == b.samples[i].image);
    CHECK(a.samples[i].video_id == b.samples[i].video_id);
  }
  const Dataset c = synth_generate(10, 4, CueProfile::standard(), 43);
  CHECK(a.samples[0].image != c.samples[0].image);
}

TEST_CASE("counts and pairing: 10 videos x 20 frames = 200 samples") {
  const Dataset ds = synth_generate(10, 20, CueProfile::standard(), 1);
  CHECK(ds.samples.size() == 200);
  std::size_t real = 0, attack = 0;
  for (const Sample& s : ds.samples)
    (s.label == Label::kReal ? real : attack) += 1;
  CHECK(real == 100);
  CHECK(attack == 100);

  // paired ids: vNNN_real <-> vNNN_attack, same split
  std::map<std::string, Split> split_of;
  for (const Sample& s : ds.samples) split_of[s.video_id] = s.split;
  for (const auto& [id, split] : split_of) {
    if (id.ends_with("_real")) {
      const std::string twin = id.substr(0, id.size() - 5) + "_attack";
      REQUIRE(split_of.count(twin) == 1);
      CHECK(split_of.at(twin) == split);
    }
  }
}

TEST_CASE("invalid counts are rejected") {
  CHECK_THROWS_AS(synth_generate(1, 4, CueProfile::standard(), 1),
                  ConfigError);
  CHECK_THROWS_AS(synth_generate(3, 4, CueProfile::standard(), 1),
                  ConfigError);
  CHECK_THROWS_AS(synth_generate(4, 0, CueProfile::standard(), 1),
                  ConfigError);
}

TEST_CASE("samples within one video never straddle splits") {
  const Dataset ds = synth_generate(20, 5, CueProfile::standard(), 3);
  std::map<std::string, Split> first;
  for (const Sample& s : ds.samples) {
    if (first.count(s.video_id))
      CHECK(first.at(s.video_id) == s.split);
    else
      first[s.video_id] = s.split;
  }
  CHECK(!ds.split_indices(Split::kTrain).empty());
  CHECK(!ds.split_indices(Split::kValidation).empty());
  CHECK(!ds.split_indices(Split::kTest).empty());
}

TEST_CASE("attack cues are present but subtle") {
  const Dataset ds = synth_generate(6, 3, CueProfile::standard(), 7);
  // paired ordering: real/attack alternate per frame
  double total_mad = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i + 1 < ds.samples.size(); i += 2) {
    const Sample& real = ds.samples[i];
    const Sample& attack = ds.samples[i + 1];
    REQUIRE(real.label == Label::kReal);
    REQUIRE(attack.label == Label::kAttack);
    double mad = 0.0;
    for (std::size_t p = 0; p < real.image.size(); ++p)
      mad += std::abs(real.image[p] - attack.image[p]);
    mad /= static_cast<double>(real.image.size());
    CHECK(mad > 0.0);
    CHECK(mad < 0.25 * 255.0);
    total_mad += mad;
    ++pairs;
  }
  CHECK(total_mad / pairs > 0.5);  // cues are not vanishingly small
}

TEST_CASE("center-only profile leaves the other regions bitwise identical") {
  const Dataset ds = synth_generate(4, 2, CueProfile::center_only(), 9);
  const PatchGrid grid = PatchGrid::for_image(96);
  for (std::size_t i = 0; i + 1 < ds.samples.size(); i += 2) {
    const auto rp = split_patches(ds.samples[i].image, grid);
    const auto ap = split_patches(ds.samples[i + 1].image, grid);
    for (std::size_t k = 0; k < 9; ++k) {
      if (k == 4) continue;
      CHECK(rp[k] == ap[k]);
    }
    CHECK(rp[4] != ap[4]);  // the center carries the cue
  }
}

TEST_CASE("pixel values are integers in [0,255] (png-exact)") {
  const Dataset ds = synth_generate(2, 2, CueProfile::standard(), 11);
  for (const Sample& s : ds.samples)
    for (std::size_t i = 0; i < s.image.size(); ++i) {
      CHECK(s.image[i] >= 0.0f);
      CHECK(s.image[i] <= 255.0f);
      CHECK(s.image[i] == std::floor(s.image[i]));
    }
}

TEST_SUITE_END();
