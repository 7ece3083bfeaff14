#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "lscnn/dataset.hpp"

namespace lscnn {

// Which of the nine grid regions carry which attack cue, and how strong the
// cues are. Attack frames are derived from their paired real frames, so the
// cue regions are the only pixels that differ.
struct CueProfile {
  std::array<bool, 9> moire{};    // high-frequency interference overlay
  std::array<bool, 9> contrast{}; // local contrast reduction
  std::array<bool, 9> shadow{};   // shading attenuation (flat prints)
  float moire_amplitude = 8.0f;
  float moire_frequency = 0.45f;  // cycles per pixel
  float contrast_factor = 0.7f;   // scale on deviations from the region mean
  float shadow_removal = 0.75f;   // fraction of the shading layer removed

  // Corners carry the shadow cue, the center column moire, the side middles
  // contrast reduction; every region has local evidence.
  static CueProfile standard();
  // All cues confined to the center region p5.
  static CueProfile center_only();
};

struct SynthConfig {
  int train_videos = 12;  // counts include both classes; must be even
  int val_videos = 4;
  int test_videos = 4;
  int frames_per_video = 10;
  int image_size = 96;
  CueProfile cues = CueProfile::standard();
  std::uint64_t seed = 1;
};

// Deterministic synthetic face/attack dataset: structured face layouts with
// per-video identity jitter, per-frame noise, and paired attack videos that
// differ only by the configured region-localized cues.
Dataset synth_generate(const SynthConfig& cfg);

// Convenience form: n_videos split 60/20/20 into train/validation/test
// (rounded down to even counts per split, remainder to train).
Dataset synth_generate(int n_videos, int frames_per_video,
                       const CueProfile& cues, std::uint64_t seed);

// PNG tree (<split>/<video_id>/frame_NNN.png) plus manifest.json.
void write_dataset_png(const Dataset& ds, const std::filesystem::path& dir);

}  // namespace lscnn
