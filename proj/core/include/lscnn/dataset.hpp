#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lscnn/image.hpp"
#include "lscnn/tensor.hpp"

namespace lscnn {

enum class Label { kReal = 0, kAttack = 1 };
enum class Split { kTrain, kValidation, kTest };

// Softmax class index convention: class 0 is real, class 1 is attack.
inline int class_index(Label l) { return l == Label::kReal ? 0 : 1; }

std::string to_string(Label l);
std::string to_string(Split s);
Label label_from_string(const std::string& s);
Split split_from_string(const std::string& s);

struct Sample {
  TensorF image;  // C x H x W, raw pixel values in [0, 255]
  Label label = Label::kReal;
  std::string video_id;
  int frame_index = 0;
  Split split = Split::kTrain;
};

struct Dataset {
  std::vector<Sample> samples;

  std::vector<std::size_t> split_indices(Split s) const;
  // video_id -> sample indices, restricted to one split, sorted by frame.
  std::map<std::string, std::vector<std::size_t>> videos(Split s) const;
};

// Per-channel mean over the raw training-split pixels; fixed divisor 128.
struct NormalizationStats {
  std::vector<float> channel_mean;
  float divisor = 128.0f;
};

NormalizationStats compute_normalization(const Dataset& ds);

// out[c] = (in[c] - mean[c]) / 128, applied to whole images before any
// patch splitting.
TensorF normalize(const TensorF& image, const NormalizationStats& stats);

struct AugmentConfig {
  float channel_shift = 50.0f;
  std::array<float, 3> blur_sigmas{0.1f, 0.5f, 1.0f};
  std::array<float, 3> noise_sigmas{0.0005f, 0.00075f, 0.001f};
  // When set, the bare +shift/-shift images are also emitted (21 outputs
  // instead of 19).
  bool emit_bare_brightness = false;

  int variant_count() const { return emit_bare_brightness ? 21 : 19; }
};

// Deterministic transform for one augmentation variant. Variant 0 is the
// original; variants 1..18 are {identity, +shift, -shift} x {3 blur levels,
// 3 noise levels}; with emit_bare_brightness, 19 and 20 are the bare
// brightness shifts. Raw [0,255] in, raw [0,255] out.
TensorF augment_variant(const TensorF& image, int variant,
                        const AugmentConfig& cfg, const Rng& rng);

// All variants of one sample (19 by default). Label/video/frame/split are
// inherited.
std::vector<Sample> augment(const Sample& sample, const AugmentConfig& cfg,
                            const Rng& rng);

// --- folder ingestion -------------------------------------------------------

// One manifest entry maps a directory glob (relative to the dataset root,
// '*' and '?' wildcards) to the metadata of the files it matches.
struct ManifestEntry {
  std::string glob;
  Label label;
  Split split;
  std::string video_id;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries);

// Decodes every matched PNG, converts to target_channels (1 or 3), resizes
// bilinearly to target_size x target_size when needed. Files are ordered
// deterministically by path; frame_index is the position within the video.
// Unreadable files are collected into `errors` and skipped; an empty split
// is fatal only when require_nonempty contains it.
Dataset load_folder(const std::filesystem::path& root,
                    const std::filesystem::path& manifest_path,
                    int target_channels, int target_size,
                    std::vector<std::string>* errors = nullptr);

}  // namespace lscnn
