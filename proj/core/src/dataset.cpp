#include "lscnn/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>

#include "lscnn/log.hpp"

namespace lscnn {

using nlohmann::json;

std::string to_string(Label l) {
  return l == Label::kReal ? "real" : "attack";
}
std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    default: return "test";
  }
}

Label label_from_string(const std::string& s) {
  if (s == "real") return Label::kReal;
  if (s == "attack" || s == "fake") return Label::kAttack;
  throw ConfigError("unknown label '" + s + "'");
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation" || s == "val") return Split::kValidation;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + s + "'");
}

std::vector<std::size_t> Dataset::split_indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].split == s) out.push_back(i);
  return out;
}

std::map<std::string, std::vector<std::size_t>> Dataset::videos(Split s) const {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].split == s) out[samples[i].video_id].push_back(i);
  for (auto& [id, idx] : out)
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return samples[a].frame_index < samples[b].frame_index;
    });
  return out;
}

NormalizationStats compute_normalization(const Dataset& ds) {
  const std::vector<std::size_t> train = ds.split_indices(Split::kTrain);
  if (train.empty())
    throw DataError("normalization statistics need a non-empty training split");
  const std::size_t c = ds.samples[train[0]].image.dim(0);
  std::vector<double> sum(c, 0.0);
  std::vector<std::size_t> count(c, 0);
  for (std::size_t idx : train) {
    const TensorF& img = ds.samples[idx].image;
    if (img.dim(0) != c)
      throw DataError("mixed channel counts in training split");
    const std::size_t plane = img.dim(1) * img.dim(2);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float* p = img.data() + ch * plane;
      for (std::size_t i = 0; i < plane; ++i) sum[ch] += p[i];
      count[ch] += plane;
    }
  }
  NormalizationStats stats;
  stats.channel_mean.resize(c);
  for (std::size_t ch = 0; ch < c; ++ch)
    stats.channel_mean[ch] =
        static_cast<float>(sum[ch] / static_cast<double>(count[ch]));
  return stats;
}

TensorF normalize(const TensorF& image, const NormalizationStats& stats) {
  if (image.rank() != 3 || image.dim(0) != stats.channel_mean.size())
    throw ShapeError("normalize: image/stats channel mismatch");
  TensorF out(image.shape());
  const std::size_t plane = image.dim(1) * image.dim(2);
  for (std::size_t ch = 0; ch < image.dim(0); ++ch) {
    const float mean = stats.channel_mean[ch];
    const float inv = 1.0f / stats.divisor;
    const float* src = image.data() + ch * plane;
    float* dst = out.data() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = (src[i] - mean) * inv;
  }
  return out;
}

TensorF augment_variant(const TensorF& image, int variant,
                        const AugmentConfig& cfg, const Rng& rng) {
  if (variant < 0 || variant >= cfg.variant_count())
    throw ConfigError("augment_variant: variant out of range");
  if (variant == 0) return image;
  if (variant >= 19) {  // bare brightness versions (optional)
    const float d = variant == 19 ? cfg.channel_shift : -cfg.channel_shift;
    return brightness_shift(image, d);
  }
  const int b = (variant - 1) / 6;  // 0: original, 1: +shift, 2: -shift
  const int t = (variant - 1) % 6;  // 0..2 blur, 3..5 noise
  TensorF base = image;
  if (b == 1) base = brightness_shift(base, cfg.channel_shift);
  if (b == 2) base = brightness_shift(base, -cfg.channel_shift);
  if (t < 3) return gaussian_blur_2x2(base, cfg.blur_sigmas[t]);
  Rng noise_rng = rng.child(static_cast<std::uint64_t>(variant));
  return add_gaussian_noise(base, cfg.noise_sigmas[t - 3], noise_rng);
}

std::vector<Sample> augment(const Sample& sample, const AugmentConfig& cfg,
                            const Rng& rng) {
  std::vector<Sample> out;
  out.reserve(cfg.variant_count());
  for (int v = 0; v < cfg.variant_count(); ++v) {
    Sample s = sample;
    s.image = augment_variant(sample.image, v, cfg, rng);
    out.push_back(std::move(s));
  }
  return out;
}

// --- manifest ---------------------------------------------------------------

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("entries") ||
      !doc["entries"].is_array())
    throw FormatError("manifest must be an object with an 'entries' array");
  std::vector<ManifestEntry> out;
  for (const json& e : doc["entries"]) {
    for (auto it = e.begin(); it != e.end(); ++it) {
      const std::string& k = it.key();
      if (k != "glob" && k != "label" && k != "split" && k != "video_id")
        throw FormatError("manifest entry has unknown key '" + k + "'");
    }
    ManifestEntry m;
    m.glob = e.at("glob").get<std::string>();
    m.label = label_from_string(e.at("label").get<std::string>());
    m.split = split_from_string(e.at("split").get<std::string>());
    m.video_id = e.at("video_id").get<std::string>();
    out.push_back(std::move(m));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries) {
  json doc;
  doc["entries"] = json::array();
  for (const ManifestEntry& e : entries) {
    doc["entries"].push_back({{"glob", e.glob},
                              {"label", to_string(e.label)},
                              {"split", to_string(e.split)},
                              {"video_id", e.video_id}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << doc.dump(2) << "\n";
}

namespace {

// Glob match with '*' (any run, not crossing '/') and '?' (any one char).
bool glob_match(const std::string& pattern, const std::string& text) {
  std::size_t p = 0, t = 0, star_p = std::string::npos, star_t = 0;
  while (t < text.size()) {
    if (p < pattern.size() &&
        (pattern[p] == text[t] || (pattern[p] == '?' && text[t] != '/'))) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star_p = p++;
      star_t = t;
    } else if (star_p != std::string::npos && text[star_t] != '/') {
      p = star_p + 1;
      t = ++star_t;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

}  // namespace

Dataset load_folder(const std::filesystem::path& root,
                    const std::filesystem::path& manifest_path,
                    int target_channels, int target_size,
                    std::vector<std::string>* errors) {
  if (target_channels != 1 && target_channels != 3)
    throw ConfigError("load_folder: target_channels must be 1 or 3");
  const std::vector<ManifestEntry> entries = read_manifest(manifest_path);

  std::vector<std::string> files;
  for (const auto& e :
       std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".png")
      files.push_back(
          std::filesystem::relative(e.path(), root).generic_string());
  }
  std::sort(files.begin(), files.end());

  Dataset ds;
  std::map<std::string, int> frame_counters;
  for (const std::string& rel : files) {
    const ManifestEntry* match = nullptr;
    for (const ManifestEntry& e : entries) {
      if (glob_match(e.glob, rel)) {
        match = &e;
        break;
      }
    }
    if (!match) continue;
    try {
      ImageU8 raw = read_png(root / rel);
      TensorF img = image_to_tensor(raw);
      if (target_channels == 1 && img.dim(0) == 3) img = rgb_to_gray(img);
      if (target_channels == 3 && img.dim(0) == 1) img = gray_to_rgb(img);
      img = bilinear_resize(img, static_cast<std::size_t>(target_size),
                            static_cast<std::size_t>(target_size));
      Sample s;
      s.image = std::move(img);
      s.label = match->label;
      s.split = match->split;
      s.video_id = match->video_id;
      s.frame_index = frame_counters[match->video_id]++;
      ds.samples.push_back(std::move(s));
    } catch (const Error& err) {
      const std::string msg = rel + ": " + err.what();
      if (errors) errors->push_back(msg);
      log::warn("skipping ", msg);
    }
  }
  if (ds.samples.empty())
    throw DataError("no samples matched the manifest under " + root.string());
  return ds;
}

}  // namespace lscnn
