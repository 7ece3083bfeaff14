#include "lscnn/synth.hpp"

#include <cmath>

#include "lscnn/compose.hpp"

namespace lscnn {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

float clamp255(float v) { return std::min(255.0f, std::max(0.0f, v)); }

// Round to integer-valued floats so in-memory samples match their PNG
// round trip exactly.
void quantize(TensorF& t) {
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>(std::lround(clamp255(t[i])));
}

struct Identity {
  float skin[3];
  float bg;
  float eye_dx, eye_dy;     // feature placement jitter, pixels
  float mouth_dy;
  float moire_theta;        // interference direction, radians
  std::array<float, 9> zone_sigma;
};

Identity draw_identity(Rng& rng) {
  Identity id;
  id.skin[0] = 168.0f + static_cast<float>(rng.normal(0, 14));
  id.skin[1] = 132.0f + static_cast<float>(rng.normal(0, 12));
  id.skin[2] = 108.0f + static_cast<float>(rng.normal(0, 12));
  id.bg = 60.0f + static_cast<float>(rng.normal(0, 18));
  id.eye_dx = static_cast<float>(rng.normal(0, 1.2));
  id.eye_dy = static_cast<float>(rng.normal(0, 1.2));
  id.mouth_dy = static_cast<float>(rng.normal(0, 1.5));
  id.moire_theta = 0.7f + static_cast<float>(rng.normal(0, 0.2));
  const float base_sigma[9] = {2.5f, 2.0f, 2.5f, 4.0f, 3.0f,
                               4.0f, 3.0f, 3.5f, 3.0f};
  for (int k = 0; k < 9; ++k)
    id.zone_sigma[k] =
        base_sigma[k] * (1.0f + 0.15f * static_cast<float>(rng.normal(0, 1)));
  return id;
}

// Soft-edged ellipse coverage in [0,1].
float ellipse(float y, float x, float cy, float cx, float ry, float rx) {
  const float dy = (y - cy) / ry, dx = (x - cx) / rx;
  const float r = std::sqrt(dy * dy + dx * dx);
  if (r <= 0.92f) return 1.0f;
  if (r >= 1.08f) return 0.0f;
  return (1.08f - r) / 0.16f;
}

void blend(TensorF& img, std::size_t i, std::size_t j, float a,
           const float rgb[3]) {
  if (a <= 0.0f) return;
  const std::size_t plane = img.dim(1) * img.dim(2);
  for (int c = 0; c < 3; ++c) {
    float& px = img.data()[c * plane + i * img.dim(2) + j];
    px = (1.0f - a) * px + a * rgb[c];
  }
}

// Face layout with distinct per-zone texture; shading layer kept separate so
// the shadow-removal cue can subtract it.
void draw_face(const Identity& id, Rng& frame_rng, std::size_t s,
               TensorF& base, TensorF& shade) {
  const float fs = static_cast<float>(s);
  base = TensorF({3, s, s});
  shade = TensorF({1, s, s});
  const float brightness = static_cast<float>(frame_rng.normal(0, 3.0));
  const float jx = static_cast<float>(frame_rng.normal(0, 0.8));
  const float jy = static_cast<float>(frame_rng.normal(0, 0.8));

  const float cy = 0.52f * fs + jy, cx = 0.50f * fs + jx;
  const float eye_y = 0.38f * fs + id.eye_dy + jy;
  const float eye_x_l = 0.35f * fs + id.eye_dx + jx;
  const float eye_x_r = 0.65f * fs + id.eye_dx + jx;
  const float mouth_y = 0.72f * fs + id.mouth_dy + jy;

  const float dark[3] = {38.0f, 30.0f, 28.0f};
  const float brow[3] = {55.0f, 42.0f, 35.0f};
  const float lip[3] = {150.0f, 70.0f, 70.0f};
  const float nose[3] = {id.skin[0] * 0.88f, id.skin[1] * 0.88f,
                         id.skin[2] * 0.88f};

  const std::size_t plane = s * s;
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      const float y = static_cast<float>(i), x = static_cast<float>(j);
      // background
      float px[3] = {id.bg, id.bg, id.bg};
      // head
      const float head = ellipse(y, x, cy, cx, 0.46f * fs, 0.40f * fs);
      if (head > 0.0f) {
        const float grad = 1.0f - 0.12f * (y / fs);  // forehead lighter
        for (int c = 0; c < 3; ++c)
          px[c] = (1.0f - head) * px[c] + head * id.skin[c] * grad;
      }
      for (int c = 0; c < 3; ++c)
        base.data()[c * plane + i * s + j] = px[c] + brightness;

      // radial shading, strongest toward the image border
      const float dy = (y - 0.5f * fs) / (0.5f * fs);
      const float dx = (x - 0.5f * fs) / (0.5f * fs);
      const float r = std::sqrt(dy * dy + dx * dx);
      shade[i * s + j] = r > 0.55f ? -35.0f * (r - 0.55f) / 0.86f : 0.0f;
    }
  }

  // facial elements
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      const float y = static_cast<float>(i), x = static_cast<float>(j);
      blend(base, i, j, ellipse(y, x, eye_y - 0.055f * fs, eye_x_l,
                                0.018f * fs, 0.075f * fs), brow);
      blend(base, i, j, ellipse(y, x, eye_y - 0.055f * fs, eye_x_r,
                                0.018f * fs, 0.075f * fs), brow);
      blend(base, i, j,
            ellipse(y, x, eye_y, eye_x_l, 0.032f * fs, 0.055f * fs), dark);
      blend(base, i, j,
            ellipse(y, x, eye_y, eye_x_r, 0.032f * fs, 0.055f * fs), dark);
      blend(base, i, j,
            ellipse(y, x, 0.55f * fs, cx, 0.16f * fs, 0.035f * fs), nose);
      blend(base, i, j,
            ellipse(y, x, mouth_y, cx, 0.04f * fs, 0.14f * fs), lip);
    }
  }

  // per-zone texture
  const PatchGrid grid = PatchGrid::for_image(s);
  for (std::size_t k = 0; k < 9; ++k) {
    auto [r0, c0] = grid.offset(k);
    const float sigma = id.zone_sigma[k];
    for (std::size_t i = r0; i < r0 + grid.patch_size; ++i)
      for (std::size_t j = c0; j < c0 + grid.patch_size; ++j) {
        const float n = static_cast<float>(frame_rng.normal(0, sigma));
        for (int c = 0; c < 3; ++c)
          base.data()[c * plane + i * s + j] += n;
      }
  }
}

void apply_cues(const CueProfile& cues, const Identity& id, std::size_t s,
                const TensorF& shade, TensorF& img) {
  const PatchGrid grid = PatchGrid::for_image(s);
  const std::size_t plane = s * s;
  const float ct = std::cos(id.moire_theta), st = std::sin(id.moire_theta);
  for (std::size_t k = 0; k < 9; ++k) {
    auto [r0, c0] = grid.offset(k);
    const std::size_t r1 = r0 + grid.patch_size, c1 = c0 + grid.patch_size;
    if (cues.moire[k]) {
      for (std::size_t i = r0; i < r1; ++i)
        for (std::size_t j = c0; j < c1; ++j) {
          const float phase = 2.0f * static_cast<float>(kPi) *
                              cues.moire_frequency *
                              (ct * static_cast<float>(i) +
                               st * static_cast<float>(j));
          const float v = cues.moire_amplitude * std::sin(phase);
          for (int c = 0; c < 3; ++c)
            img.data()[c * plane + i * s + j] += v;
        }
    }
    if (cues.contrast[k]) {
      for (int c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (std::size_t i = r0; i < r1; ++i)
          for (std::size_t j = c0; j < c1; ++j)
            mean += img.data()[c * plane + i * s + j];
        mean /= static_cast<double>((r1 - r0) * (c1 - c0));
        const float mu = static_cast<float>(mean);
        for (std::size_t i = r0; i < r1; ++i)
          for (std::size_t j = c0; j < c1; ++j) {
            float& px = img.data()[c * plane + i * s + j];
            px = mu + cues.contrast_factor * (px - mu);
          }
      }
    }
    if (cues.shadow[k]) {
      for (std::size_t i = r0; i < r1; ++i)
        for (std::size_t j = c0; j < c1; ++j) {
          const float v = -cues.shadow_removal * shade[i * s + j];
          for (int c = 0; c < 3; ++c)
            img.data()[c * plane + i * s + j] += v;
        }
    }
  }
}

void check_even(int n, const char* what) {
  if (n < 0 || n % 2 != 0)
    throw ConfigError(std::string(what) +
                      " video count must be even and non-negative (pairs of "
                      "real/attack videos)");
}

}  // namespace

CueProfile CueProfile::standard() {
  CueProfile p;
  p.shadow = {true, false, true, false, false, false, true, false, true};
  p.moire = {false, true, false, false, true, false, false, true, false};
  p.contrast = {false, false, false, true, false, true, false, false, false};
  return p;
}

CueProfile CueProfile::center_only() {
  CueProfile p;
  p.moire[4] = true;
  p.contrast[4] = true;
  return p;
}

Dataset synth_generate(const SynthConfig& cfg) {
  check_even(cfg.train_videos, "train");
  check_even(cfg.val_videos, "validation");
  check_even(cfg.test_videos, "test");
  const int total = cfg.train_videos + cfg.val_videos + cfg.test_videos;
  if (total < 2) throw ConfigError("need at least one video pair");
  if (cfg.frames_per_video < 1)
    throw ConfigError("frames_per_video must be >= 1");
  if (cfg.image_size < 3) throw ConfigError("image_size must be >= 3");

  const std::size_t s = static_cast<std::size_t>(cfg.image_size);
  const int pairs = total / 2;
  const int train_pairs = cfg.train_videos / 2;
  const int val_pairs = cfg.val_videos / 2;

  Rng root(cfg.seed);
  Dataset ds;
  ds.samples.reserve(static_cast<std::size_t>(total) * cfg.frames_per_video);
  for (int p = 0; p < pairs; ++p) {
    Rng pair_rng = root.child(static_cast<std::uint64_t>(p));
    Identity id = draw_identity(pair_rng);
    const Split split = p < train_pairs ? Split::kTrain
                        : p < train_pairs + val_pairs ? Split::kValidation
                                                      : Split::kTest;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "v%03d", p);
    const std::string real_id = std::string(idbuf) + "_real";
    const std::string attack_id = std::string(idbuf) + "_attack";

    for (int f = 0; f < cfg.frames_per_video; ++f) {
      Rng frame_rng = pair_rng.child(0x100 + static_cast<std::uint64_t>(f));
      TensorF base, shade;
      draw_face(id, frame_rng, s, base, shade);

      TensorF real(base.shape());
      const std::size_t plane = s * s;
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < plane; ++i)
          real[c * plane + i] = base[c * plane + i] + shade[i];

      TensorF attack = real;
      apply_cues(cfg.cues, id, s, shade, attack);
      quantize(real);
      quantize(attack);

      ds.samples.push_back(
          {std::move(real), Label::kReal, real_id, f, split});
      ds.samples.push_back(
          {std::move(attack), Label::kAttack, attack_id, f, split});
    }
  }
  return ds;
}

Dataset synth_generate(int n_videos, int frames_per_video,
                       const CueProfile& cues, std::uint64_t seed) {
  if (n_videos < 2) throw ConfigError("n_videos must be >= 2");
  if (n_videos % 2 != 0) throw ConfigError("n_videos must be even (pairs)");
  SynthConfig cfg;
  cfg.val_videos = (n_videos / 5) & ~1;
  cfg.test_videos = cfg.val_videos;
  cfg.train_videos = n_videos - cfg.val_videos - cfg.test_videos;
  cfg.frames_per_video = frames_per_video;
  cfg.cues = cues;
  cfg.seed = seed;
  return synth_generate(cfg);
}

void write_dataset_png(const Dataset& ds, const std::filesystem::path& dir) {
  std::vector<ManifestEntry> entries;
  std::map<std::string, bool> seen;
  for (const Sample& smp : ds.samples) {
    const std::string split = to_string(smp.split);
    const std::filesystem::path vdir = dir / split / smp.video_id;
    std::filesystem::create_directories(vdir);
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d.png", smp.frame_index);
    write_png(vdir / name, tensor_to_image(smp.image));
    if (!seen[smp.video_id]) {
      seen[smp.video_id] = true;
      entries.push_back({split + "/" + smp.video_id + "/*.png", smp.label,
                         smp.split, smp.video_id});
    }
  }
  write_manifest(dir / "manifest.json", entries);
}

}  // namespace lscnn
