#include "lscnn/compose.hpp"

#include <cstring>
#include <sstream>

namespace lscnn {

PatchGrid PatchGrid::for_image(std::size_t image_size, Origin origin) {
  if (image_size < 3)
    throw ShapeError("patch grid needs an image of at least 3x3 pixels");
  return PatchGrid{image_size, image_size / 3, origin};
}

std::pair<std::size_t, std::size_t> PatchGrid::offset(std::size_t k) const {
  if (k >= 9) throw ShapeError("patch index out of range");
  const std::size_t base =
      origin == Origin::kCenter ? (image_size - 3 * patch_size) / 2 : 0;
  return {base + (k / 3) * patch_size, base + (k % 3) * patch_size};
}

std::array<TensorF, 9> split_patches(const TensorF& face,
                                     const PatchGrid& grid) {
  if (face.rank() != 3)
    throw ShapeError("split_patches: expects C x H x W");
  if (face.dim(1) != grid.image_size || face.dim(2) != grid.image_size)
    throw ShapeError("split_patches: face is " + shape_str(face.shape()) +
                     ", grid expects side " +
                     std::to_string(grid.image_size));
  const std::size_t c = face.dim(0), p = grid.patch_size, s = grid.image_size;
  std::array<TensorF, 9> out;
  for (std::size_t k = 0; k < 9; ++k) {
    auto [r0, c0] = grid.offset(k);
    TensorF patch({c, p, p});
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < p; ++i)
        std::memcpy(&patch.at(ch, i, std::size_t(0)),
                    &face.at(ch, r0 + i, c0), p * sizeof(float));
    out[k] = std::move(patch);
  }
  return out;
}

namespace {

struct ConvStage {
  std::string conv_name;  // Conv1, Conv2, ...
  std::string bn_name;    // BN1, BN2, ...
  std::size_t whole_out, whole_in, part_out, part_in, kernel;
  bool first;
};

// Pairs up the conv stages of the two specs and checks the 1:9 width
// relation the block surgery relies on.
std::vector<ConvStage> conv_stages(const ArchitectureSpec& whole,
                                   const ArchitectureSpec& part) {
  validate_spec(whole);
  validate_spec(part);
  std::vector<const LayerDesc*> wc, pc;
  for (const auto& l : whole.layers)
    if (l.kind == LayerKind::kConv) wc.push_back(&l);
  for (const auto& l : part.layers)
    if (l.kind == LayerKind::kConv) pc.push_back(&l);
  if (wc.size() != pc.size())
    throw ShapeError("compose: conv stage counts differ (" +
                     std::to_string(wc.size()) + " vs " +
                     std::to_string(pc.size()) + ")");
  if (whole.input_channels != part.input_channels)
    throw ShapeError("compose: input channel counts differ");

  std::vector<ConvStage> stages;
  std::size_t w_in = static_cast<std::size_t>(whole.input_channels);
  std::size_t p_in = static_cast<std::size_t>(part.input_channels);
  for (std::size_t i = 0; i < wc.size(); ++i) {
    if (wc[i]->kernel != pc[i]->kernel || wc[i]->stride != pc[i]->stride)
      throw ShapeError("compose: conv stage " + std::to_string(i + 1) +
                       " kernel/stride differ");
    if (wc[i]->out_channels != 9 * pc[i]->out_channels)
      throw ShapeError("compose: conv stage " + std::to_string(i + 1) +
                       " width " + std::to_string(wc[i]->out_channels) +
                       " is not 9x the part width " +
                       std::to_string(pc[i]->out_channels));
    if (i > 0 && w_in != 9 * p_in)
      throw ShapeError("compose: conv stage " + std::to_string(i + 1) +
                       " input widths are not in a 1:9 ratio");
    stages.push_back({"Conv" + std::to_string(i + 1),
                      "BN" + std::to_string(i + 1),
                      static_cast<std::size_t>(wc[i]->out_channels), w_in,
                      static_cast<std::size_t>(pc[i]->out_channels), p_in,
                      static_cast<std::size_t>(wc[i]->kernel), i == 0});
    w_in = static_cast<std::size_t>(wc[i]->out_channels);
    p_in = static_cast<std::size_t>(pc[i]->out_channels);
  }
  return stages;
}

const TensorF& get_tensor(const ModelParams<float>& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw ShapeError("compose: missing tensor " + name);
  return it->second;
}

}  // namespace

BlockMap block_map(const ArchitectureSpec& whole, const ArchitectureSpec& part) {
  BlockMap map;
  for (const ConvStage& st : conv_stages(whole, part)) {
    std::array<BlockRange, 9> blocks;
    for (std::size_t k = 0; k < 9; ++k) {
      blocks[k].out_lo = k * st.part_out;
      blocks[k].out_hi = (k + 1) * st.part_out;
      if (st.first) {
        blocks[k].in_lo = 0;
        blocks[k].in_hi = st.whole_in;
      } else {
        blocks[k].in_lo = k * st.part_in;
        blocks[k].in_hi = (k + 1) * st.part_in;
      }
    }
    map.conv.push_back(blocks);
  }
  return map;
}

ModelParams<float> compose(const std::array<ModelParams<float>, 9>& nets,
                           const ArchitectureSpec& whole,
                           const ArchitectureSpec& part, float fc_std,
                           Rng& rng) {
  if (fc_std <= 0.0f)
    throw ConfigError("compose: fc_std must be positive");
  const std::vector<ConvStage> stages = conv_stages(whole, part);

  Model<float> model(whole);  // zero weights, identity batchnorm
  ModelParams<float> out = model.params();

  for (const ConvStage& st : stages) {
    TensorF& w = out.at(st.conv_name + ".weight");
    TensorF& b = out.at(st.conv_name + ".bias");
    const std::size_t k2 = st.kernel * st.kernel;
    for (std::size_t blk = 0; blk < 9; ++blk) {
      const ModelParams<float>& net = nets[blk];
      const TensorF& pw = get_tensor(net, st.conv_name + ".weight");
      const TensorF& pb = get_tensor(net, st.conv_name + ".bias");
      if (pw.shape() != Shape{st.part_out, st.part_in, st.kernel, st.kernel})
        throw ShapeError("compose: net " + std::to_string(blk + 1) + " " +
                         st.conv_name + ".weight has shape " +
                         shape_str(pw.shape()));
      for (std::size_t oc = 0; oc < st.part_out; ++oc) {
        const std::size_t wo = blk * st.part_out + oc;
        const std::size_t in_base = st.first ? 0 : blk * st.part_in;
        for (std::size_t ic = 0; ic < st.part_in; ++ic)
          std::memcpy(&w[((wo * st.whole_in) + in_base + ic) * k2],
                      &pw[(oc * st.part_in + ic) * k2], k2 * sizeof(float));
        b[wo] = pb[oc];
      }
      for (const char* field :
           {".gamma", ".beta", ".running_mean", ".running_var"}) {
        TensorF& dst = out.at(st.bn_name + field);
        const TensorF& src = get_tensor(net, st.bn_name + field);
        for (std::size_t oc = 0; oc < st.part_out; ++oc)
          dst[blk * st.part_out + oc] = src[oc];
      }
    }
  }

  // Fully connected top: fresh random weights, zero biases; its batchnorm
  // stays at identity from the freshly built model.
  for (const std::string fc_name : {std::string("FC1"), std::string("Softmax")}) {
    auto it = out.find(fc_name + ".weight");
    if (it == out.end()) continue;
    it->second = TensorF::normal(it->second.shape(), 0.0f, fc_std, rng);
    out.at(fc_name + ".bias") = TensorF(out.at(fc_name + ".bias").shape());
  }
  return out;
}

std::string IndependenceReport::summary() const {
  std::ostringstream os;
  os << (ok ? "block independence holds" : "block independence VIOLATED");
  for (std::size_t k = 0; k < 9; ++k)
    if (!blocks[k].ok)
      os << "\n  block " << (k + 1)
         << ": max |diff| = " << blocks[k].max_abs_diff;
  return os.str();
}

IndependenceReport verify_block_independence(
    const ModelParams<float>& composed, const ArchitectureSpec& whole,
    const ArchitectureSpec& part, Rng& rng, int trials) {
  const std::vector<ConvStage> stages = conv_stages(whole, part);

  Model<float> model(whole);
  model.set_params(composed);

  // Output of the final pool stage carries the per-block feature streams.
  std::size_t last_pool = 0;
  bool found = false;
  const auto& descs = model.op_descs();
  for (std::size_t i = 0; i < descs.size(); ++i)
    if (descs[i].kind == OpKind::kPool) {
      last_pool = i;
      found = true;
    }
  if (!found) throw StateError("verify_block_independence: no pool op");
  const std::size_t c_last = stages.back().whole_out;
  const std::size_t blk_c = stages.back().part_out;

  IndependenceReport report;
  for (auto& b : report.blocks) {
    b.ok = true;
    b.max_abs_diff = 0.0f;
  }

  Rng noise = rng.child("perturb");
  for (int trial = 0; trial < trials; ++trial) {
    Rng in_rng = rng.child(0x1000 + static_cast<std::uint64_t>(trial));
    const TensorF input = TensorF::normal(
        {1, static_cast<std::size_t>(whole.input_channels),
         static_cast<std::size_t>(whole.input_size),
         static_cast<std::size_t>(whole.input_size)},
        0.0f, 1.0f, in_rng);
    Rng fwd(7);
    const TensorF base =
        model.forward_collect(input, Mode::kInfer, fwd)[last_pool];

    for (std::size_t k = 0; k < 9; ++k) {
      ModelParams<float> perturbed = composed;
      for (const ConvStage& st : stages) {
        TensorF& w = perturbed.at(st.conv_name + ".weight");
        TensorF& b = perturbed.at(st.conv_name + ".bias");
        TensorF& gamma = perturbed.at(st.bn_name + ".gamma");
        TensorF& beta = perturbed.at(st.bn_name + ".beta");
        TensorF& rm = perturbed.at(st.bn_name + ".running_mean");
        TensorF& rv = perturbed.at(st.bn_name + ".running_var");
        const std::size_t row = st.whole_in * st.kernel * st.kernel;
        for (std::size_t blk = 0; blk < 9; ++blk) {
          if (blk == k) continue;
          for (std::size_t oc = blk * st.part_out; oc < (blk + 1) * st.part_out;
               ++oc) {
            for (std::size_t i = 0; i < row; ++i)
              w[oc * row + i] +=
                  static_cast<float>(noise.normal(0.0, 0.5));
            b[oc] += static_cast<float>(noise.normal(0.0, 0.5));
            gamma[oc] += static_cast<float>(noise.normal(0.0, 0.25));
            beta[oc] += static_cast<float>(noise.normal(0.0, 0.25));
            rm[oc] += static_cast<float>(noise.normal(0.0, 0.25));
            rv[oc] *= 1.0f + std::abs(static_cast<float>(noise.normal(0.0, 0.25)));
          }
        }
      }
      Model<float> pm(whole);
      pm.set_params(perturbed);
      Rng fwd2(7);
      const TensorF got =
          pm.forward_collect(input, Mode::kInfer, fwd2)[last_pool];

      const std::size_t plane = base.dim(2) * base.dim(3);
      (void)c_last;
      for (std::size_t oc = k * blk_c; oc < (k + 1) * blk_c; ++oc) {
        for (std::size_t i = 0; i < plane; ++i) {
          const float a = base[oc * plane + i];
          const float g = got[oc * plane + i];
          if (std::memcmp(&a, &g, sizeof(float)) != 0) {
            report.blocks[k].ok = false;
            report.blocks[k].max_abs_diff =
                std::max(report.blocks[k].max_abs_diff, std::abs(a - g));
          }
        }
      }
    }
  }
  report.ok = true;
  for (const auto& b : report.blocks) report.ok = report.ok && b.ok;
  return report;
}

}  // namespace lscnn
