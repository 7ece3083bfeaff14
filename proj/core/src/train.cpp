#include "lscnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <set>

#include "lscnn/log.hpp"

namespace lscnn {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patchnet_iters < 1)
    throw ConfigError("patchnet_iters must be >= 1 (the local phase trains)");
  if (finetune_iters < 1) throw ConfigError("finetune_iters must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (init_std <= 0.0) throw ConfigError("init_std must be > 0");
  if (compose_fc_std <= 0.0) throw ConfigError("compose_fc_std must be > 0");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ConfigError("dropout_rate must be in [0, 1)");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (val_holdout_fraction <= 0.0 || val_holdout_fraction >= 1.0)
    throw ConfigError("val_holdout_fraction must be in (0, 1)");
}

DataPlan plan_data(const Dataset& ds, const TrainConfig& cfg) {
  DataPlan plan;
  plan.train = ds.split_indices(Split::kTrain);
  plan.validation = ds.split_indices(Split::kValidation);
  if (plan.train.empty()) throw DataError("training split is empty");

  if (plan.validation.empty()) {
    // Hold out a seeded fraction of training videos (whole videos, never
    // frames) as validation.
    auto vids = ds.videos(Split::kTrain);
    std::vector<std::string> ids;
    for (const auto& [id, idx] : vids) ids.push_back(id);
    if (ids.size() < 2)
      throw DataError(
          "no validation split and too few training videos to hold one out");
    Rng rng = Rng(cfg.seed).child("val-holdout");
    for (std::size_t i = ids.size(); i > 1; --i)
      std::swap(ids[i - 1], ids[rng.uniform_index(i)]);
    const std::size_t n_hold = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::ceil(cfg.val_holdout_fraction *
                         static_cast<double>(ids.size()))));
    std::set<std::string> held(ids.begin(),
                               ids.begin() + static_cast<std::ptrdiff_t>(
                                                 std::min(n_hold, ids.size() - 1)));
    std::vector<std::size_t> train, val;
    for (std::size_t i : plan.train)
      (held.count(ds.samples[i].video_id) ? val : train).push_back(i);
    plan.train = std::move(train);
    plan.validation = std::move(val);
    plan.holdout_applied = true;
    log::info("no validation split; held out ", held.size(),
              " training videos for validation");
  }

  // Normalization over the effective training set only.
  const std::size_t c = ds.samples[plan.train[0]].image.dim(0);
  std::vector<double> sum(c, 0.0);
  std::size_t count = 0;
  for (std::size_t i : plan.train) {
    const TensorF& img = ds.samples[i].image;
    const std::size_t plane = img.dim(1) * img.dim(2);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float* p = img.data() + ch * plane;
      for (std::size_t k = 0; k < plane; ++k) sum[ch] += p[k];
    }
    count += img.dim(1) * img.dim(2);
  }
  plan.stats.channel_mean.resize(c);
  for (std::size_t ch = 0; ch < c; ++ch)
    plan.stats.channel_mean[ch] =
        static_cast<float>(sum[ch] / static_cast<double>(count));
  return plan;
}

BatchSampler::BatchSampler(std::size_t base_count, int variants,
                           int batch_size, Rng rng)
    : base_count_(base_count),
      variants_(variants),
      batch_(batch_size),
      rng_(rng) {
  if (base_count == 0) throw DataError("sampler over an empty index set");
  order_.resize(base_count_ * static_cast<std::size_t>(variants_));
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  reshuffle();
}

void BatchSampler::reshuffle() {
  for (std::size_t i = order_.size(); i > 1; --i)
    std::swap(order_[i - 1], order_[rng_.uniform_index(i)]);
  cursor_ = 0;
}

std::vector<std::pair<std::size_t, int>> BatchSampler::next() {
  std::vector<std::pair<std::size_t, int>> out;
  out.reserve(static_cast<std::size_t>(batch_));
  for (int i = 0; i < batch_; ++i) {
    if (cursor_ >= order_.size()) reshuffle();
    const std::size_t flat = order_[cursor_++];
    out.emplace_back(flat / static_cast<std::size_t>(variants_),
                     static_cast<int>(flat % static_cast<std::size_t>(variants_)));
  }
  return out;
}

namespace {

struct LoopConfig {
  const Dataset& ds;
  const DataPlan& plan;
  const TrainConfig& cfg;
  int patch = -1;  // -1: whole image; 0..8: grid region
  PatchGrid grid;
  Rng aug_rng{0};
};

// Normalized (and optionally augmented / patch-cropped) input for one
// training example.
TensorF make_input(const LoopConfig& lc, std::size_t sample_idx, int variant) {
  const Sample& s = lc.ds.samples[sample_idx];
  TensorF raw =
      variant == 0
          ? s.image
          : augment_variant(s.image, variant, lc.cfg.augment_cfg,
                            lc.aug_rng.child(sample_idx));
  TensorF norm = normalize(raw, lc.plan.stats);
  if (lc.patch < 0) return norm;
  return split_patches(norm, lc.grid)[static_cast<std::size_t>(lc.patch)];
}

struct EvalHook {
  Model<float>* model = nullptr;
  const Dataset* ds = nullptr;
  const DataPlan* plan = nullptr;
  int batch_size = 64;

  // Video-level EER plus frame accuracy on the validation indices.
  std::pair<double, double> operator()() const;
};

std::pair<double, double> EvalHook::operator()() const {
  // Scores restricted to the plan's validation indices (which may be a
  // held-out part of the train split).
  const std::size_t c = static_cast<std::size_t>(model->spec().input_channels);
  const std::size_t s = static_cast<std::size_t>(model->spec().input_size);
  const std::vector<std::size_t>& idx = plan->validation;
  if (idx.empty()) throw DataError("validation set is empty");
  std::vector<double> probs(idx.size());
  Rng rng(0);
  for (std::size_t start = 0; start < idx.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t n =
        std::min(idx.size() - start, static_cast<std::size_t>(batch_size));
    TensorF batch({n, c, s, s});
    for (std::size_t i = 0; i < n; ++i) {
      const TensorF norm = normalize(ds->samples[idx[start + i]].image,
                                     plan->stats);
      std::copy(norm.data(), norm.data() + norm.size(),
                batch.data() + i * norm.size());
    }
    TensorF logits = model->forward(batch, Mode::kInfer, rng);
    std::vector<int> dummy(n, 0);
    SoftmaxResult<float> sm = softmax_xent(logits, dummy);
    for (std::size_t i = 0; i < n; ++i)
      probs[start + i] = sm.probs.at(i, std::size_t(0));
  }

  std::map<std::string, std::vector<std::size_t>> vids;
  for (std::size_t i = 0; i < idx.size(); ++i)
    vids[ds->samples[idx[i]].video_id].push_back(i);
  std::vector<ScoredItem> video_items;
  std::size_t frame_hits = 0;
  for (const auto& [id, positions] : vids) {
    double sum = 0.0;
    for (std::size_t p : positions) {
      sum += probs[p];
      const Label decided =
          probs[p] >= 0.5 ? Label::kReal : Label::kAttack;
      if (decided == ds->samples[idx[p]].label) ++frame_hits;
    }
    video_items.push_back({id, sum / static_cast<double>(positions.size()),
                           ds->samples[idx[positions[0]]].label});
  }
  const double eer = roc_eer(video_items).eer;
  const double acc =
      static_cast<double>(frame_hits) / static_cast<double>(idx.size());
  return {eer, acc};
}

TrainResult run_training(Model<float>& model, LoopConfig& lc, int iters,
                         Rng data_rng, Rng dropout_rng, bool do_eval) {
  const TrainConfig& cfg = lc.cfg;
  const int variants = cfg.augment ? cfg.augment_cfg.variant_count() : 1;
  BatchSampler sampler(lc.plan.train.size(), variants, cfg.batch_size,
                       data_rng);

  std::map<std::string, AdamState<float>> opt;
  auto trainables = model.trainable_tensors();
  for (auto& [name, t] : trainables) opt.emplace(name, AdamState<float>(t->shape()));

  EvalHook eval{&model, &lc.ds, &lc.plan, cfg.batch_size};

  const std::size_t cdim = static_cast<std::size_t>(model.spec().input_channels);
  const std::size_t sdim = static_cast<std::size_t>(model.spec().input_size);

  TrainResult result;
  result.history.reserve(static_cast<std::size_t>(iters));
  ModelParams<float> best_params;
  bool have_best = false;

  for (int it = 1; it <= iters; ++it) {
    const auto batch_plan = sampler.next();
    const std::size_t n = batch_plan.size();
    TensorF batch({n, cdim, sdim, sdim});
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t sample_idx = lc.plan.train[batch_plan[i].first];
      TensorF input = make_input(lc, sample_idx, batch_plan[i].second);
      std::copy(input.data(), input.data() + input.size(),
                batch.data() + i * input.size());
      labels[i] = class_index(lc.ds.samples[sample_idx].label);
    }

    ForwardCache<float> cache;
    TensorF logits = model.forward(batch, Mode::kTrain, dropout_rng, &cache);
    SoftmaxResult<float> sm = softmax_xent(logits, labels);
    if (!std::isfinite(sm.loss))
      throw NumericError("training loss is not finite at iteration " +
                         std::to_string(it));
    ModelGrads<float> grads = model.backward(cache, sm.grad_logits);
    for (auto& [name, t] : trainables)
      adam_step(*t, grads.at(name), opt.at(name), cfg.adam);

    HistoryRow row;
    row.iteration = it;
    row.train_loss = sm.loss;
    if (do_eval && it % cfg.eval_every == 0) {
      auto [eer, acc] = eval();
      row.val_eer = eer;
      row.val_frame_acc = acc;
      if (!have_best || eer < result.best_val_eer) {
        have_best = true;
        result.best_val_eer = eer;
        result.best_iteration = it;
        best_params = model.params();
      }
    }
    result.history.push_back(std::move(row));
  }

  if (!have_best) {
    best_params = model.params();
    result.best_iteration = iters;
    result.best_val_eer = std::numeric_limits<double>::quiet_NaN();
  }
  result.best = make_checkpoint(model.spec(), std::move(best_params),
                                result.best_iteration);
  return result;
}

}  // namespace

std::array<Checkpoint, 9> train_patchnets(
    const Dataset& ds, const PatchGrid& grid, const TrainConfig& cfg,
    const ArchitectureSpec& patch_spec,
    std::array<std::vector<HistoryRow>, 9>* histories) {
  cfg.validate();
  validate_spec(patch_spec);
  if (static_cast<std::size_t>(patch_spec.input_size) != grid.patch_size)
    throw ConfigError("patch architecture input size " +
                      std::to_string(patch_spec.input_size) +
                      " does not match grid patch size " +
                      std::to_string(grid.patch_size));
  const DataPlan plan = plan_data(ds, cfg);
  const Rng root(cfg.seed);

  auto train_one = [&](int k) -> std::pair<Checkpoint, std::vector<HistoryRow>> {
    ArchitectureSpec spec = patch_spec;
    spec.bn_epsilon = cfg.bn_epsilon;
    spec.bn_ema = cfg.bn_ema;
    Model<float> model(spec);
    Rng init = root.child("patchnet-init-" + std::to_string(k));
    model.init_params(static_cast<float>(cfg.init_std), init);

    LoopConfig lc{ds, plan, cfg, k, grid,
                  root.child("patchnet-aug-" + std::to_string(k))};
    TrainResult r = run_training(
        model, lc, cfg.patchnet_iters,
        root.child("patchnet-data-" + std::to_string(k)),
        root.child("patchnet-drop-" + std::to_string(k)), /*do_eval=*/false);
    r.best = make_checkpoint(spec, model.params(), cfg.patchnet_iters);
    return {std::move(r.best), std::move(r.history)};
  };

  std::array<Checkpoint, 9> out;
  if (cfg.threads > 1) {
    std::array<std::future<std::pair<Checkpoint, std::vector<HistoryRow>>>, 9>
        futures;
    for (int k = 0; k < 9; ++k)
      futures[k] = std::async(std::launch::async, train_one, k);
    for (int k = 0; k < 9; ++k) {
      auto [ckpt, hist] = futures[k].get();
      out[k] = std::move(ckpt);
      if (histories) (*histories)[k] = std::move(hist);
    }
  } else {
    for (int k = 0; k < 9; ++k) {
      auto [ckpt, hist] = train_one(k);
      out[k] = std::move(ckpt);
      if (histories) (*histories)[k] = std::move(hist);
      log::info("patchnet ", k + 1, "/9 trained (", cfg.patchnet_iters,
                " iterations)");
    }
  }
  return out;
}

TrainResult finetune(const ModelParams<float>& init,
                     const ArchitectureSpec& spec, const Dataset& ds,
                     const TrainConfig& cfg) {
  cfg.validate();
  ArchitectureSpec s = spec;
  s.bn_epsilon = cfg.bn_epsilon;
  s.bn_ema = cfg.bn_ema;
  Model<float> model(s);
  model.set_params(init);
  const DataPlan plan = plan_data(ds, cfg);
  const Rng root(cfg.seed);
  LoopConfig lc{ds, plan, cfg, -1, PatchGrid{}, root.child("aug")};
  return run_training(model, lc, cfg.finetune_iters, root.child("data"),
                      root.child("dropout"), /*do_eval=*/true);
}

TrainResult train_baseline(const ArchitectureSpec& spec, const Dataset& ds,
                           const TrainConfig& cfg) {
  cfg.validate();
  ArchitectureSpec s = spec;
  s.bn_epsilon = cfg.bn_epsilon;
  s.bn_ema = cfg.bn_ema;
  Model<float> model(s);
  Rng init = Rng(cfg.seed).child("init");
  model.init_params(static_cast<float>(cfg.init_std), init);
  const DataPlan plan = plan_data(ds, cfg);
  const Rng root(cfg.seed);
  LoopConfig lc{ds, plan, cfg, -1, PatchGrid{}, root.child("aug")};
  return run_training(model, lc, cfg.finetune_iters, root.child("data"),
                      root.child("dropout"), /*do_eval=*/true);
}

void write_history_csv(const std::vector<HistoryRow>& history,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write history " + path.string());
  out << "iteration,train_loss,val_eer\n";
  for (const HistoryRow& r : history) {
    out << r.iteration << "," << r.train_loss << ",";
    if (r.val_eer) out << *r.val_eer;
    out << "\n";
  }
}

}  // namespace lscnn
