#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "lscnn/adam.hpp"
#include "lscnn/checkpoint.hpp"
#include "lscnn/compose.hpp"
#include "lscnn/dataset.hpp"
#include "lscnn/metrics.hpp"

namespace lscnn {

struct TrainConfig {
  int batch_size = 64;
  AdamConfig adam;  // lr 1e-4, momenta 0.9 / 0.999
  int patchnet_iters = 5000;
  int finetune_iters = 100000;
  int eval_every = 100;
  std::uint64_t seed = 1;
  bool augment = false;
  AugmentConfig augment_cfg;
  double init_std = 1e-4;
  double compose_fc_std = 0.01;
  double dropout_rate = 0.5;
  double bn_epsilon = 1e-5;
  double bn_ema = 0.99;
  int threads = 1;
  // When the dataset has no validation split, this fraction of training
  // videos (by video, seeded) is held out as validation.
  double val_holdout_fraction = 0.2;

  void validate() const;
};

// One row per iteration; evaluation fields set only at eval points.
struct HistoryRow {
  std::int64_t iteration = 0;
  double train_loss = 0.0;
  std::optional<double> val_eer;
  std::optional<double> val_frame_acc;
};

struct TrainResult {
  Checkpoint best;
  std::vector<HistoryRow> history;
  std::int64_t best_iteration = 0;
  double best_val_eer = 1.0;
};

// Training/validation sample indices after the holdout policy, plus the
// normalization statistics of the effective training set.
struct DataPlan {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  NormalizationStats stats;
  bool holdout_applied = false;
};

DataPlan plan_data(const Dataset& ds, const TrainConfig& cfg);

// Epoch-wise shuffled batches over the (optionally augmentation-expanded)
// index space. Deterministic given the generator seed.
class BatchSampler {
 public:
  BatchSampler(std::size_t base_count, int variants, int batch_size, Rng rng);
  // (base index position, augmentation variant) pairs for the next batch.
  std::vector<std::pair<std::size_t, int>> next();

 private:
  void reshuffle();
  std::size_t base_count_, cursor_ = 0;
  int variants_, batch_;
  Rng rng_;
  std::vector<std::size_t> order_;
};

// Phase 1: nine independent per-patch trainings, one per grid region,
// labels inherited from the whole face. Runs in parallel when
// cfg.threads > 1; results do not depend on the thread count.
std::array<Checkpoint, 9> train_patchnets(
    const Dataset& ds, const PatchGrid& grid, const TrainConfig& cfg,
    const ArchitectureSpec& patch_spec,
    std::array<std::vector<HistoryRow>, 9>* histories = nullptr);

// Phase 2: whole-image training from the given initial parameters, with
// validation-EER model selection every cfg.eval_every iterations.
TrainResult finetune(const ModelParams<float>& init,
                     const ArchitectureSpec& spec, const Dataset& ds,
                     const TrainConfig& cfg);

// Same loop, started from small random initialization.
TrainResult train_baseline(const ArchitectureSpec& spec, const Dataset& ds,
                           const TrainConfig& cfg);

// CSV with columns iteration,train_loss,val_eer (val_eer empty when the
// iteration was not evaluated).
void write_history_csv(const std::vector<HistoryRow>& history,
                       const std::filesystem::path& path);

}  // namespace lscnn
