#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lscnn/dataset.hpp"
#include "lscnn/model.hpp"

namespace lscnn {

struct ScoredItem {
  std::string id;
  double score = 0.0;  // real-class probability in [0, 1]
  Label label = Label::kReal;
};

struct RocPoint {
  double threshold = 0.0;
  double far = 0.0;  // attacks accepted: fraction of attack scores >= t
  double frr = 0.0;  // real rejected: fraction of real scores < t
};

struct RocResult {
  std::vector<RocPoint> roc;
  double eer = 0.0;
  double eer_threshold = 0.0;
};

// Sweeps the distinct scores plus sentinels (min-1, max+1, standing in for
// -inf/+inf) and interpolates linearly between adjacent points when FAR and
// FRR cross between them. Throws DataError on single-class input.
RocResult roc_eer(const std::vector<ScoredItem>& items);

// (FAR + FRR) / 2 at the given decision threshold (score >= t accepts).
double hter(const std::vector<ScoredItem>& items, double threshold);

// Majority class; exact tie decides attack. Throws DataError when empty.
Label video_vote(const std::vector<Label>& frame_decisions);

struct VideoScore {
  std::string video_id;
  Label label = Label::kReal;
  double mean_prob = 0.0;  // mean real-class probability over the frames
  Label vote = Label::kReal;
  int frames = 0;
};

struct ScoreResult {
  std::vector<ScoredItem> video_items;  // one per video, score = mean prob
  std::vector<ScoredItem> frame_items;  // one per frame
  std::vector<VideoScore> videos;
  std::vector<std::string> skipped;  // zero-frame videos
  double frame_accuracy = 0.0;       // threshold 0.5
  double video_vote_accuracy = 0.0;
};

// One inference pass over a dataset split; images are normalized with the
// supplied statistics before scoring.
ScoreResult score_videos(Model<float>& model, const Dataset& ds, Split split,
                         const NormalizationStats& stats, int batch_size = 64);

struct EvalReport {
  RocResult roc;
  std::optional<double> hter_value;   // set when a transfer threshold is given
  std::optional<double> hter_threshold;
  std::vector<VideoScore> videos;
  double frame_accuracy = 0.0;
  double video_vote_accuracy = 0.0;
  double frame_eer = 0.0;
};

EvalReport evaluate(Model<float>& model, const Dataset& ds, Split split,
                    const NormalizationStats& stats,
                    std::optional<double> transfer_threshold,
                    int batch_size = 64);

void write_report_json(const EvalReport& report,
                       const std::filesystem::path& path);
void write_roc_csv(const RocResult& roc, const std::filesystem::path& path);

}  // namespace lscnn
