#include "lscnn/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>

#include "lscnn/log.hpp"

namespace lscnn {

using nlohmann::json;

namespace {

void count_classes(const std::vector<ScoredItem>& items, std::size_t* n_real,
                   std::size_t* n_attack) {
  *n_real = *n_attack = 0;
  for (const ScoredItem& it : items)
    (it.label == Label::kReal ? *n_real : *n_attack) += 1;
  if (*n_real == 0 || *n_attack == 0)
    throw DataError(
        "metric undefined: need at least one item of each class (" +
        std::to_string(*n_real) + " real, " + std::to_string(*n_attack) +
        " attack)");
}

}  // namespace

RocResult roc_eer(const std::vector<ScoredItem>& items) {
  std::size_t n_real = 0, n_attack = 0;
  count_classes(items, &n_real, &n_attack);

  std::vector<double> thresholds;
  thresholds.reserve(items.size() + 2);
  for (const ScoredItem& it : items) thresholds.push_back(it.score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  thresholds.insert(thresholds.begin(), thresholds.front() - 1.0);
  thresholds.push_back(thresholds.back() + 1.0);

  RocResult r;
  r.roc.reserve(thresholds.size());
  for (double t : thresholds) {
    std::size_t fa = 0, fr = 0;
    for (const ScoredItem& it : items) {
      if (it.label == Label::kAttack && it.score >= t) ++fa;
      if (it.label == Label::kReal && it.score < t) ++fr;
    }
    r.roc.push_back({t, static_cast<double>(fa) / n_attack,
                     static_cast<double>(fr) / n_real});
  }

  // FAR - FRR decreases from +1 to -1 across the sweep; find the crossing
  // and interpolate between the flanking points when it is not exact.
  for (std::size_t i = 0; i + 1 < r.roc.size(); ++i) {
    const double d0 = r.roc[i].far - r.roc[i].frr;
    const double d1 = r.roc[i + 1].far - r.roc[i + 1].frr;
    if (d0 == 0.0) {
      r.eer = r.roc[i].far;
      r.eer_threshold = r.roc[i].threshold;
      return r;
    }
    if (d0 > 0.0 && d1 <= 0.0) {
      if (d1 == 0.0) {
        r.eer = r.roc[i + 1].far;
        r.eer_threshold = r.roc[i + 1].threshold;
        return r;
      }
      const double alpha = d0 / (d0 - d1);
      r.eer = r.roc[i].far + alpha * (r.roc[i + 1].far - r.roc[i].far);
      r.eer_threshold = r.roc[i].threshold +
                        alpha * (r.roc[i + 1].threshold - r.roc[i].threshold);
      return r;
    }
  }
  // All points on one side (cannot happen with the sentinels, but keep a
  // defined result).
  r.eer = 0.5;
  r.eer_threshold = thresholds[thresholds.size() / 2];
  return r;
}

double hter(const std::vector<ScoredItem>& items, double threshold) {
  if (!std::isfinite(threshold))
    throw ConfigError("hter: threshold must be finite");
  std::size_t n_real = 0, n_attack = 0;
  count_classes(items, &n_real, &n_attack);
  std::size_t fa = 0, fr = 0;
  for (const ScoredItem& it : items) {
    if (it.label == Label::kAttack && it.score >= threshold) ++fa;
    if (it.label == Label::kReal && it.score < threshold) ++fr;
  }
  return 0.5 * (static_cast<double>(fa) / n_attack +
                static_cast<double>(fr) / n_real);
}

Label video_vote(const std::vector<Label>& frame_decisions) {
  if (frame_decisions.empty())
    throw DataError("video_vote: no decided frames");
  std::size_t real = 0;
  for (Label l : frame_decisions)
    if (l == Label::kReal) ++real;
  const std::size_t attack = frame_decisions.size() - real;
  return real > attack ? Label::kReal : Label::kAttack;  // tie -> attack
}

ScoreResult score_videos(Model<float>& model, const Dataset& ds, Split split,
                         const NormalizationStats& stats, int batch_size) {
  if (batch_size < 1) throw ConfigError("score_videos: batch_size must be >= 1");
  const auto vids = ds.videos(split);
  if (vids.empty())
    throw DataError("score_videos: split '" + to_string(split) + "' is empty");

  // Flatten split frames in video order, score in batches.
  std::vector<std::size_t> order;
  for (const auto& [id, idx] : vids)
    order.insert(order.end(), idx.begin(), idx.end());

  const std::size_t c = static_cast<std::size_t>(model.spec().input_channels);
  const std::size_t s = static_cast<std::size_t>(model.spec().input_size);
  std::vector<double> probs(order.size());
  Rng rng(0);  // unused in infer mode
  for (std::size_t start = 0; start < order.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t n =
        std::min(order.size() - start, static_cast<std::size_t>(batch_size));
    TensorF batch({n, c, s, s});
    for (std::size_t i = 0; i < n; ++i) {
      const TensorF norm = normalize(ds.samples[order[start + i]].image, stats);
      std::copy(norm.data(), norm.data() + norm.size(),
                batch.data() + i * norm.size());
    }
    TensorF logits = model.forward(batch, Mode::kInfer, rng);
    std::vector<int> labels(n, 0);
    SoftmaxResult<float> sm = softmax_xent(logits, labels);
    for (std::size_t i = 0; i < n; ++i)
      probs[start + i] = sm.probs.at(i, std::size_t(0));  // class 0 = real
  }

  ScoreResult out;
  std::map<std::size_t, double> prob_by_sample;
  for (std::size_t i = 0; i < order.size(); ++i)
    prob_by_sample[order[i]] = probs[i];

  std::size_t frame_hits = 0, video_hits = 0;
  for (const auto& [id, idx] : vids) {
    if (idx.empty()) {
      out.skipped.push_back(id);
      log::warn("video ", id, " has no frames; skipped");
      continue;
    }
    VideoScore vs;
    vs.video_id = id;
    vs.label = ds.samples[idx[0]].label;
    vs.frames = static_cast<int>(idx.size());
    std::vector<Label> decisions;
    double sum = 0.0;
    for (std::size_t si : idx) {
      const double p = prob_by_sample[si];
      sum += p;
      const Label decided = p >= 0.5 ? Label::kReal : Label::kAttack;
      decisions.push_back(decided);
      out.frame_items.push_back(
          {id + "#" + std::to_string(ds.samples[si].frame_index), p,
           ds.samples[si].label});
      if (decided == ds.samples[si].label) ++frame_hits;
    }
    vs.mean_prob = sum / static_cast<double>(idx.size());
    vs.vote = video_vote(decisions);
    if (vs.vote == vs.label) ++video_hits;
    out.video_items.push_back({id, vs.mean_prob, vs.label});
    out.videos.push_back(std::move(vs));
  }
  out.frame_accuracy =
      static_cast<double>(frame_hits) / static_cast<double>(order.size());
  out.video_vote_accuracy =
      static_cast<double>(video_hits) / static_cast<double>(out.videos.size());
  return out;
}

EvalReport evaluate(Model<float>& model, const Dataset& ds, Split split,
                    const NormalizationStats& stats,
                    std::optional<double> transfer_threshold, int batch_size) {
  ScoreResult sr = score_videos(model, ds, split, stats, batch_size);
  EvalReport rep;
  rep.roc = roc_eer(sr.video_items);
  rep.frame_eer = roc_eer(sr.frame_items).eer;
  if (transfer_threshold) {
    rep.hter_value = hter(sr.video_items, *transfer_threshold);
    rep.hter_threshold = *transfer_threshold;
  }
  rep.videos = std::move(sr.videos);
  rep.frame_accuracy = sr.frame_accuracy;
  rep.video_vote_accuracy = sr.video_vote_accuracy;
  return rep;
}

void write_report_json(const EvalReport& report,
                       const std::filesystem::path& path) {
  json doc;
  doc["eer"] = report.roc.eer;
  doc["eer_threshold"] = report.roc.eer_threshold;
  if (report.hter_value) {
    doc["hter"] = *report.hter_value;
    doc["hter_threshold"] = *report.hter_threshold;
  }
  doc["frame_eer"] = report.frame_eer;
  doc["frame_accuracy"] = report.frame_accuracy;
  doc["video_vote_accuracy"] = report.video_vote_accuracy;
  doc["roc"] = json::array();
  for (const RocPoint& p : report.roc.roc)
    doc["roc"].push_back(
        {{"threshold", p.threshold}, {"far", p.far}, {"frr", p.frr}});
  doc["videos"] = json::array();
  for (const VideoScore& v : report.videos)
    doc["videos"].push_back({{"video_id", v.video_id},
                             {"label", to_string(v.label)},
                             {"mean_prob", v.mean_prob},
                             {"vote", to_string(v.vote)},
                             {"frames", v.frames}});
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report " + path.string());
  out << doc.dump(2) << "\n";
}

void write_roc_csv(const RocResult& roc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write ROC csv " + path.string());
  out << "threshold,far,frr\n";
  for (const RocPoint& p : roc.roc)
    out << p.threshold << "," << p.far << "," << p.frr << "\n";
}

}  // namespace lscnn
