// Command-line pipeline driver: synthetic data generation, the two training
// phases, block composition, and evaluation. All numeric knobs live in a
// JSON config; flags only select paths and overrides.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "lscnn/checkpoint.hpp"
#include "lscnn/log.hpp"
#include "lscnn/metrics.hpp"
#include "lscnn/synth.hpp"
#include "lscnn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lscnn;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitFormat = 5;

void reject_unknown(const json& obj, std::initializer_list<const char*> keys,
                    const std::string& where) {
  if (!obj.is_object())
    throw ConfigError("config section '" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known)
      throw ConfigError("unknown config key '" + where + "." + it.key() + "'");
  }
}

struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  fs::path out_dir;
  std::string architecture = "lscnn";  // lscnn | shallow
  fs::path dataset_root;
  fs::path manifest = "manifest.json";
  SynthConfig synth;
  std::string cue_profile = "standard";
  TrainConfig train;
  json raw;  // canonical form actually used, for the run summary digest

  ArchitectureSpec whole_spec() const {
    ArchitectureSpec s = architecture == "shallow"
                             ? shallow_spec(false, train.dropout_rate)
                             : lscnn_spec(train.dropout_rate);
    s.bn_epsilon = train.bn_epsilon;
    s.bn_ema = train.bn_ema;
    return s;
  }
  ArchitectureSpec patch_spec() const {
    ArchitectureSpec s = architecture == "shallow"
                             ? shallow_spec(true, train.dropout_rate)
                             : patchnet_spec(train.dropout_rate);
    s.bn_epsilon = train.bn_epsilon;
    s.bn_ema = train.bn_ema;
    return s;
  }
};

template <typename T>
T take(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  reject_unknown(doc, {"seed", "threads", "out_dir", "architecture", "dataset",
                       "synth", "train", "augment"},
                 "config");

  RunConfig c;
  c.seed = take<std::uint64_t>(doc, "seed", 1);
  c.threads = take<int>(doc, "threads", 1);
  c.out_dir = take<std::string>(doc, "out_dir", "");
  c.architecture = take<std::string>(doc, "architecture", "lscnn");
  if (c.architecture != "lscnn" && c.architecture != "shallow")
    throw ConfigError("architecture must be 'lscnn' or 'shallow'");

  if (doc.contains("dataset")) {
    const json& d = doc["dataset"];
    reject_unknown(d, {"root", "manifest"}, "dataset");
    c.dataset_root = take<std::string>(d, "root", "");
    c.manifest = take<std::string>(d, "manifest", "manifest.json");
  }

  if (doc.contains("synth")) {
    const json& s = doc["synth"];
    reject_unknown(s,
                   {"train_videos", "val_videos", "test_videos",
                    "frames_per_video", "image_size", "cue_profile", "seed"},
                   "synth");
    c.synth.train_videos = take<int>(s, "train_videos", 12);
    c.synth.val_videos = take<int>(s, "val_videos", 4);
    c.synth.test_videos = take<int>(s, "test_videos", 4);
    c.synth.frames_per_video = take<int>(s, "frames_per_video", 10);
    c.synth.image_size = take<int>(s, "image_size", 96);
    c.cue_profile = take<std::string>(s, "cue_profile", "standard");
    c.synth.seed = take<std::uint64_t>(s, "seed", c.seed);
  } else {
    c.synth.seed = c.seed;
  }
  if (c.cue_profile == "standard")
    c.synth.cues = CueProfile::standard();
  else if (c.cue_profile == "center")
    c.synth.cues = CueProfile::center_only();
  else
    throw ConfigError("synth.cue_profile must be 'standard' or 'center'");

  if (doc.contains("train")) {
    const json& t = doc["train"];
    reject_unknown(t,
                   {"batch_size", "lr", "beta1", "beta2", "adam_epsilon",
                    "patchnet_iters", "finetune_iters", "eval_every",
                    "augment", "dropout_rate", "bn_epsilon", "bn_ema",
                    "init_std", "compose_fc_std", "val_holdout_fraction"},
                   "train");
    TrainConfig& tc = c.train;
    tc.batch_size = take<int>(t, "batch_size", tc.batch_size);
    tc.adam.lr = take<double>(t, "lr", tc.adam.lr);
    tc.adam.beta1 = take<double>(t, "beta1", tc.adam.beta1);
    tc.adam.beta2 = take<double>(t, "beta2", tc.adam.beta2);
    tc.adam.epsilon = take<double>(t, "adam_epsilon", tc.adam.epsilon);
    tc.patchnet_iters = take<int>(t, "patchnet_iters", tc.patchnet_iters);
    tc.finetune_iters = take<int>(t, "finetune_iters", tc.finetune_iters);
    tc.eval_every = take<int>(t, "eval_every", tc.eval_every);
    tc.augment = take<bool>(t, "augment", tc.augment);
    tc.dropout_rate = take<double>(t, "dropout_rate", tc.dropout_rate);
    tc.bn_epsilon = take<double>(t, "bn_epsilon", tc.bn_epsilon);
    tc.bn_ema = take<double>(t, "bn_ema", tc.bn_ema);
    tc.init_std = take<double>(t, "init_std", tc.init_std);
    tc.compose_fc_std = take<double>(t, "compose_fc_std", tc.compose_fc_std);
    tc.val_holdout_fraction =
        take<double>(t, "val_holdout_fraction", tc.val_holdout_fraction);
  }

  if (doc.contains("augment")) {
    const json& a = doc["augment"];
    reject_unknown(
        a, {"channel_shift", "blur_sigmas", "noise_sigmas",
            "emit_bare_brightness"},
        "augment");
    AugmentConfig& ac = c.train.augment_cfg;
    ac.channel_shift = take<float>(a, "channel_shift", ac.channel_shift);
    if (a.contains("blur_sigmas")) {
      auto v = a["blur_sigmas"].get<std::vector<float>>();
      if (v.size() != 3) throw ConfigError("augment.blur_sigmas needs 3 values");
      std::copy(v.begin(), v.end(), ac.blur_sigmas.begin());
    }
    if (a.contains("noise_sigmas")) {
      auto v = a["noise_sigmas"].get<std::vector<float>>();
      if (v.size() != 3)
        throw ConfigError("augment.noise_sigmas needs 3 values");
      std::copy(v.begin(), v.end(), ac.noise_sigmas.begin());
    }
    ac.emit_bare_brightness =
        take<bool>(a, "emit_bare_brightness", ac.emit_bare_brightness);
  }

  c.raw = doc;
  return c;
}

// Effective-config digest: the parsed document with overrides applied,
// re-serialized with sorted keys.
std::string config_digest(const RunConfig& c) {
  json doc = c.raw;
  doc["seed"] = c.seed;
  doc["threads"] = c.threads;
  doc["out_dir"] = c.out_dir.string();
  return sha256_hex(doc.dump());
}

void ensure_out_dir(const fs::path& out, bool force) {
  if (fs::exists(out)) {
    if (!fs::is_directory(out))
      throw ConfigError(out.string() + " exists and is not a directory");
    if (!fs::is_empty(out) && !force)
      throw ConfigError("output directory " + out.string() +
                        " is not empty (use --force to reuse it)");
  } else {
    fs::create_directories(out);
  }
}

Dataset load_dataset(const RunConfig& cfg, const ArchitectureSpec& spec) {
  if (cfg.dataset_root.empty())
    throw ConfigError("config has no dataset.root");
  std::vector<std::string> errors;
  Dataset ds = load_folder(cfg.dataset_root, cfg.dataset_root / cfg.manifest,
                           spec.input_channels, spec.input_size, &errors);
  for (const std::string& e : errors) log::warn("load: ", e);
  return ds;
}

void write_summary(const fs::path& out, const std::string& command,
                   const RunConfig& cfg, const json& extra,
                   double elapsed_sec) {
  json doc;
  doc["command"] = command;
  doc["config_digest"] = config_digest(cfg);
  doc["seed"] = cfg.seed;
  doc["elapsed_sec"] = elapsed_sec;
  doc["results"] = extra;
  std::ofstream f(out / ("summary_" + command + ".json"));
  if (!f) throw DataError("cannot write run summary in " + out.string());
  f << doc.dump(2) << "\n";
}

fs::path patchnet_path(const fs::path& dir, int k) {
  return dir / ("patchnet_" + std::to_string(k + 1) + ".ckpt");
}

int cmd_gen_synth(const RunConfig& cfg, bool force) {
  const auto t0 = std::chrono::steady_clock::now();
  ensure_out_dir(cfg.out_dir, force);
  Dataset ds = synth_generate(cfg.synth);
  write_dataset_png(ds, cfg.out_dir);

  std::map<std::string, std::map<std::string, int>> counts;
  for (const Sample& s : ds.samples)
    counts[to_string(s.split)][to_string(s.label)] += 1;
  json summary;
  for (auto& [split, by_label] : counts)
    for (auto& [label, n] : by_label) summary[split][label] = n;
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  write_summary(cfg.out_dir, "gen-synth", cfg, summary, secs);
  std::cout << "dataset written to " << cfg.out_dir << "\n"
            << summary.dump(2) << "\n";
  return 0;
}

int cmd_train_patchnets(const RunConfig& cfg, bool force) {
  const auto t0 = std::chrono::steady_clock::now();
  ensure_out_dir(cfg.out_dir, force);
  const ArchitectureSpec whole = cfg.whole_spec();
  const ArchitectureSpec patch = cfg.patch_spec();
  Dataset ds = load_dataset(cfg, whole);
  const PatchGrid grid =
      PatchGrid::for_image(static_cast<std::size_t>(whole.input_size));

  std::array<std::vector<HistoryRow>, 9> histories;
  std::array<Checkpoint, 9> ckpts =
      train_patchnets(ds, grid, cfg.train, patch, &histories);
  json files = json::array();
  for (int k = 0; k < 9; ++k) {
    save_checkpoint(ckpts[k], patchnet_path(cfg.out_dir, k));
    write_history_csv(histories[k],
                      cfg.out_dir / ("patchnet_" + std::to_string(k + 1) +
                                     "_history.csv"));
    files.push_back(patchnet_path(cfg.out_dir, k).string());
  }
  json extra;
  extra["checkpoints"] = files;
  extra["iterations"] = cfg.train.patchnet_iters;
  json final_losses = json::array();
  for (int k = 0; k < 9; ++k)
    final_losses.push_back(histories[k].back().train_loss);
  extra["final_train_loss"] = final_losses;
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  write_summary(cfg.out_dir, "train-patchnets", cfg, extra, secs);
  std::cout << "trained 9 patch networks (" << cfg.train.patchnet_iters
            << " iterations each)\n";
  return 0;
}

int cmd_compose(const RunConfig& cfg, const fs::path& in_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(cfg.out_dir);
  const ArchitectureSpec whole = cfg.whole_spec();
  const ArchitectureSpec patch = cfg.patch_spec();
  const fs::path src = in_dir.empty() ? cfg.out_dir : in_dir;

  std::vector<std::string> missing;
  for (int k = 0; k < 9; ++k)
    if (!fs::exists(patchnet_path(src, k)))
      missing.push_back("p" + std::to_string(k + 1));
  if (!missing.empty()) {
    std::string list;
    for (const std::string& m : missing)
      list += (list.empty() ? "" : ", ") + m;
    throw DataError("missing PatchNet checkpoints: " + list);
  }

  std::array<ModelParams<float>, 9> nets;
  for (int k = 0; k < 9; ++k)
    nets[k] = load_checkpoint(patchnet_path(src, k), patch).tensors;
  Rng rng = Rng(cfg.seed).child("compose");
  ModelParams<float> composed =
      compose(nets, whole, patch,
              static_cast<float>(cfg.train.compose_fc_std), rng);

  Rng verify_rng = Rng(cfg.seed).child("verify");
  IndependenceReport rep =
      verify_block_independence(composed, whole, patch, verify_rng);
  if (!rep.ok) throw NumericError("composition check: " + rep.summary());

  Checkpoint ckpt = make_checkpoint(whole, std::move(composed), 0);
  save_checkpoint(ckpt, cfg.out_dir / "composed.ckpt");
  json extra;
  extra["checkpoint"] = (cfg.out_dir / "composed.ckpt").string();
  extra["block_independence"] = rep.ok;
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  write_summary(cfg.out_dir, "compose", cfg, extra, secs);
  std::cout << "composed checkpoint written; " << rep.summary() << "\n";
  return 0;
}

json run_to_json(const TrainResult& r) {
  json j;
  j["best_iteration"] = r.best_iteration;
  j["best_val_eer"] = r.best_val_eer;
  j["final_train_loss"] = r.history.back().train_loss;
  for (auto it = r.history.rbegin(); it != r.history.rend(); ++it)
    if (it->val_frame_acc) {
      j["last_val_frame_accuracy"] = *it->val_frame_acc;
      break;
    }
  return j;
}

int cmd_finetune(const RunConfig& cfg, const fs::path& init_path) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(cfg.out_dir);
  const ArchitectureSpec whole = cfg.whole_spec();
  const fs::path init =
      init_path.empty() ? cfg.out_dir / "composed.ckpt" : init_path;
  Checkpoint start = load_checkpoint(init, whole);
  Dataset ds = load_dataset(cfg, whole);

  TrainResult r = finetune(start.tensors, whole, ds, cfg.train);
  save_checkpoint(r.best, cfg.out_dir / "finetune_best.ckpt");
  write_history_csv(r.history, cfg.out_dir / "finetune_history.csv");
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  write_summary(cfg.out_dir, "finetune", cfg, run_to_json(r), secs);
  std::cout << "finetune complete: best iteration " << r.best_iteration
            << ", validation EER " << r.best_val_eer << "\n";
  return 0;
}

int cmd_train_baseline(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(cfg.out_dir);
  const ArchitectureSpec whole = cfg.whole_spec();
  Dataset ds = load_dataset(cfg, whole);

  TrainResult r = train_baseline(whole, ds, cfg.train);
  save_checkpoint(r.best, cfg.out_dir / "baseline_best.ckpt");
  write_history_csv(r.history, cfg.out_dir / "baseline_history.csv");
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  write_summary(cfg.out_dir, "train-baseline", cfg, run_to_json(r), secs);
  std::cout << "baseline complete: best iteration " << r.best_iteration
            << ", validation EER " << r.best_val_eer << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const fs::path& ckpt_path,
             const std::string& split_name, std::optional<double> threshold) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(cfg.out_dir);
  const ArchitectureSpec whole = cfg.whole_spec();
  const Split split = split_from_string(split_name);
  Checkpoint ckpt = load_checkpoint(ckpt_path, whole);

  Model<float> model(whole);
  model.set_params(ckpt.tensors);
  Dataset ds = load_dataset(cfg, whole);

  // Threshold calibration statistics come from the training split.
  DataPlan plan = plan_data(ds, cfg.train);
  EvalReport rep = evaluate(model, ds, split, plan.stats, threshold,
                            cfg.train.batch_size);
  write_report_json(rep, cfg.out_dir / ("eval_" + split_name + ".json"));
  write_roc_csv(rep.roc, cfg.out_dir / ("roc_" + split_name + ".csv"));

  json extra;
  extra["split"] = split_name;
  extra["eer"] = rep.roc.eer;
  extra["eer_threshold"] = rep.roc.eer_threshold;
  if (rep.hter_value) extra["hter"] = *rep.hter_value;
  extra["video_vote_accuracy"] = rep.video_vote_accuracy;
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  write_summary(cfg.out_dir, "eval", cfg, extra, secs);

  std::cout << "split " << split_name << ": EER " << rep.roc.eer
            << " at threshold " << rep.roc.eer_threshold;
  if (rep.hter_value)
    std::cout << ", HTER " << *rep.hter_value << " at threshold "
              << *rep.hter_threshold;
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-phase locally specialized CNN for face anti-spoofing"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override, seed_override, threads_override;
  bool force = false;

  app.add_option("--config", config_path, "JSON run configuration")
      ->required();
  app.add_option("--out", out_override, "output directory override");
  app.add_option("--seed", seed_override, "seed override");
  app.add_option("--threads", threads_override, "thread count override");
  app.add_flag("--force", force, "allow writing into a non-empty directory");

  auto* gen = app.add_subcommand("gen-synth", "generate the synthetic dataset");
  auto* tp = app.add_subcommand("train-patchnets",
                                "phase 1: train the nine patch networks");
  auto* comp = app.add_subcommand("compose",
                                  "compose nine patch networks into one model");
  std::string compose_in;
  comp->add_option("--in", compose_in,
                   "directory holding patchnet_[1-9].ckpt (default: --out)");
  auto* ft = app.add_subcommand("finetune", "phase 2: whole-image fine-tuning");
  std::string init_path;
  ft->add_option("--init", init_path,
                 "initial checkpoint (default: <out>/composed.ckpt)");
  auto* bl = app.add_subcommand("train-baseline",
                                "train the same architecture from random init");
  auto* ev = app.add_subcommand("eval", "score a checkpoint on a split");
  std::string ckpt_path, split_name = "validation";
  double threshold = std::numeric_limits<double>::quiet_NaN();
  ev->add_option("--checkpoint", ckpt_path, "checkpoint to evaluate")
      ->required();
  ev->add_option("--split", split_name, "train|validation|test");
  ev->add_option("--threshold", threshold,
                 "decision threshold transferred from validation (enables "
                 "HTER)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    RunConfig cfg = load_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (!seed_override.empty()) cfg.seed = std::stoull(seed_override);
    if (!threads_override.empty()) cfg.threads = std::stoi(threads_override);
    cfg.train.seed = cfg.seed;
    cfg.train.threads = cfg.threads;
    if (cfg.out_dir.empty())
      throw ConfigError("no output directory (config out_dir or --out)");

    if (gen->parsed()) return cmd_gen_synth(cfg, force);
    if (tp->parsed()) return cmd_train_patchnets(cfg, force);
    if (comp->parsed()) return cmd_compose(cfg, compose_in);
    if (ft->parsed()) return cmd_finetune(cfg, init_path);
    if (bl->parsed()) return cmd_train_baseline(cfg);
    if (ev->parsed())
      return cmd_eval(cfg, ckpt_path, split_name,
                      std::isnan(threshold)
                          ? std::nullopt
                          : std::optional<double>(threshold));
    throw ConfigError("no subcommand");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
