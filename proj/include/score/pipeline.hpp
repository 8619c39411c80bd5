#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "score/augment.hpp"
#include "score/checkpoint.hpp"
#include "score/config.hpp"
#include "score/metrics.hpp"
#include "score/prior.hpp"
#include "score/refiner.hpp"
#include "score/scoreloss.hpp"
#include "score/weaklabels.hpp"

namespace score {

struct TrainConfig {
  int steps = 3000;
  int val_every = 250;
  std::uint64_t seed = 0;
  LossWeights loss{};
  AdamConfig adam{};
  AugmentConfig augment{};
  RefinerConfig refiner{};
  PriorConfig prior{};
  std::filesystem::path train_manifest;
  std::filesystem::path val_manifest;
  std::filesystem::path checkpoint;

  // Ablation switches.
  bool multiclass_labels = true;
  bool use_prior = true;
  bool morph_augment = true;

  // Restrict each step to the box the loss and its receptive field can see.
  bool crop_to_support = true;
  int log_every = 0;

  void validate() const;  // throws ConfigError
};

TrainConfig train_config_from(const Config& cfg);

// What the training loop is allowed to see of a case: no reference masks.
struct TrainingCase {
  std::string case_id;
  Volume3 image;
  RegionMaskSet init_masks;
  WeakLabelSet labels;
};

// Reference-carrying case used for model selection and evaluation.
struct ValidationCase {
  std::string case_id;
  Volume3 image;
  RegionMaskSet init_masks;
  RegionMaskSet reference;
};

std::vector<TrainingCase> load_training_set(const std::filesystem::path& manifest);
// Cases without reference masks are skipped.
std::vector<ValidationCase> load_validation_set(const std::filesystem::path& manifest);

struct ValSelection {
  int best_step = -1;
  double best_score = 0.0;
  std::vector<std::pair<int, double>> history;
};

// Argmax of the history; ties keep the earliest step.
ValSelection select_best(const std::vector<std::pair<int, double>>& history);

struct TrainResult {
  Checkpoint checkpoint;  // parameters of the selected step
  ValSelection selection;
  std::vector<double> loss_history;
};

using TrainObserver = std::function<void(int step, const LossReport& loss)>;

// Throws ConfigError for empty training sets or bad settings, NumericError
// (with the step index) if the update diverges.
TrainResult train(const TrainConfig& cfg, const std::vector<TrainingCase>& train_set,
                  const std::vector<ValidationCase>& val_set,
                  const TrainObserver& observer = {});
// Loads both manifests and writes cfg.checkpoint when set.
TrainResult train(const TrainConfig& cfg, const TrainObserver& observer = {});

// Boundary prior, or zeros when the prior is switched off.
Volume3 compute_prior(const Volume3& image, const PriorConfig& cfg, bool use_prior);

// Label 2 replaced by the error direction with the larger prior-estimated mass.
WeakLabelSet collapse_mixed_labels(const WeakLabelSet& labels, const RegionMaskSet& init,
                                   const Volume3& prior, int eta);

struct ModelSettings {
  PriorConfig prior;
  bool use_prior = true;
};
ModelSettings model_settings(const Checkpoint& ckpt);
std::map<std::string, std::string> model_meta(const PriorConfig& prior, bool use_prior);

ProbabilityMaps refine_soft(const Checkpoint& ckpt, const Volume3& image,
                            const RegionMaskSet& init);
// Throws CheckpointError if the checkpoint's region count does not match,
// GridError if image and masks disagree.
RegionMaskSet refine(const Checkpoint& ckpt, const Volume3& image, const RegionMaskSet& init);

struct MetricStats {
  double dice_mean = 0.0, dice_std = 0.0;
  double hd95_mean = 0.0, hd95_std = 0.0;
  std::size_t n = 0;
  std::size_t hd95_undefined = 0;
};

struct EvalRow {
  std::string case_id;
  int region = 1;
  RegionEval metrics;
};

struct EvalSummary {
  std::size_t n = 0;
  std::size_t skipped_no_gt = 0;
  std::vector<EvalRow> initial;
  std::vector<EvalRow> refined;
  std::vector<MetricStats> initial_stats;  // per region
  std::vector<MetricStats> refined_stats;
};

std::vector<MetricStats> summarize(const std::vector<EvalRow>& rows, std::size_t regions);
EvalSummary evaluate(const std::vector<ValidationCase>& cases, const Checkpoint& ckpt);
// Writes initial.csv, refined.csv and summary.json into out_dir.
EvalSummary evaluate(const std::filesystem::path& manifest, const Checkpoint& ckpt,
                     const std::filesystem::path& out_dir);

void write_eval_csv(const std::vector<EvalRow>& rows, const std::filesystem::path& path);
std::string summary_json(const EvalSummary& s);

}  // namespace score
