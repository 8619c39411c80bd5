#include "score/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "score/errors.hpp"
#include "score/io.hpp"
#include "score/synth.hpp"

namespace score {

void TrainConfig::validate() const {
  if (steps <= 0) throw ConfigError("train.steps must be > 0");
  if (val_every <= 0) throw ConfigError("train.val_every must be > 0");
  loss.validate();
  adam.validate();
  augment.validate();
  refiner.validate();
  prior.validate();
}

namespace {

Range range_from(const Config& c, const std::string& key, Range fallback) {
  const auto v = c.get_list(key, {fallback.lo, fallback.hi});
  if (v.size() != 2) throw ConfigError(key + ": expected 'lo,hi'");
  return {v[0], v[1]};
}

}  // namespace

TrainConfig train_config_from(const Config& c) {
  TrainConfig t;
  t.steps = c.get("train.steps", t.steps);
  t.val_every = c.get("train.val_every", t.val_every);
  t.seed = c.get("train.seed", t.seed);
  t.train_manifest = c.get("train.train_manifest", std::string());
  t.val_manifest = c.get("train.val_manifest", std::string());
  t.checkpoint = c.get("train.checkpoint", std::string());
  t.multiclass_labels = c.get("train.multiclass_labels", t.multiclass_labels);
  t.use_prior = c.get("train.use_prior", t.use_prior);
  t.morph_augment = c.get("train.morph_augment", t.morph_augment);
  t.crop_to_support = c.get("train.crop_to_support", t.crop_to_support);
  t.log_every = c.get("train.log_every", t.log_every);

  auto& l = t.loss;
  l.lambda_stab = c.get("loss.lambda_stab", l.lambda_stab);
  l.lambda_plus = c.get("loss.lambda_plus", l.lambda_plus);
  l.lambda_minus = c.get("loss.lambda_minus", l.lambda_minus);
  l.eta = c.get("loss.eta", l.eta);
  l.eps = c.get("loss.eps", l.eps);
  l.stab_background = c.get("loss.stab_background", l.stab_background);

  auto& a = t.adam;
  a.lr = c.get("adam.lr", a.lr);
  a.beta1 = c.get("adam.beta1", a.beta1);
  a.beta2 = c.get("adam.beta2", a.beta2);
  a.eps = c.get("adam.eps", a.eps);

  auto& g = t.augment;
  g.blur_sigma = range_from(c, "augment.blur_sigma", g.blur_sigma);
  g.noise_sigma = range_from(c, "augment.noise_sigma", g.noise_sigma);
  g.gamma = range_from(c, "augment.gamma", g.gamma);
  g.p_blur = c.get("augment.p_blur", g.p_blur);
  g.p_noise = c.get("augment.p_noise", g.p_noise);
  g.p_gamma = c.get("augment.p_gamma", g.p_gamma);
  g.rot_deg = c.get("augment.rot_deg", g.rot_deg);
  g.scale = range_from(c, "augment.scale", g.scale);
  g.translate_vox = c.get("augment.translate_vox", g.translate_vox);
  g.flip_lr_prob = c.get("augment.flip_lr_prob", g.flip_lr_prob);
  g.morph_r_max = c.get("augment.morph_r_max", g.morph_r_max);
  g.field_factor = c.get("augment.field_factor", g.field_factor);
  g.morph_prob = c.get("augment.morph_prob", g.morph_prob);
  g.score_step = c.get("augment.score_step", g.score_step);

  auto& r = t.refiner;
  r.regions = std::size_t(c.get("refiner.regions", int(r.regions)));
  if (c.has("refiner.widths")) {
    r.widths.clear();
    for (double w : c.get_list("refiner.widths", {})) r.widths.push_back(int(w));
  }
  r.kernel = c.get("refiner.kernel", r.kernel);
  r.skip = c.get("refiner.skip", r.skip);
  r.skip_eps = c.get("refiner.skip_eps", r.skip_eps);
  r.out_init_scale = c.get("refiner.out_init_scale", r.out_init_scale);

  t.prior.hist_bins = c.get("prior.hist_bins", t.prior.hist_bins);
  t.prior.upper_percentile = c.get("prior.upper_percentile", t.prior.upper_percentile);
  t.validate();
  return t;
}

std::vector<TrainingCase> load_training_set(const std::filesystem::path& manifest) {
  std::vector<TrainingCase> out;
  for (const auto& r : read_manifest(manifest)) {
    TrainingCase c;
    c.case_id = r.case_id;
    c.image = read_volume(resolve_case_path(manifest, r.image));
    c.init_masks = read_masks(resolve_case_path(manifest, r.init_masks));
    c.labels = r.labels;
    require_same_grid(c.image.grid(), c.init_masks.grid(), ("case " + r.case_id).c_str());
    if (auto v = validate(c.labels, c.init_masks.regions()); !v.empty())
      throw LabelError("case " + r.case_id + ": " + v.front());
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ValidationCase> load_validation_set(const std::filesystem::path& manifest) {
  std::vector<ValidationCase> out;
  for (const auto& r : read_manifest(manifest)) {
    if (!r.gt_masks) continue;
    ValidationCase c;
    c.case_id = r.case_id;
    c.image = read_volume(resolve_case_path(manifest, r.image));
    c.init_masks = read_masks(resolve_case_path(manifest, r.init_masks));
    c.reference = read_masks(resolve_case_path(manifest, *r.gt_masks));
    require_same_grid(c.image.grid(), c.init_masks.grid(), ("case " + r.case_id).c_str());
    require_same_grid(c.image.grid(), c.reference.grid(), ("case " + r.case_id).c_str());
    out.push_back(std::move(c));
  }
  return out;
}

ValSelection select_best(const std::vector<std::pair<int, double>>& history) {
  ValSelection s;
  s.history = history;
  for (const auto& [step, score] : history)
    if (s.best_step < 0 || score > s.best_score) {
      s.best_step = step;
      s.best_score = score;
    }
  return s;
}

Volume3 compute_prior(const Volume3& image, const PriorConfig& cfg, bool use_prior) {
  if (!use_prior) return Volume3(image.grid(), 0.f);
  return build_prior(image, cfg).map;
}

WeakLabelSet collapse_mixed_labels(const WeakLabelSet& labels, const RegionMaskSet& init,
                                   const Volume3& prior, int eta) {
  WeakLabelSet out = labels;
  for (auto& r : out) {
    if (r.l != 2) continue;
    const auto& m = init[std::size_t(r.k - 1)];
    const Mask band = mask_and_not(dilate(m, eta), erode(m, eta));
    double missing = 0, spurious = 0;
    for (std::size_t v = 0; v < band.size(); ++v) {
      if (!band[v]) continue;
      if (m[v])
        spurious += 1.0 - prior[v];
      else
        missing += prior[v];
    }
    r.l = missing >= spurious ? -1 : 1;
  }
  return out;
}

std::map<std::string, std::string> model_meta(const PriorConfig& prior, bool use_prior) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", prior.upper_percentile);
  return {{"prior.hist_bins", std::to_string(prior.hist_bins)},
          {"prior.upper_percentile", buf},
          {"model.use_prior", use_prior ? "1" : "0"}};
}

ModelSettings model_settings(const Checkpoint& ckpt) {
  ModelSettings s;
  auto get = [&](const char* k) -> const std::string* {
    auto it = ckpt.meta.find(k);
    return it == ckpt.meta.end() ? nullptr : &it->second;
  };
  try {
    if (auto v = get("prior.hist_bins")) s.prior.hist_bins = std::stoi(*v);
    if (auto v = get("prior.upper_percentile")) s.prior.upper_percentile = std::strtod(v->c_str(), nullptr);
    if (auto v = get("model.use_prior")) s.use_prior = *v == "1";
    s.prior.validate();
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad model settings in checkpoint: ") + e.what());
  }
  return s;
}

namespace {

double mean_dice(const Refiner& net, const std::vector<ValidationCase>& cases,
                 const PriorConfig& prior, bool use_prior) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : cases) {
    const auto p = compute_prior(c.image, prior, use_prior);
    const auto pred = binarize(predict(net, make_refiner_input(c.image, c.init_masks, p)));
    for (std::size_t k = 0; k < pred.regions(); ++k, ++n) sum += dice(pred[k], c.reference[k]);
  }
  return n ? sum / double(n) : 0.0;
}

struct StepSample {
  RefinerInput input;
  RegionMaskSet masks;
  Volume3 prior;
  WeakLabelSet labels;
  std::vector<RegionBands> bands;
};

std::optional<StepSample> prepare_step(const TrainConfig& cfg, const TrainingCase& tc,
                                       Rng& rng) {
  Volume3 img = intensity_augment(tc.image, cfg.augment, rng);
  const Volume3 p0 = compute_prior(img, cfg.prior, cfg.use_prior);
  auto spatial = spatial_augment(img, tc.init_masks, p0, cfg.augment, rng);

  WeakLabelSet labels = tc.labels;
  RegionMaskSet masks = std::move(spatial.masks);
  if (cfg.morph_augment) {
    for (auto& r : labels) {
      const bool fire = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.augment.morph_prob;
      if (!fire || r.l == 0) continue;
      auto& m = masks[std::size_t(r.k - 1)];
      auto res = score::morph_augment(m, r.q, r.l, cfg.augment, rng);
      if (res.mask.empty_set()) continue;
      m = std::move(res.mask);
      r.q = res.q;
    }
  }
  if (!cfg.multiclass_labels)
    labels = collapse_mixed_labels(labels, masks, spatial.prior, cfg.loss.eta);

  StepSample s;
  s.bands = build_bands(masks, labels, cfg.loss.eta, cfg.loss.stab_background);
  s.input = make_refiner_input(spatial.image, masks, spatial.prior);
  s.labels = std::move(labels);

  Box support = bounding_box(masks);
  if (support.empty()) return std::nullopt;
  if (!cfg.crop_to_support) {
    s.masks = std::move(masks);
    s.prior = std::move(spatial.prior);
    return s;
  }
  // Output voxels within eta of a mask carry loss; their values depend on
  // inputs up to the receptive radius further out.
  const int receptive = int(cfg.refiner.widths.size() + 1) * (cfg.refiner.kernel / 2);
  const Grid& g = masks.grid();
  support = expand(support, cfg.loss.eta + receptive, g);
  s.input = crop(s.input, support);
  s.masks = crop(masks, support);
  s.prior = crop(spatial.prior, support);
  for (auto& b : s.bands) {
    b.stab = crop(b.stab, support);
    b.corr = crop(b.corr, support);
  }
  return s;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<TrainingCase>& train_set,
                  const std::vector<ValidationCase>& val_set, const TrainObserver& observer) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  for (const auto& c : train_set)
    if (c.init_masks.regions() != cfg.refiner.regions)
      throw ConfigError("case " + c.case_id + " has a region count the refiner is not configured for");

  Refiner net = make_refiner(cfg.refiner, derive_seed(cfg.seed, 0x1417));
  Rng pick(derive_seed(cfg.seed, 0x5eed));
  std::uniform_int_distribution<std::size_t> which(0, train_set.size() - 1);

  TrainResult res;
  std::vector<std::pair<int, double>> history;
  Refiner best = net;
  double best_score = -1.0;

  for (int step = 1; step <= cfg.steps; ++step) {
    const auto& tc = train_set[which(pick)];
    Rng rng(derive_seed(cfg.seed, 0xa46, std::uint64_t(step)));
    auto sample = prepare_step(cfg, tc, rng);
    if (sample) {
      auto fwd = forward(net, sample->input);
      const auto loss =
          total_loss(fwd.prob, sample->masks, sample->prior, sample->labels, sample->bands, cfg.loss);
      const auto grads = backward(net, fwd.cache, loss.grad);
      try {
        adam_step(net, grads, cfg.adam);
      } catch (const NumericError& e) {
        throw NumericError("step " + std::to_string(step) + " (case " + tc.case_id +
                           ", loss " + std::to_string(loss.total) + "): " + e.what());
      }
      res.loss_history.push_back(loss.total);
      if (observer) observer(step, loss);
      if (cfg.log_every > 0 && step % cfg.log_every == 0)
        std::cerr << "step " << step << " loss " << loss.total << " (stab " << loss.stab
                  << ", plus " << loss.plus << ", minus " << loss.minus << ")\n";
    }
    if (!val_set.empty() && (step % cfg.val_every == 0 || step == cfg.steps)) {
      const double score = mean_dice(net, val_set, cfg.prior, cfg.use_prior);
      history.emplace_back(step, score);
      if (score > best_score) {
        best_score = score;
        best = net;
      }
      if (cfg.log_every > 0)
        std::cerr << "step " << step << " validation dice " << score << "\n";
    }
  }

  if (val_set.empty()) {
    best = net;
    history.clear();
  }
  res.selection = select_best(history);
  if (val_set.empty()) res.selection.best_step = cfg.steps;
  res.checkpoint.net = std::move(best);
  res.checkpoint.meta = model_meta(cfg.prior, cfg.use_prior);
  res.checkpoint.meta["train.best_step"] = std::to_string(res.selection.best_step);
  return res;
}

TrainResult train(const TrainConfig& cfg, const TrainObserver& observer) {
  if (cfg.train_manifest.empty()) throw ConfigError("train.train_manifest is not set");
  const auto train_set = load_training_set(cfg.train_manifest);
  std::vector<ValidationCase> val_set;
  if (!cfg.val_manifest.empty()) val_set = load_validation_set(cfg.val_manifest);
  auto res = train(cfg, train_set, val_set, observer);
  if (!cfg.checkpoint.empty()) save_checkpoint(res.checkpoint, cfg.checkpoint);
  return res;
}

ProbabilityMaps refine_soft(const Checkpoint& ckpt, const Volume3& image,
                            const RegionMaskSet& init) {
  require_same_grid(image.grid(), init.grid(), "refine inputs");
  if (init.regions() != ckpt.net.config.regions)
    throw CheckpointError("checkpoint expects " + std::to_string(ckpt.net.config.regions) +
                          " regions, masks have " + std::to_string(init.regions()));
  const auto settings = model_settings(ckpt);
  const auto p = compute_prior(image, settings.prior, settings.use_prior);
  return predict(ckpt.net, make_refiner_input(image, init, p));
}

RegionMaskSet refine(const Checkpoint& ckpt, const Volume3& image, const RegionMaskSet& init) {
  return binarize(refine_soft(ckpt, image, init), 0.5);
}

std::vector<MetricStats> summarize(const std::vector<EvalRow>& rows, std::size_t regions) {
  std::vector<MetricStats> out(regions);
  auto moments = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = sd = 0.0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= double(v.size());
    if (v.size() < 2) return;
    for (double x : v) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / double(v.size() - 1));
  };
  for (std::size_t k = 0; k < regions; ++k) {
    std::vector<double> d, h;
    for (const auto& r : rows) {
      if (std::size_t(r.region) != k + 1) continue;
      d.push_back(r.metrics.dice);
      if (r.metrics.hd95_mm)
        h.push_back(*r.metrics.hd95_mm);
      else
        ++out[k].hd95_undefined;
    }
    out[k].n = d.size();
    moments(d, out[k].dice_mean, out[k].dice_std);
    moments(h, out[k].hd95_mean, out[k].hd95_std);
  }
  return out;
}

EvalSummary evaluate(const std::vector<ValidationCase>& cases, const Checkpoint& ckpt) {
  EvalSummary s;
  const std::size_t K = ckpt.net.config.regions;
  for (const auto& c : cases) {
    const auto refined = refine(ckpt, c.image, c.init_masks);
    const auto e0 = evaluate_case(c.init_masks, c.reference);
    const auto e1 = evaluate_case(refined, c.reference);
    for (std::size_t k = 0; k < K; ++k) {
      s.initial.push_back({c.case_id, int(k + 1), e0.regions[k]});
      s.refined.push_back({c.case_id, int(k + 1), e1.regions[k]});
    }
    ++s.n;
  }
  s.initial_stats = summarize(s.initial, K);
  s.refined_stats = summarize(s.refined, K);
  return s;
}

void write_eval_csv(const std::vector<EvalRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "case_id,region,dice,hd95_mm,vol_pred_mm3,vol_ref_mm3\n";
  char buf[256];
  for (const auto& r : rows) {
    std::string hd;
    if (r.metrics.hd95_mm) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.metrics.hd95_mm);
      hd = buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", r.metrics.dice);
    out << r.case_id << ',' << r.region << ',' << buf << ',' << hd << ',';
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", r.metrics.vol_pred_mm3, r.metrics.vol_ref_mm3);
    out << buf << '\n';
  }
}

std::string summary_json(const EvalSummary& s) {
  auto stats = [](const std::vector<MetricStats>& v) {
    auto arr = nlohmann::json::array();
    for (std::size_t k = 0; k < v.size(); ++k)
      arr.push_back({{"region", k + 1},
                     {"n", v[k].n},
                     {"dice_mean", v[k].dice_mean},
                     {"dice_std", v[k].dice_std},
                     {"hd95_mean_mm", v[k].hd95_mean},
                     {"hd95_std_mm", v[k].hd95_std},
                     {"hd95_undefined", v[k].hd95_undefined}});
    return arr;
  };
  nlohmann::json j;
  j["n"] = s.n;
  j["skipped_no_gt"] = s.skipped_no_gt;
  j["initial"] = stats(s.initial_stats);
  j["refined"] = stats(s.refined_stats);
  return j.dump(2);
}

EvalSummary evaluate(const std::filesystem::path& manifest, const Checkpoint& ckpt,
                     const std::filesystem::path& out_dir) {
  const auto records = read_manifest(manifest);
  std::size_t skipped = 0;
  for (const auto& r : records)
    if (!r.gt_masks) ++skipped;
  if (skipped) std::cerr << "warning: " << skipped << " case(s) without reference masks skipped\n";
  auto s = evaluate(load_validation_set(manifest), ckpt);
  s.skipped_no_gt = skipped;
  std::filesystem::create_directories(out_dir);
  write_eval_csv(s.initial, out_dir / "initial.csv");
  write_eval_csv(s.refined, out_dir / "refined.csv");
  std::ofstream(out_dir / "summary.json", std::ios::trunc) << summary_json(s) << '\n';
  return s;
}

}  // namespace score
