#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "score/checkpoint.hpp"
#include "score/errors.hpp"
#include "score/io.hpp"
#include "score/pipeline.hpp"
#include "score/synth.hpp"

using namespace score;
namespace fs = std::filesystem;

// The training loader carries no reference masks.
template <typename T>
concept HasReference = requires(T t) { t.reference; } || requires(T t) { t.gt_masks; } ||
                       requires(T t) { t.truth; };
static_assert(!HasReference<TrainingCase>);
static_assert(HasReference<ValidationCase>);

namespace {

PhantomConfig small_phantoms(std::uint64_t seed) {
  PhantomConfig p;
  p.grid = Grid{28, 28, 28};
  p.sphere_radius = {5, 6};
  p.capsule_radius = {4, 5};
  p.capsule_half_length = {3, 5};
  p.ellipsoid_axis = {4, 6};
  p.shape = ShapeKind::SphereOrCapsule;
  p.seed = seed;
  return p;
}

fs::path make_data(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("score_unit_pipe_" + name);
  fs::remove_all(dir);
  generate_dataset({"train", 3, small_phantoms(1)}, dir);
  generate_dataset({"val", 2, small_phantoms(2)}, dir);
  return dir;
}

TrainConfig quick(const fs::path& dir) {
  TrainConfig t;
  t.steps = 12;
  t.val_every = 5;
  t.seed = 9;
  t.train_manifest = dir / "train.jsonl";
  t.val_manifest = dir / "val.jsonl";
  return t;
}

Checkpoint identity_checkpoint() {
  Checkpoint c;
  c.net = make_refiner({}, 1);
  for (std::size_t t = 0; t + 1 < c.net.params.size(); ++t)
    std::fill(c.net.params[t].value.begin(), c.net.params[t].value.end(), 0.0);
  c.meta = model_meta({}, true);
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("configuration errors") {
  TrainConfig t;
  t.steps = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  CHECK_THROWS_AS(train(TrainConfig{}, {}, {}), ConfigError);
  TrainConfig u;
  CHECK_THROWS_AS(train(u), ConfigError);
}

TEST_CASE("model selection") {
  const auto s = select_best({{5, 0.7}, {10, 0.9}, {15, 0.9}, {20, 0.8}});
  CHECK(s.best_step == 10);
  CHECK(s.best_score == 0.9);
  CHECK(select_best(s.history).best_step == s.best_step);
}

TEST_CASE("training is deterministic and selects the best validation step") {
  const auto dir = make_data("det");
  const auto a = train(quick(dir));
  const auto b = train(quick(dir));
  CHECK(a.selection.history == b.selection.history);
  CHECK(a.loss_history == b.loss_history);
  REQUIRE(a.selection.history.size() == 3);  // steps 5, 10 and the final 12
  CHECK(a.selection.history.back().first == 12);
  double best = -1;
  for (const auto& [step, score] : a.selection.history) best = std::max(best, score);
  CHECK(a.selection.best_score == best);
  for (std::size_t t = 0; t < a.checkpoint.net.params.size(); ++t)
    CHECK(a.checkpoint.net.params[t].value == b.checkpoint.net.params[t].value);
}

TEST_CASE("support cropping does not change the updates") {
  const auto dir = make_data("crop");
  auto t = quick(dir);
  t.steps = 4;
  t.val_manifest.clear();
  const auto cropped = train(t);
  t.crop_to_support = false;
  const auto full = train(t);
  REQUIRE(cropped.loss_history.size() == full.loss_history.size());
  for (std::size_t i = 0; i < full.loss_history.size(); ++i)
    CHECK(cropped.loss_history[i] == doctest::Approx(full.loss_history[i]).epsilon(1e-10));
  for (std::size_t p = 0; p < full.checkpoint.net.params.size(); ++p)
    for (std::size_t i = 0; i < full.checkpoint.net.params[p].value.size(); ++i)
      CHECK(cropped.checkpoint.net.params[p].value[i] ==
            doctest::Approx(full.checkpoint.net.params[p].value[i]).epsilon(1e-9).scale(1e-12));
}

TEST_CASE("reference files are never opened during training") {
  const auto dir = make_data("gt");
  auto t = quick(dir);
  t.val_manifest.clear();
  t.checkpoint = dir / "with_gt.sckp";
  train(t);
  for (const auto& r : read_manifest(t.train_manifest)) fs::remove(dir / *r.gt_masks);
  t.checkpoint = dir / "without_gt.sckp";
  train(t);
  CHECK(slurp(dir / "with_gt.sckp") == slurp(dir / "without_gt.sckp"));
}

TEST_CASE("refine") {
  const auto dir = make_data("refine");
  const auto cases = load_validation_set(dir / "val.jsonl");
  const auto ck = identity_checkpoint();
  CHECK(refine(ck, cases[0].image, cases[0].init_masks) == cases[0].init_masks);

  CHECK_THROWS_AS(refine(ck, Volume3(Grid{5, 5, 5}), cases[0].init_masks), GridError);
  Checkpoint two = ck;
  RefinerConfig rc;
  rc.regions = 2;
  two.net = make_refiner(rc, 1);
  CHECK_THROWS_AS(refine(two, cases[0].image, cases[0].init_masks), CheckpointError);
}

TEST_CASE("evaluation") {
  const auto dir = make_data("eval");
  const auto out = dir / "eval";
  const auto s = evaluate(dir / "val.jsonl", identity_checkpoint(), out);
  CHECK(s.n == 2);
  CHECK(s.refined_stats[0].dice_mean == s.initial_stats[0].dice_mean);
  CHECK(s.refined_stats[0].hd95_mean == s.initial_stats[0].hd95_mean);

  std::ifstream csv(out / "refined.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "case_id,region,dice,hd95_mm,vol_pred_mm3,vol_ref_mm3");
  double sum = 0;
  int n = 0;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string id, region, d;
    std::getline(ss, id, ',');
    std::getline(ss, region, ',');
    std::getline(ss, d, ',');
    sum += std::stod(d);
    ++n;
  }
  CHECK(n == 2);
  CHECK(s.refined_stats[0].dice_mean == doctest::Approx(sum / n).epsilon(1e-15));
  CHECK(fs::exists(out / "summary.json"));

  std::ofstream(dir / "empty.jsonl").close();
  const auto e = evaluate(dir / "empty.jsonl", identity_checkpoint(), dir / "eval_empty");
  CHECK(e.n == 0);
  CHECK(slurp(dir / "eval_empty" / "initial.csv") == "case_id,region,dice,hd95_mm,vol_pred_mm3,vol_ref_mm3\n");
}

TEST_CASE("cases without reference are skipped by evaluation") {
  const auto dir = make_data("skip");
  auto recs = read_manifest(dir / "val.jsonl");
  recs[1].gt_masks.reset();
  write_manifest(dir / "val.jsonl", recs);
  const auto s = evaluate(dir / "val.jsonl", identity_checkpoint(), dir / "eval");
  CHECK(s.n == 1);
  CHECK(s.skipped_no_gt == 1);
}

TEST_CASE("mixed labels collapse to the dominant error") {
  const Grid g{16, 16, 16};
  Mask m(g);
  for (std::int64_t z = 4; z < 12; ++z)
    for (std::int64_t y = 4; y < 12; ++y)
      for (std::int64_t x = 4; x < 12; ++x) m.at(x, y, z) = 1;
  const RegionMaskSet init({m});
  const WeakLabelSet labels{{1, 2, 2}};
  // Bright prior everywhere: the missing mass outside the mask dominates.
  CHECK(collapse_mixed_labels(labels, init, Volume3(g, 1.f), 2)[0].l == -1);
  CHECK(collapse_mixed_labels(labels, init, Volume3(g, 0.f), 2)[0].l == 1);
  CHECK(collapse_mixed_labels({{1, 2, -1}}, init, Volume3(g, 0.f), 2)[0].l == -1);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = fs::temp_directory_path() / "score_unit_ckpt";
  fs::create_directories(dir);
  RefinerConfig rc;
  rc.regions = 2;
  rc.widths = {4, 5};
  Checkpoint c{make_refiner(rc, 11), model_meta({128, 99.0}, false)};
  c.net.adam.step = 7;
  c.net.adam.m[0][0] = 0.25;
  save_checkpoint(c, dir / "c.sckp");
  const auto back = load_checkpoint(dir / "c.sckp");
  CHECK(back.net.config == rc);
  CHECK(back.net.adam.step == 7);
  CHECK(back.net.adam.m[0][0] == 0.25);
  for (std::size_t t = 0; t < c.net.params.size(); ++t) CHECK(back.net.params[t].value == c.net.params[t].value);
  const auto ms = model_settings(back);
  CHECK(ms.prior.hist_bins == 128);
  CHECK(ms.prior.upper_percentile == 99.0);
  CHECK_FALSE(ms.use_prior);

  auto bytes = slurp(dir / "c.sckp");
  std::ofstream(dir / "t.sckp", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_AS(load_checkpoint(dir / "t.sckp"), CheckpointError);
  std::ofstream(dir / "m.sckp", std::ios::binary) << "XXXX" + bytes.substr(4);
  CHECK_THROWS_AS(load_checkpoint(dir / "m.sckp"), CheckpointError);
}
