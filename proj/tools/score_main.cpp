#include <csignal>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "score/checkpoint.hpp"
#include "score/config.hpp"
#include "score/errors.hpp"
#include "score/io.hpp"
#include "score/pipeline.hpp"
#include "score/prior.hpp"
#include "score/server.hpp"
#include "score/synth.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kData = 3, kNumeric = 4 };

score::Range range_of(const score::Config& c, const std::string& key, score::Range r) {
  const auto v = c.get_list(key, {r.lo, r.hi});
  if (v.size() != 2) throw score::ConfigError(key + ": expected 'lo,hi'");
  return {v[0], v[1]};
}

score::PhantomConfig phantom_config_from(const score::Config& c) {
  score::PhantomConfig p;
  const int n = c.get("synth.size", 48);
  p.grid = score::Grid{std::uint32_t(n), std::uint32_t(n), std::uint32_t(n)};
  const std::string shape = c.get("synth.shape", std::string("sphere_or_capsule"));
  if (shape == "any") p.shape = score::ShapeKind::Any;
  else if (shape == "sphere") p.shape = score::ShapeKind::Sphere;
  else if (shape == "capsule") p.shape = score::ShapeKind::Capsule;
  else if (shape == "ellipsoid") p.shape = score::ShapeKind::Ellipsoid;
  else if (shape == "sphere_or_capsule") p.shape = score::ShapeKind::SphereOrCapsule;
  else throw score::ConfigError("synth.shape: unknown shape '" + shape + "'");
  const std::string regime = c.get("synth.regime", std::string("random"));
  if (regime == "random") p.regime = score::Regime::Random;
  else if (regime == "under") p.regime = score::Regime::Under;
  else if (regime == "over") p.regime = score::Regime::Over;
  else if (regime == "mixed") p.regime = score::Regime::Mixed;
  else if (regime == "none") p.regime = score::Regime::None;
  else throw score::ConfigError("synth.regime: unknown regime '" + regime + "'");
  p.init_dice = range_of(c, "synth.init_dice", p.init_dice);
  p.fg_mean = c.get("synth.fg_mean", p.fg_mean);
  p.bg_mean = c.get("synth.bg_mean", p.bg_mean);
  p.noise_sigma = c.get("synth.noise_sigma", p.noise_sigma);
  p.blur_sigma = c.get("synth.blur_sigma", p.blur_sigma);
  p.degrade_r_max = c.get("synth.degrade_r_max", p.degrade_r_max);
  p.eta = c.get("loss.eta", p.eta);
  p.validate();
  return p;
}

score::AnnotationServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised segmentation refinement"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_given = false;
  app.add_option("--config", config_path, "INI-style configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override a key, section.key=value");
  auto* seed_opt = app.add_option("--seed", seed, "Random seed for gen and train");

  auto* gen = app.add_subcommand("gen", "Generate synthetic train/val/test phantoms");
  std::string gen_out;
  std::size_t n_train = 40, n_val = 8, n_test = 15;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--train", n_train, "Training cases");
  gen->add_option("--val", n_val, "Validation cases");
  gen->add_option("--test", n_test, "Test cases");

  auto* prior = app.add_subcommand("prior", "Compute the boundary prior of an image");
  std::string prior_in, prior_out;
  prior->add_option("--image", prior_in)->required()->check(CLI::ExistingFile);
  prior->add_option("--out", prior_out)->required();

  auto* trn = app.add_subcommand("train", "Train a refiner from weak labels");
  std::string train_manifest, val_manifest, ckpt_out;
  trn->add_option("--train-manifest", train_manifest);
  trn->add_option("--val-manifest", val_manifest);
  trn->add_option("--checkpoint", ckpt_out);

  auto* ref = app.add_subcommand("refine", "Refine the initial masks of one image");
  std::string ref_ckpt, ref_image, ref_masks, ref_out;
  ref->add_option("--checkpoint", ref_ckpt)->required()->check(CLI::ExistingFile);
  ref->add_option("--image", ref_image)->required()->check(CLI::ExistingFile);
  ref->add_option("--masks", ref_masks)->required()->check(CLI::ExistingFile);
  ref->add_option("--out", ref_out)->required();

  auto* ev = app.add_subcommand("eval", "Evaluate initial and refined masks against references");
  std::string ev_manifest, ev_ckpt, ev_out;
  ev->add_option("--manifest", ev_manifest)->required()->check(CLI::ExistingFile);
  ev->add_option("--checkpoint", ev_ckpt)->required()->check(CLI::ExistingFile);
  ev->add_option("--out-dir", ev_out)->required();

  auto* srv = app.add_subcommand("serve", "Serve the annotation API");
  std::string srv_manifest, srv_host = "127.0.0.1", srv_static;
  int srv_port = 8080;
  srv->add_option("--manifest", srv_manifest)->required()->check(CLI::ExistingFile);
  srv->add_option("--host", srv_host);
  srv->add_option("--port", srv_port);
  srv->add_option("--static", srv_static, "Directory of UI assets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  seed_given = seed_opt->count() > 0;

  try {
    score::Config cfg;
    if (!config_path.empty()) cfg = score::Config::load(config_path);
    for (const auto& o : overrides) cfg.apply_override(o);
    if (seed_given) cfg.set("train.seed", std::to_string(seed));

    if (*gen) {
      auto pc = phantom_config_from(cfg);
      const std::uint64_t base = cfg.get("train.seed", std::uint64_t(0));
      const std::size_t trunc_every = std::size_t(cfg.get("synth.val_truncated_every", 4));
      struct Split {
        const char* name;
        std::size_t n;
        std::uint64_t salt;
        std::size_t trunc;
      } splits[] = {{"train", n_train, 1, 0}, {"val", n_val, 2, trunc_every}, {"test", n_test, 3, 0}};
      for (const auto& s : splits) {
        score::DatasetSpec spec{s.name, s.n, pc, s.trunc};
        spec.phantom.seed = score::derive_seed(base, s.salt);
        score::generate_dataset(spec, gen_out);
        std::cout << s.name << ": " << s.n << " cases\n";
      }
    } else if (*prior) {
      const auto t = score::train_config_from(cfg);
      const auto img = score::read_volume(prior_in);
      const auto p = score::build_prior(img, t.prior);
      score::write_volume(p.map, prior_out);
      std::cout << "window [" << p.lower << ", " << p.upper << "]"
                << (p.degenerate ? " (degenerate)" : "") << "\n";
    } else if (*trn) {
      if (!train_manifest.empty()) cfg.set("train.train_manifest", train_manifest);
      if (!val_manifest.empty()) cfg.set("train.val_manifest", val_manifest);
      if (!ckpt_out.empty()) cfg.set("train.checkpoint", ckpt_out);
      auto t = score::train_config_from(cfg);
      if (t.checkpoint.empty()) throw score::ConfigError("train.checkpoint is not set");
      if (t.log_every == 0) t.log_every = 100;
      const auto res = score::train(t);
      std::cout << "best step " << res.selection.best_step << " validation dice "
                << res.selection.best_score << "\n";
    } else if (*ref) {
      const auto ck = score::load_checkpoint(ref_ckpt);
      const auto out = score::refine(ck, score::read_volume(ref_image), score::read_masks(ref_masks));
      score::write_masks(out, ref_out);
    } else if (*ev) {
      const auto s = score::evaluate(ev_manifest, score::load_checkpoint(ev_ckpt), ev_out);
      std::cout << score::summary_json(s) << "\n";
    } else if (*srv) {
      score::ServerOptions opts{srv_manifest, {}};
      if (!srv_static.empty()) opts.static_dir = srv_static;
      score::AnnotationServer server(opts);
      const int port = server.bind(srv_host, srv_port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on http://" << srv_host << ":" << port << "\n" << std::flush;
      server.listen_after_bind();
      g_server = nullptr;
    }
    // A shared config file legitimately carries keys for other subcommands;
    // only explicit overrides are reported.
    for (const auto& k : cfg.unused_keys())
      for (const auto& o : overrides)
        if (o.substr(0, o.find('=')) == k) std::cerr << "warning: --set " << k << " had no effect\n";
  } catch (const score::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const score::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const score::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
