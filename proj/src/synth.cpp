#include "score/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "score/errors.hpp"
#include "score/io.hpp"
#include "score/metrics.hpp"

namespace score {

void PhantomConfig::validate() const {
  grid.validate();
  if (!(fg_mean > bg_mean)) throw ConfigError("phantom foreground must be brighter than background");
  if (blur_sigma < 0 || noise_sigma < 0) throw ConfigError("phantom sigmas must be >= 0");
  if (margin < 0 || eta < 0) throw ConfigError("phantom margin and eta must be >= 0");
  if (degrade_r_max < 0 || degrade_factor < 1) throw ConfigError("bad degradation parameters");
  if (!(init_dice.lo <= init_dice.hi)) throw ConfigError("init_dice range not ordered");
  if (max_retries < 1) throw ConfigError("max_retries must be >= 1");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  // splitmix64 over the combined words
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

namespace {

using Vec = std::array<double, 3>;

double seg_distance(const Vec& p, const Vec& a, const Vec& b) {
  Vec ab{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  Vec ap{p[0] - a[0], p[1] - a[1], p[2] - a[2]};
  const double len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
  double t = len2 > 0 ? (ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  double d2 = 0;
  for (int i = 0; i < 3; ++i) {
    const double d = p[i] - (a[i] + t * ab[i]);
    d2 += d * d;
  }
  return std::sqrt(d2);
}

std::array<Vec, 3> rotation(const Vec& deg) {
  const double k = std::numbers::pi / 180.0;
  const double cx = std::cos(deg[0] * k), sx = std::sin(deg[0] * k);
  const double cy = std::cos(deg[1] * k), sy = std::sin(deg[1] * k);
  const double cz = std::cos(deg[2] * k), sz = std::sin(deg[2] * k);
  // Rz * Ry * Rx
  return {{{cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx},
           {sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx},
           {-sy, cy * sx, cy * cx}}};
}

bool inside(const Shape& s, const Vec& p) {
  if (const auto* sp = std::get_if<Sphere>(&s)) {
    double d2 = 0;
    for (int i = 0; i < 3; ++i) d2 += (p[i] - sp->center[i]) * (p[i] - sp->center[i]);
    return d2 <= sp->radius * sp->radius;
  }
  if (const auto* c = std::get_if<Capsule>(&s)) return seg_distance(p, c->a, c->b) <= c->radius;
  const auto& e = std::get<Ellipsoid>(s);
  const auto r = rotation(e.angles_deg);
  double acc = 0;
  for (int i = 0; i < 3; ++i) {
    // body-frame coordinate i = column i of R dotted with (p - c)
    double u = 0;
    for (int j = 0; j < 3; ++j) u += r[j][i] * (p[j] - e.center[j]);
    acc += (u / e.semi_axes[i]) * (u / e.semi_axes[i]);
  }
  return acc <= 1.0;
}

// Axis-aligned half-extents of the shape around its center.
std::pair<Vec, Vec> extent(const Shape& s) {
  if (const auto* sp = std::get_if<Sphere>(&s)) {
    Vec lo, hi;
    for (int i = 0; i < 3; ++i) {
      lo[i] = sp->center[i] - sp->radius;
      hi[i] = sp->center[i] + sp->radius;
    }
    return {lo, hi};
  }
  if (const auto* c = std::get_if<Capsule>(&s)) {
    Vec lo, hi;
    for (int i = 0; i < 3; ++i) {
      lo[i] = std::min(c->a[i], c->b[i]) - c->radius;
      hi[i] = std::max(c->a[i], c->b[i]) + c->radius;
    }
    return {lo, hi};
  }
  const auto& e = std::get<Ellipsoid>(s);
  const auto r = rotation(e.angles_deg);
  Vec lo, hi;
  for (int i = 0; i < 3; ++i) {
    double h2 = 0;
    for (int j = 0; j < 3; ++j) h2 += r[i][j] * r[i][j] * e.semi_axes[j] * e.semi_axes[j];
    lo[i] = e.center[i] - std::sqrt(h2);
    hi[i] = e.center[i] + std::sqrt(h2);
  }
  return {lo, hi};
}

void check_fit(const Shape& s, const PhantomConfig& cfg) {
  const auto [lo, hi] = extent(s);
  const double pad = cfg.margin + cfg.eta;
  for (int i = 0; i < 3; ++i) {
    if (cfg.truncated_fov && i == 2 && std::holds_alternative<Capsule>(s)) continue;
    if (lo[i] < pad || hi[i] > double(cfg.grid.dims[std::size_t(i)] - 1) - pad)
      throw ConfigError("phantom shape does not fit the grid with the required margin");
  }
}

double draw(Rng& rng, const Range& r) {
  return r.lo + std::uniform_real_distribution<double>(0.0, 1.0)(rng) * (r.hi - r.lo);
}

Vec random_unit(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec v{n(rng), n(rng), n(rng)};
  const double len = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  for (auto& c : v) c /= len > 0 ? len : 1.0;
  return v;
}

Shape sample_shape(const PhantomConfig& cfg, Rng& rng) {
  ShapeKind kind = cfg.shape;
  if (kind == ShapeKind::Any) {
    const int pick = std::uniform_int_distribution<int>(0, 2)(rng);
    kind = pick == 0 ? ShapeKind::Sphere : pick == 1 ? ShapeKind::Capsule : ShapeKind::Ellipsoid;
  } else if (kind == ShapeKind::SphereOrCapsule) {
    kind = std::uniform_int_distribution<int>(0, 1)(rng) ? ShapeKind::Capsule : ShapeKind::Sphere;
  }
  if (cfg.truncated_fov) kind = ShapeKind::Capsule;
  const Vec mid{double(cfg.grid.nx() - 1) / 2, double(cfg.grid.ny() - 1) / 2,
                double(cfg.grid.nz() - 1) / 2};
  const double jitter = 2.0;
  Vec c;
  for (int i = 0; i < 3; ++i) c[i] = mid[i] + draw(rng, {-jitter, jitter});

  switch (kind) {
    case ShapeKind::Sphere:
      return Sphere{c, draw(rng, cfg.sphere_radius)};
    case ShapeKind::Capsule: {
      const double r = draw(rng, cfg.capsule_radius);
      if (cfg.truncated_fov) {
        const double reach = double(cfg.grid.nz()) + 4.0;
        const Vec tilt{draw(rng, {-0.1, 0.1}), draw(rng, {-0.1, 0.1}), 1.0};
        Vec a, b;
        for (int i = 0; i < 3; ++i) {
          a[i] = c[i] - tilt[i] * reach / 2;
          b[i] = c[i] + tilt[i] * reach / 2;
        }
        return Capsule{a, b, r};
      }
      const double h = draw(rng, cfg.capsule_half_length);
      const Vec u = random_unit(rng);
      Vec a, b;
      for (int i = 0; i < 3; ++i) {
        a[i] = c[i] - h * u[i];
        b[i] = c[i] + h * u[i];
      }
      return Capsule{a, b, r};
    }
    default: {
      Vec axes, ang;
      for (auto& a : axes) a = draw(rng, cfg.ellipsoid_axis);
      for (auto& a : ang) a = draw(rng, {-90.0, 90.0});
      return Ellipsoid{c, axes, ang};
    }
  }
}

}  // namespace

Mask rasterize(const Shape& shape, const Grid& grid) {
  Mask m(grid);
  for (std::int64_t z = 0; z < grid.nz(); ++z)
    for (std::int64_t y = 0; y < grid.ny(); ++y)
      for (std::int64_t x = 0; x < grid.nx(); ++x)
        m.at(x, y, z) = inside(shape, {double(x), double(y), double(z)}) ? 1 : 0;
  return m;
}

Phantom make_phantom(const PhantomConfig& cfg, Rng& rng) {
  cfg.validate();
  Shape shape;
  if (cfg.fixed_shape) {
    shape = *cfg.fixed_shape;
    check_fit(shape, cfg);
  } else {
    // Random draws that do not fit are redrawn; the size ranges keep this rare.
    for (int attempt = 0;; ++attempt) {
      shape = sample_shape(cfg, rng);
      try {
        check_fit(shape, cfg);
        break;
      } catch (const ConfigError&) {
        if (attempt + 1 >= cfg.max_retries) throw;
      }
    }
  }
  Mask truth = rasterize(shape, cfg.grid);

  const double fg = std::normal_distribution<double>(cfg.fg_mean, cfg.fg_sd)(rng);
  const double bg = std::normal_distribution<double>(cfg.bg_mean, cfg.bg_sd)(rng);
  const std::uint64_t noise_seed = rng();
  Volume3 img(cfg.grid);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = float(truth[i] ? fg : bg);
  img = gaussian_blur(img, cfg.blur_sigma);
  if (cfg.noise_sigma > 0) {
    Rng nrng(noise_seed);
    std::normal_distribution<double> nd(0.0, cfg.noise_sigma);
    for (auto& v : img.data()) v = float(double(v) + nd(nrng));
  }
  return {std::move(img), RegionMaskSet({std::move(truth)}), shape};
}

SynthCase make_case(const PhantomConfig& cfg, Rng& rng, const std::string& case_id) {
  SynthCase c;
  c.phantom = make_phantom(cfg, rng);
  const Mask& truth = c.phantom.truth[0];
  const Grid& g = cfg.grid;

  Regime regime = cfg.regime;
  if (regime == Regime::Random) {
    const int pick = std::uniform_int_distribution<int>(0, 2)(rng);
    regime = pick == 0 ? Regime::Under : pick == 1 ? Regime::Over : Regime::Mixed;
  }
  c.regime = regime;

  Mask initial = truth;
  if (regime != Regime::None) {
    const int l = regime == Regime::Under ? -1 : regime == Regime::Over ? 1 : 2;
    bool accepted = false;
    for (int attempt = 0; attempt < cfg.max_retries && !accepted; ++attempt) {
      const auto field = smooth_field(g, cfg.degrade_factor, rng);
      const auto radii = quantize_radius(field, g, cfg.degrade_r_max);
      std::vector<double> split;
      if (l == 2) {
        split = smooth_field(g, cfg.degrade_factor, rng);
        double mean = 0;
        for (double v : split) mean += v;
        mean /= double(split.size());
        for (double& v : split) v -= mean;
      }
      const auto out = morph_augment_with(truth, 0, l, radii, split, 1.0);
      if (out.mask.empty_set()) continue;
      const double d = dice(out.mask, truth);
      if (d < cfg.init_dice.lo || d > cfg.init_dice.hi) continue;
      initial = out.mask;
      accepted = true;
    }
    if (!accepted)
      throw ConfigError("could not degrade case " + case_id + " into the requested Dice range");
  }
  c.initial = RegionMaskSet({initial});

  const auto label = derive_labels_from_gt(initial, truth, cfg.bins);
  c.record.case_id = case_id;
  c.record.image = case_id + "_image.svol";
  c.record.init_masks = case_id + "_init.svol";
  c.record.gt_masks = case_id + "_gt.svol";
  c.record.labels = {RegionLabel{1, label.q, label.l}};
  c.record.annotator = "synthetic-rater";
  c.record.timestamp = "1970-01-01T00:00:00Z";
  return c;
}

CaseRecord write_case(const SynthCase& c, const std::filesystem::path& manifest) {
  const auto dir = manifest.parent_path();
  write_volume(c.phantom.image, dir / c.record.image);
  write_masks(c.initial, dir / c.record.init_masks);
  write_masks(c.phantom.truth, dir / *c.record.gt_masks);
  append_manifest(manifest, c.record);
  return c.record;
}

std::vector<CaseRecord> generate_dataset(const DatasetSpec& spec,
                                         const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto manifest = dir / (spec.name + ".jsonl");
  std::filesystem::remove(manifest);
  std::ofstream(manifest).close();
  std::vector<CaseRecord> out;
  for (std::size_t i = 0; i < spec.count; ++i) {
    Rng rng(derive_seed(spec.phantom.seed, i));
    PhantomConfig pc = spec.phantom;
    if (spec.truncated_every > 0 && i % spec.truncated_every == spec.truncated_every - 1)
      pc.truncated_fov = true;
    char id[64];
    std::snprintf(id, sizeof id, "%s_%03zu", spec.name.c_str(), i);
    out.push_back(write_case(make_case(pc, rng, id), manifest));
  }
  return out;
}

}  // namespace score
