// Reference implementations for tests. Written from the definitions, with
// no code shared with the library beyond the container types.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "score/morphology.hpp"
#include "score/volume.hpp"
#include "score/weaklabels.hpp"

namespace oracle {

using score::Grid;
using score::Mask;

inline bool in_ball(int dx, int dy, int dz, int r) { return dx * dx + dy * dy + dz * dz <= r * r; }

inline bool get(const Mask& m, std::int64_t x, std::int64_t y, std::int64_t z) {
  return m.grid().contains(x, y, z) && m.at(x, y, z);
}

// Keep v iff every ball offset lands on a foreground voxel inside the grid.
inline bool ball_inside(const Mask& m, std::int64_t x, std::int64_t y, std::int64_t z, int r) {
  for (int dz = -r; dz <= r; ++dz)
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx)
        if (in_ball(dx, dy, dz, r) && !get(m, x + dx, y + dy, z + dz)) return false;
  return true;
}

inline bool ball_hits(const Mask& m, std::int64_t x, std::int64_t y, std::int64_t z, int r) {
  for (int dz = -r; dz <= r; ++dz)
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx)
        if (in_ball(dx, dy, dz, r) && get(m, x + dx, y + dy, z + dz)) return true;
  return false;
}

inline Mask erode(const Mask& m, int r) {
  Mask out(m.grid());
  const Grid& g = m.grid();
  for (std::int64_t z = 0; z < g.nz(); ++z)
    for (std::int64_t y = 0; y < g.ny(); ++y)
      for (std::int64_t x = 0; x < g.nx(); ++x)
        out.at(x, y, z) = m.at(x, y, z) && ball_inside(m, x, y, z, r);
  return out;
}

inline Mask dilate(const Mask& m, int r) {
  Mask out(m.grid());
  const Grid& g = m.grid();
  for (std::int64_t z = 0; z < g.nz(); ++z)
    for (std::int64_t y = 0; y < g.ny(); ++y)
      for (std::int64_t x = 0; x < g.nx(); ++x) out.at(x, y, z) = ball_hits(m, x, y, z, r);
  return out;
}

// Erosion with the radius at the output voxel.
inline Mask erode_varying(const Mask& m, const std::vector<std::uint8_t>& r) {
  Mask out(m.grid());
  const Grid& g = m.grid();
  for (std::int64_t z = 0; z < g.nz(); ++z)
    for (std::int64_t y = 0; y < g.ny(); ++y)
      for (std::int64_t x = 0; x < g.nx(); ++x) {
        const auto o = g.offset(x, y, z);
        out[o] = m[o] && ball_inside(m, x, y, z, r[o]);
      }
  return out;
}

// v is set iff some mask voxel u has |v - u| <= r[u].
inline Mask dilate_varying(const Mask& m, const std::vector<std::uint8_t>& r) {
  Mask out(m.grid());
  const Grid& g = m.grid();
  for (std::int64_t z = 0; z < g.nz(); ++z)
    for (std::int64_t y = 0; y < g.ny(); ++y)
      for (std::int64_t x = 0; x < g.nx(); ++x) {
        bool hit = false;
        for (std::int64_t w = 0; w < g.nz() && !hit; ++w)
          for (std::int64_t v = 0; v < g.ny() && !hit; ++v)
            for (std::int64_t u = 0; u < g.nx() && !hit; ++u) {
              const auto o = g.offset(u, v, w);
              if (!m[o]) continue;
              const auto dx = x - u, dy = y - v, dz = z - w;
              hit = dx * dx + dy * dy + dz * dz <= std::int64_t(r[o]) * r[o];
            }
        out.at(x, y, z) = hit;
      }
  return out;
}

inline std::size_t mismatches(const Mask& a, const Mask& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
  return n;
}

// Exhaustive between-class variance over split edges, in exact rationals:
// classes {i < t} and {i >= t}, values at bin centers lo + (i + 1/2) w.
// Among maximizing splits, returns the middle (lower middle) of the first run
// of consecutive maximizers; 0 if no split has two populated classes.
inline std::size_t otsu_exhaustive(const std::vector<std::uint64_t>& h,
                                   const boost::multiprecision::cpp_rational& lo,
                                   const boost::multiprecision::cpp_rational& w) {
  using Q = boost::multiprecision::cpp_rational;
  Q n = 0;
  for (auto c : h) n += c;
  std::vector<Q> var(h.size(), Q(-1));
  for (std::size_t t = 1; t < h.size(); ++t) {
    Q c0 = 0, c1 = 0, m0 = 0, m1 = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      const Q x = lo + (Q(i) + Q(1, 2)) * w;
      if (i < t) {
        c0 += h[i];
        m0 += x * h[i];
      } else {
        c1 += h[i];
        m1 += x * h[i];
      }
    }
    if (c0 == 0 || c1 == 0) continue;
    m0 /= c0;
    m1 /= c1;
    const Q w0 = c0 / n, w1 = c1 / n;
    var[t] = w0 * w1 * (m0 - m1) * (m0 - m1);
  }
  const Q best = *std::max_element(var.begin(), var.end());
  if (best < 0) return 0;
  std::size_t first = 0;
  while (var[first] != best) ++first;
  std::size_t last = first;
  while (last + 1 < var.size() && var[last + 1] == best) ++last;
  return first + (last - first) / 2;
}

inline double dice(const Mask& a, const Mask& b) {
  double inter = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    na += a[i];
    nb += b[i];
  }
  return na + nb == 0 ? 1.0 : 2.0 * inter / (na + nb);
}

inline bool on_surface(const Mask& m, std::int64_t x, std::int64_t y, std::int64_t z) {
  if (!get(m, x, y, z)) return false;
  return !get(m, x - 1, y, z) || !get(m, x + 1, y, z) || !get(m, x, y - 1, z) ||
         !get(m, x, y + 1, z) || !get(m, x, y, z - 1) || !get(m, x, y, z + 1);
}

// All-pairs pooled symmetric surface distances, 95th percentile with linear
// interpolation between order statistics.
inline double hd95(const Mask& a, const Mask& b) {
  const Grid& g = a.grid();
  struct P {
    double x, y, z;
  };
  auto surf = [&](const Mask& m) {
    std::vector<P> s;
    for (std::int64_t z = 0; z < g.nz(); ++z)
      for (std::int64_t y = 0; y < g.ny(); ++y)
        for (std::int64_t x = 0; x < g.nx(); ++x)
          if (on_surface(m, x, y, z))
            s.push_back({double(x) * g.spacing[0], double(y) * g.spacing[1], double(z) * g.spacing[2]});
    return s;
  };
  const auto sa = surf(a), sb = surf(b);
  std::vector<double> d;
  auto directed = [&](const std::vector<P>& from, const std::vector<P>& to) {
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to)
        best = std::min(best, std::hypot(p.x - q.x, p.y - q.y, p.z - q.z));
      d.push_back(best);
    }
  };
  directed(sa, sb);
  directed(sb, sa);
  std::sort(d.begin(), d.end());
  const double rank = 0.95 * double(d.size() - 1);
  const auto i = std::size_t(rank);
  if (i + 1 >= d.size()) return d.back();
  return d[i] + (rank - double(i)) * (d[i + 1] - d[i]);
}

struct LossParts {
  double stab = 0, plus = 0, minus = 0;
};

// Straight-loop total loss for one fixture. Bands are recomputed here from
// the brute-force morphology.
inline LossParts loss(const std::vector<std::vector<double>>& pred, const std::vector<Mask>& init,
                      const std::vector<float>& prior, const score::WeakLabelSet& labels, int eta,
                      double eps) {
  const std::size_t K = init.size();
  LossParts out;
  for (std::size_t k = 0; k < K; ++k) {
    int q = 5, l = 0;
    for (const auto& r : labels)
      if (std::size_t(r.k) == k + 1) {
        q = r.q;
        l = r.l;
      }
    const double w = (5.0 - q) / 5.0;
    const Mask& m = init[k];
    const Mask stab = l == 0 ? m : oracle::erode(m, eta);
    const Mask er = oracle::erode(m, eta), di = oracle::dilate(m, eta);
    double s = 0, ns = 0, p = 0, mi = 0, nc = 0;
    for (std::size_t v = 0; v < m.size(); ++v) {
      const double sh = std::min(std::max(pred[k][v], eps), 1.0 - eps);
      if (stab[v]) {
        ns += 1;
        s += -double(m[v]) * std::log(sh);
      }
      if (di[v] && !er[v]) {
        nc += 1;
        if (l == -1 || l == 2) p += -w * prior[v] * std::log(sh);
        if (l == 1 || l == 2) mi += -w * (1.0 - prior[v]) * std::log(1.0 - sh);
      }
    }
    if (ns > 0) out.stab += s / ns / double(K);
    if (nc > 0) {
      out.plus += p / nc / double(K);
      out.minus += mi / nc / double(K);
    }
  }
  return out;
}

}  // namespace oracle
