#include "embryoforge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "embryoforge/pgm.hpp"

namespace embryoforge {

namespace {

struct Point {
  double x, y;
};

constexpr double kPi = std::numbers::pi;

/// Distance from (x,y) to the wall between its two nearest seeds.
double wall_distance(double x, double y, const std::vector<Point>& seeds) {
  double d1 = 1e300, d2 = 1e300;
  std::size_t i1 = 0, i2 = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const double dx = x - seeds[i].x, dy = y - seeds[i].y;
    const double d = dx * dx + dy * dy;
    if (d < d1) {
      d2 = d1;
      i2 = i1;
      d1 = d;
      i1 = i;
    } else if (d < d2) {
      d2 = d;
      i2 = i;
    }
  }
  if (seeds.size() < 2) return 1e300;
  const double sx = seeds[i1].x - seeds[i2].x, sy = seeds[i1].y - seeds[i2].y;
  return (d2 - d1) / (2.0 * std::sqrt(sx * sx + sy * sy));
}

double ridge(double distance, double width) {
  const double t = distance / width;
  return std::exp(-t * t);
}

/// Photon-like noise around `level`, with rare saturated hot pixels.
double noisy(double level, double top, Rng& rng) {
  if (rng.uniform() < 0.002) return top;
  const double scale = top / 255.0;
  return level + rng.normal() * std::sqrt(std::max(level, 1.0 * scale) * scale) * 1.2;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_embryos < 1 || stacks_per < 1 || n_slices < 1) {
    throw std::invalid_argument("synthetic corpus counts must be positive");
  }
  if (size < 16) throw std::invalid_argument("synthetic stack size must be >= 16");
  if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("bit depth must be 8 or 16");
  if (!(cell_spacing > 0.02 && cell_spacing < 0.5)) {
    throw std::invalid_argument("cell spacing must lie in (0.02, 0.5)");
  }
}

SynthStack synth_stack(const SynthConfig& cfg, int embryo, int index, std::uint64_t master_seed) {
  cfg.validate();
  const double n = cfg.size;
  // Embryo geometry and cells persist across time points.
  Rng erng(derive_seed(master_seed, "embryo-" + std::to_string(embryo)));
  const double a = n * (0.40 + 0.06 * erng.uniform());
  const double b = n * (0.40 + 0.06 * erng.uniform());
  const double cx = n / 2 + (erng.uniform() - 0.5) * (n - 2 * a - 2);
  const double cy = n / 2 + (erng.uniform() - 0.5) * (n - 2 * b - 2);
  const double spacing = cfg.cell_spacing * n;
  std::vector<Point> base, drift, tilt;
  for (int tries = 0; tries < 4000; ++tries) {
    const double r = std::sqrt(erng.uniform());
    const double th = erng.uniform(0, 2 * kPi);
    const Point p{cx + a * r * std::cos(th), cy + b * r * std::sin(th)};
    const bool far = std::all_of(base.begin(), base.end(), [&](const Point& q) {
      return std::hypot(p.x - q.x, p.y - q.y) >= 0.8 * spacing;
    });
    if (far) {
      base.push_back(p);
      drift.push_back({erng.normal() * 0.02 * spacing, erng.normal() * 0.02 * spacing});
      tilt.push_back({erng.normal() * 0.35 * spacing, erng.normal() * 0.35 * spacing});
    }
  }

  SynthStack out;
  out.seed = derive_seed(master_seed, "stack-" + std::to_string(embryo) + "-" + std::to_string(index));
  Rng noise(out.seed);
  ImageStack& s = out.stack;
  s = ImageStack::blank(cfg.size, cfg.size, cfg.n_slices, cfg.bit_depth);
  s.meta = {embryo, cfg.first_time_min + index};
  const double top = (1 << cfg.bit_depth) - 1;
  const double bg = 0.05 * top, cyto = 0.16 * top, wall = 0.78 * top;
  const double zc = (cfg.n_slices - 1) / 2.0;
  std::vector<Point> seeds(base.size());
  for (int z = 0; z < cfg.n_slices; ++z) {
    const double dz = cfg.n_slices > 1 ? (z - zc) / cfg.n_slices : 0.0;
    const double depth = 1.0 - 0.5 * std::abs(dz) * 2.0;
    for (std::size_t i = 0; i < base.size(); ++i) {
      seeds[i] = {base[i].x + drift[i].x * index + tilt[i].x * dz,
                  base[i].y + drift[i].y * index + tilt[i].y * dz};
    }
    // Optical sectioning shrinks the embryo away from its equator.
    const double shrink = std::sqrt(std::max(0.15, 1.0 - 1.2 * dz * dz));
    const double az = a * shrink, bz = b * shrink;
    for (int y = 0; y < cfg.size; ++y)
      for (int x = 0; x < cfg.size; ++x) {
        const double ex = (x - cx) / az, ey = (y - cy) / bz;
        const double rho = std::sqrt(ex * ex + ey * ey);
        const double shell = ridge((rho - 1.0) * std::min(az, bz), 1.6);
        double level = bg;
        if (rho < 1.0) {
          level = cyto + (wall - cyto) * ridge(wall_distance(x, y, seeds), 1.2);
        }
        level = std::max(level, bg + (wall - bg) * shell);
        level = bg + (level - bg) * depth;
        s.at(x, y, z) = quantize(noisy(level, top, noise), static_cast<int>(top));
      }
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - a)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - b)));
  const int x1 = std::min(cfg.size, static_cast<int>(std::ceil(cx + a)) + 1);
  const int y1 = std::min(cfg.size, static_cast<int>(std::ceil(cy + b)) + 1);
  out.bbox = {x0, y0, x1 - x0, y1 - y0};
  return out;
}

std::vector<ManifestEntry> write_synth_corpus(const std::filesystem::path& dir,
                                              const SynthConfig& cfg, std::uint64_t master_seed) {
  cfg.validate();
  std::filesystem::create_directories(dir / "stacks");
  std::vector<ManifestEntry> entries;
  for (int e = 0; e < cfg.n_embryos; ++e) {
    for (int t = 0; t < cfg.stacks_per; ++t) {
      const auto st = synth_stack(cfg, e, t, master_seed);
      char name[64];
      std::snprintf(name, sizeof name, "stacks/e%03d_t%03d.pgm", e, st.stack.meta.time_min);
      write_stack_pgm(dir / name, st.stack);
      ManifestEntry m;
      m.path = name;
      m.role = EntryRole::raw_stack;
      m.embryo_id = e;
      m.time_min = st.stack.meta.time_min;
      m.bbox = st.bbox;
      m.seed_used = st.seed;
      m.n_slices = cfg.n_slices;
      entries.push_back(m);
    }
  }
  write_manifest(dir / "manifest.jsonl", entries);
  return entries;
}

Patch synth_labeled_patch(int size, int label, Rng& rng, int bit_depth) {
  if (size < 8) throw std::invalid_argument("labeled patch size must be >= 8");
  if (label != 0 && label != 1) throw std::invalid_argument("label must be 0 or 1");
  const double n = size;
  const double s = n / 3.2;  // cell spacing
  // Jittered hexagonal lattice, randomly rotated and shifted.
  const double rot = rng.uniform(0, kPi / 3);
  const double ox = rng.uniform(0, s), oy = rng.uniform(0, s);
  const double cr = std::cos(rot), sr = std::sin(rot);
  std::vector<Point> seeds;
  const int reach = static_cast<int>(std::ceil(n / s)) + 3;
  for (int j = -reach; j <= reach; ++j)
    for (int i = -reach; i <= reach; ++i) {
      const double u = (i + 0.5 * (j & 1)) * s + ox;
      const double v = j * s * std::sqrt(3.0) / 2 + oy;
      const double jx = rng.normal() * 0.12 * s, jy = rng.normal() * 0.12 * s;
      const Point p{n / 2 + cr * u - sr * v + jx, n / 2 + sr * u + cr * v + jy};
      if (p.x > -2 * s && p.x < n + 2 * s && p.y > -2 * s && p.y < n + 2 * s) seeds.push_back(p);
    }
  const double ccx = n / 2 + rng.uniform(-n / 8, n / 8);
  const double ccy = n / 2 + rng.uniform(-n / 8, n / 8);
  const int k = 5 + static_cast<int>(rng.below(3));
  const double phase = rng.uniform(0, 2 * kPi);
  if (label == 1) {
    // Clear the neighbourhood and ring the vertex with k wedge-shaped cells.
    std::erase_if(seeds, [&](const Point& p) { return std::hypot(p.x - ccx, p.y - ccy) < 1.45 * s; });
    const double r = 0.6 * s;
    for (int i = 0; i < k; ++i) {
      const double th = phase + 2 * kPi * i / k;
      seeds.push_back({ccx + r * std::cos(th), ccy + r * std::sin(th)});
    }
  }
  Patch p;
  p.image = Image::blank(size, size, bit_depth);
  p.label = label;
  const double top = p.image.max_value();
  const double cyto = 0.16 * top, wall = 0.78 * top;
  const double contrast = rng.uniform(0.8, 1.0);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double level = cyto + (wall - cyto) * contrast * ridge(wall_distance(x, y, seeds), 1.1);
      p.image.at(x, y) = quantize(noisy(level, top, rng), static_cast<int>(top));
    }
  return p;
}

std::vector<Patch> synth_labeled_set(int n, int size, Rng& rng, int bit_depth) {
  std::vector<Patch> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int label = rng.bernoulli(0.5) ? 1 : 0;
    out.push_back(synth_labeled_patch(size, label, rng, bit_depth));
  }
  return out;
}

}  // namespace embryoforge
