#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "embryoforge/imaging.hpp"
#include "embryoforge/manifest.hpp"
#include "embryoforge/rng.hpp"

namespace embryoforge {

/// Procedural stand-in for confocal membrane stacks: an elliptical embryo
/// shell with Voronoi cell walls rendered as bright ridges on a dark field,
/// plus photon-like noise and sparse hot pixels.
struct SynthConfig {
  int n_embryos = 2;
  int stacks_per = 3;
  int size = 160;
  int n_slices = 30;
  int first_time_min = 61;
  int bit_depth = 8;
  /// Mean distance between neighbouring cell centres, as a fraction of size.
  double cell_spacing = 0.14;

  void validate() const;
};

struct SynthStack {
  ImageStack stack;
  BoundingBox bbox;
  std::uint64_t seed = 0;
};

/// Stack `index` (0-based time point) of embryo `embryo`. Depends only on
/// (cfg, embryo, index, master_seed).
SynthStack synth_stack(const SynthConfig& cfg, int embryo, int index, std::uint64_t master_seed);

/// Writes every stack as stacks/eXXX_tYYY.pgm under `dir` plus a
/// manifest.jsonl of raw_stack entries, and returns the entries.
std::vector<ManifestEntry> write_synth_corpus(const std::filesystem::path& dir,
                                              const SynthConfig& cfg, std::uint64_t master_seed);

/// One labeled square patch: label 1 puts k >= 5 cells around a shared
/// vertex near the centre (a rosette), label 0 is an ordinary jittered
/// hexagonal tiling whose vertices are all three-way.
Patch synth_labeled_patch(int size, int label, Rng& rng, int bit_depth = 8);

/// n patches with labels drawn by fair coin.
std::vector<Patch> synth_labeled_set(int n, int size, Rng& rng, int bit_depth = 8);

}  // namespace embryoforge
