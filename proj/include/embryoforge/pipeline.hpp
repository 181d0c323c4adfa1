#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "embryoforge/imaging.hpp"
#include "embryoforge/manifest.hpp"

namespace embryoforge {

struct PreprocessConfig {
  int patch_size = 128;
  /// Inclusive 0-based slice range.
  int slice_lo = 9;
  int slice_hi = 13;
  int per_slice = 1;
  std::uint64_t seed = 0;
  int median_radius = 1;
  double p_low = 1.0;
  double p_high = 99.0;
  /// Worker threads; 0 picks hardware concurrency capped by EMBRYOFORGE_THREADS.
  int threads = 0;

  void validate() const;
};

/// Parses "lo:hi" into an inclusive range.
std::pair<int, int> parse_slice_range(const std::string& text);

/// Threads to use for `requested` (0 = auto), capped by the
/// EMBRYOFORGE_THREADS environment variable when set.
int worker_count(int requested);

/// Patch-sampling seed of one stack; independent of processing order.
std::uint64_t stack_seed(std::uint64_t master, int embryo_id, int time_min);

/// Median filter and brightness stretch restricted to the bbox over the
/// configured slices, then random patch extraction. Voxels outside that
/// region do not influence the result beyond the filter's reach.
std::vector<Patch> preprocess_stack(const ImageStack& stack, const BoundingBox& bbox,
                                    const PreprocessConfig& cfg);

/// Denoised copy of `stack` in which only the bbox region of the configured
/// slices is filtered and stretched; the rest is zero.
ImageStack denoise_region(const ImageStack& stack, const BoundingBox& bbox,
                          const PreprocessConfig& cfg);

struct StackFailure {
  std::string path;
  std::string error;
};

struct PreprocessReport {
  std::vector<ManifestEntry> patches;
  std::vector<StackFailure> failures;
  int stacks_ok = 0;
};

/// Processes every raw_stack entry of the manifest on worker threads and
/// writes patches/<eEEE_tTTT_zZZ_kK>.pgm plus manifest.jsonl under `out_dir`.
/// Paths in the manifest are relative to `input_root`. A failing stack is
/// recorded and skipped; output order follows the manifest.
PreprocessReport preprocess_corpus(const std::vector<ManifestEntry>& manifest,
                                   const std::filesystem::path& input_root,
                                   const std::filesystem::path& out_dir,
                                   const PreprocessConfig& cfg);

}  // namespace embryoforge
