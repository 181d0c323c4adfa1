#include "embryoforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "embryoforge/pgm.hpp"

namespace embryoforge {

void PreprocessConfig::validate() const {
  if (patch_size < 1) throw std::invalid_argument("patch size must be positive");
  if (slice_lo < 0 || slice_hi < slice_lo)
    throw std::invalid_argument("slice range " + std::to_string(slice_lo) + ":" +
                                std::to_string(slice_hi) + " is empty or negative");
  if (per_slice < 0) throw std::invalid_argument("patches per slice must be >= 0");
  if (median_radius < 0) throw std::invalid_argument("median radius must be >= 0");
  if (!(0 <= p_low && p_low < p_high && p_high <= 100))
    throw std::invalid_argument("brightness percentiles must satisfy 0 <= low < high <= 100");
  if (threads < 0) throw std::invalid_argument("thread count must be >= 0");
}

std::pair<int, int> parse_slice_range(const std::string& text) {
  const auto colon = text.find(':');
  auto bad = [&] { return std::invalid_argument("slice range '" + text + "' is not lo:hi"); };
  if (colon == std::string::npos) throw bad();
  try {
    std::size_t used_lo = 0, used_hi = 0;
    const std::string lo_text = text.substr(0, colon), hi_text = text.substr(colon + 1);
    const int lo = std::stoi(lo_text, &used_lo);
    const int hi = std::stoi(hi_text, &used_hi);
    if (used_lo != lo_text.size() || used_hi != hi_text.size()) throw bad();
    if (lo < 0 || hi < lo) throw bad();
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw bad();
  }
}

int worker_count(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("EMBRYOFORGE_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) n = std::min<int>(n, static_cast<int>(cap));
  }
  return n;
}

std::uint64_t stack_seed(std::uint64_t master, int embryo_id, int time_min) {
  return derive_seed(master, "patches-e" + std::to_string(embryo_id) + "-t" + std::to_string(time_min));
}

ImageStack denoise_region(const ImageStack& stack, const BoundingBox& bbox,
                          const PreprocessConfig& cfg) {
  check_extraction(stack, bbox, cfg.slice_lo, cfg.slice_hi, cfg.per_slice, cfg.patch_size);
  const int r = cfg.median_radius;
  // Filter a sub-volume with an r-voxel margin: inside the region every
  // neighbourhood is either complete or clamped at a true border, so the
  // result equals filtering the whole stack.
  const int x0 = std::max(0, bbox.x - r), x1 = std::min(stack.width, bbox.x + bbox.w + r);
  const int y0 = std::max(0, bbox.y - r), y1 = std::min(stack.height, bbox.y + bbox.h + r);
  const int z0 = std::max(0, cfg.slice_lo - r), z1 = std::min(stack.n_slices, cfg.slice_hi + 1 + r);
  ImageStack sub = ImageStack::blank(x1 - x0, y1 - y0, z1 - z0, stack.bit_depth);
  for (int z = z0; z < z1; ++z)
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) sub.at(x - x0, y - y0, z - z0) = stack.at(x, y, z);
  const ImageStack filtered = r > 0 ? median_filter_3d(sub, r) : sub;

  ImageStack out = ImageStack::blank(stack.width, stack.height, stack.n_slices, stack.bit_depth);
  out.meta = stack.meta;
  for (int z = cfg.slice_lo; z <= cfg.slice_hi; ++z) {
    Image region = Image::blank(bbox.w, bbox.h, stack.bit_depth);
    for (int y = 0; y < bbox.h; ++y)
      for (int x = 0; x < bbox.w; ++x)
        region.at(x, y) = filtered.at(bbox.x + x - x0, bbox.y + y - y0, z - z0);
    const Image stretched = adjust_brightness_range(region, cfg.p_low, cfg.p_high);
    for (int y = 0; y < bbox.h; ++y)
      for (int x = 0; x < bbox.w; ++x) out.at(bbox.x + x, bbox.y + y, z) = stretched.at(x, y);
  }
  return out;
}

std::vector<Patch> preprocess_stack(const ImageStack& stack, const BoundingBox& bbox,
                                    const PreprocessConfig& cfg) {
  const ImageStack clean = denoise_region(stack, bbox, cfg);
  Rng rng(stack_seed(cfg.seed, stack.meta.embryo_id, stack.meta.time_min));
  return extract_patches(clean, bbox, cfg.slice_lo, cfg.slice_hi, cfg.per_slice, cfg.patch_size,
                         rng);
}

namespace {

std::string patch_name(const Provenance& p, int k) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "patches/e%03d_t%03d_z%02d_k%d.pgm", p.embryo_id, p.time_min,
                p.slice_index, k);
  return buf;
}

struct StackOutcome {
  std::vector<ManifestEntry> entries;
  std::string error;
};

StackOutcome process_entry(const ManifestEntry& entry, const std::filesystem::path& root,
                           const std::filesystem::path& out_dir, const PreprocessConfig& cfg) {
  StackOutcome res;
  try {
    if (!entry.bbox) throw std::invalid_argument("missing bbox");
    if (!entry.n_slices) throw std::invalid_argument("missing n_slices");
    ImageStack stack = read_stack_pgm(root / entry.path, *entry.n_slices);
    stack.meta = {entry.embryo_id, entry.time_min};
    const auto patches = preprocess_stack(stack, *entry.bbox, cfg);
    const std::uint64_t seed = stack_seed(cfg.seed, entry.embryo_id, entry.time_min);
    int k = 0, last_slice = -1;
    for (const auto& p : patches) {
      k = p.provenance.slice_index == last_slice ? k + 1 : 0;
      last_slice = p.provenance.slice_index;
      ManifestEntry e;
      e.path = patch_name(p.provenance, k);
      e.role = EntryRole::patch;
      e.embryo_id = p.provenance.embryo_id;
      e.time_min = p.provenance.time_min;
      e.slice_index = p.provenance.slice_index;
      e.bbox = entry.bbox;
      e.seed_used = seed;
      e.origin_x = p.provenance.origin_x;
      e.origin_y = p.provenance.origin_y;
      write_pgm(out_dir / e.path, p.image);
      res.entries.push_back(std::move(e));
    }
  } catch (const std::exception& ex) {
    res.entries.clear();
    res.error = ex.what();
  }
  return res;
}

}  // namespace

PreprocessReport preprocess_corpus(const std::vector<ManifestEntry>& manifest,
                                   const std::filesystem::path& input_root,
                                   const std::filesystem::path& out_dir,
                                   const PreprocessConfig& cfg) {
  cfg.validate();
  std::vector<const ManifestEntry*> stacks;
  for (const auto& e : manifest)
    if (e.role == EntryRole::raw_stack) stacks.push_back(&e);
  std::filesystem::create_directories(out_dir / "patches");

  std::vector<StackOutcome> outcomes(stacks.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < stacks.size(); i = next++)
      outcomes[i] = process_entry(*stacks[i], input_root, out_dir, cfg);
  };
  const int n_workers = std::min<int>(worker_count(cfg.threads),
                                      static_cast<int>(std::max<std::size_t>(1, stacks.size())));
  if (n_workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(work);
  }

  PreprocessReport report;
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    auto& o = outcomes[i];
    if (!o.error.empty()) {
      report.failures.push_back({stacks[i]->path, o.error});
      continue;
    }
    ++report.stacks_ok;
    for (auto& e : o.entries) report.patches.push_back(std::move(e));
  }
  write_manifest(out_dir / "manifest.jsonl", report.patches);
  return report;
}

}  // namespace embryoforge
