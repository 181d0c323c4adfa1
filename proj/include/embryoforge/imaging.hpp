#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "embryoforge/rng.hpp"
#include "embryoforge/tensor.hpp"

namespace embryoforge {

/// 2-D grayscale raster, row-major, samples in [0, 2^bit_depth - 1].
struct Image {
  int width = 0;
  int height = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> pixels;

  static Image blank(int width, int height, int bit_depth = 8);
  int max_value() const { return (1 << bit_depth) - 1; }
  std::uint16_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint16_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const Image&, const Image&) = default;
};

struct StackMeta {
  int embryo_id = 0;
  int time_min = 0;

  friend bool operator==(const StackMeta&, const StackMeta&) = default;
};

/// Pseudo-3-D microscopy volume, voxels row-major as [slice][y][x].
struct ImageStack {
  int width = 0;
  int height = 0;
  int n_slices = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> voxels;
  StackMeta meta;

  static ImageStack blank(int width, int height, int n_slices, int bit_depth = 8);
  std::uint16_t at(int x, int y, int z) const {
    return voxels[(static_cast<std::size_t>(z) * height + y) * width + x];
  }
  std::uint16_t& at(int x, int y, int z) {
    return voxels[(static_cast<std::size_t>(z) * height + y) * width + x];
  }
  Image slice(int z) const;
  void set_slice(int z, const Image& image);

  friend bool operator==(const ImageStack&, const ImageStack&) = default;
};

struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Provenance {
  int embryo_id = 0;
  int time_min = 0;
  int slice_index = 0;
  int origin_x = 0;
  int origin_y = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Patch {
  Image image;
  Provenance provenance;
  std::optional<int> label;
};

/// Rounds half away from zero and clamps into [0, max_value].
std::uint16_t quantize(double value, int max_value);

/// Each voxel becomes the median of its (2r+1)^3 neighbourhood; coordinates
/// outside the volume are clamped to the border.
ImageStack median_filter_3d(const ImageStack& stack, int radius = 1);

/// Nearest-rank percentile of the image's samples, p in [0, 100].
int percentile_nearest_rank(const Image& image, double p);

/// Linear stretch of the [p_low, p_high] percentile range onto the full
/// intensity range. A constant image maps to all zeros.
Image adjust_brightness_range(const Image& image, double p_low = 1.0, double p_high = 99.0);

/// Throws invalid_argument if extract_patches would reject these arguments.
void check_extraction(const ImageStack& stack, const BoundingBox& bbox, int slice_lo, int slice_hi,
                      int n_per_slice, int patch_size);

/// n_per_slice random crops per slice in [slice_lo, slice_hi], with origins
/// uniform over the positions that keep the crop inside `bbox`.
std::vector<Patch> extract_patches(const ImageStack& stack, const BoundingBox& bbox, int slice_lo,
                                   int slice_hi, int n_per_slice, int patch_size, Rng& rng);

struct AugmentConfig {
  bool flip_horizontal = true;
  bool flip_vertical = true;
  /// Brightness offset drawn from +-brightness_delta * max_value.
  double brightness_delta = 0.10;
  /// Contrast factor drawn from [1 - contrast_delta, 1 + contrast_delta].
  double contrast_delta = 0.2;

  static AugmentConfig disabled() { return {false, false, 0.0, 0.0}; }
};

Image flip_horizontal(const Image& image);
Image flip_vertical(const Image& image);
/// v -> mean + contrast * (v - mean) + brightness, rounded and clamped.
Image adjust_photometric(const Image& image, double brightness, double contrast);

/// Random mirror flips plus brightness/contrast jitter. Always consumes the
/// same number of draws, whatever the toggles.
Patch augment(const Patch& patch, Rng& rng, const AugmentConfig& cfg = {});

/// [0, max_value] -> [-1, 1] as a [1,H,W] tensor.
Tensor normalize_for_net(const Image& image, DType dtype = DType::f32);
/// Inverse of normalize_for_net for a [1,H,W] or [H,W] tensor; values are
/// clamped to [-1, 1] first.
Image denormalize(const Tensor& tensor, int bit_depth = 8);

/// Stacks images into a [N,1,H,W] batch.
Tensor batch_images(const std::vector<const Image*>& images, DType dtype = DType::f32);
/// Splits a [N,1,H,W] batch back into images.
std::vector<Image> unbatch_images(const Tensor& batch, int bit_depth = 8);

}  // namespace embryoforge
