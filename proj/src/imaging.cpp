#include "embryoforge/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace embryoforge {

Image Image::blank(int width, int height, int bit_depth) {
  if (width < 1 || height < 1) throw std::invalid_argument("image dimensions must be positive");
  if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("bit depth must be 8 or 16");
  return Image{width, height, bit_depth,
               std::vector<std::uint16_t>(static_cast<std::size_t>(width) * height, 0)};
}

ImageStack ImageStack::blank(int width, int height, int n_slices, int bit_depth) {
  if (width < 1 || height < 1 || n_slices < 1) {
    throw std::invalid_argument("stack dimensions must be positive");
  }
  if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("bit depth must be 8 or 16");
  ImageStack s;
  s.width = width;
  s.height = height;
  s.n_slices = n_slices;
  s.bit_depth = bit_depth;
  s.voxels.assign(static_cast<std::size_t>(width) * height * n_slices, 0);
  return s;
}

Image ImageStack::slice(int z) const {
  if (z < 0 || z >= n_slices) {
    throw std::out_of_range("slice " + std::to_string(z) + " outside stack of " +
                            std::to_string(n_slices));
  }
  Image img = Image::blank(width, height, bit_depth);
  const auto begin = voxels.begin() + static_cast<std::ptrdiff_t>(z) * width * height;
  std::copy(begin, begin + static_cast<std::ptrdiff_t>(width) * height, img.pixels.begin());
  return img;
}

void ImageStack::set_slice(int z, const Image& image) {
  if (image.width != width || image.height != height || z < 0 || z >= n_slices) {
    throw std::invalid_argument("slice does not fit stack");
  }
  std::copy(image.pixels.begin(), image.pixels.end(),
            voxels.begin() + static_cast<std::ptrdiff_t>(z) * width * height);
}

std::uint16_t quantize(double value, int max_value) {
  const double r = std::round(value);  // half away from zero
  return static_cast<std::uint16_t>(std::clamp(r, 0.0, static_cast<double>(max_value)));
}

ImageStack median_filter_3d(const ImageStack& stack, int radius) {
  if (radius < 1) throw std::invalid_argument("median radius must be >= 1");
  if (stack.n_slices < 1) throw std::invalid_argument("median filter needs at least one slice");
  ImageStack out = stack;
  const int side = 2 * radius + 1;
  std::vector<std::uint16_t> window(static_cast<std::size_t>(side) * side * side);
  const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
  for (int z = 0; z < stack.n_slices; ++z)
    for (int y = 0; y < stack.height; ++y)
      for (int x = 0; x < stack.width; ++x) {
        std::size_t k = 0;
        for (int dz = -radius; dz <= radius; ++dz) {
          const int zz = std::clamp(z + dz, 0, stack.n_slices - 1);
          for (int dy = -radius; dy <= radius; ++dy) {
            const int yy = std::clamp(y + dy, 0, stack.height - 1);
            for (int dx = -radius; dx <= radius; ++dx) {
              window[k++] = stack.at(std::clamp(x + dx, 0, stack.width - 1), yy, zz);
            }
          }
        }
        std::nth_element(window.begin(), mid, window.end());
        out.at(x, y, z) = *mid;
      }
  return out;
}

int percentile_nearest_rank(const Image& image, double p) {
  if (image.pixels.empty()) throw std::invalid_argument("percentile of an empty image");
  std::vector<std::uint16_t> sorted = image.pixels;
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::int64_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::int64_t>(rank, 1, static_cast<std::int64_t>(sorted.size()));
  return sorted[static_cast<std::size_t>(rank - 1)];
}

Image adjust_brightness_range(const Image& image, double p_low, double p_high) {
  if (!(p_low >= 0.0 && p_low < p_high && p_high <= 100.0)) {
    throw std::invalid_argument("percentiles must satisfy 0 <= p_low < p_high <= 100");
  }
  const int lo = percentile_nearest_rank(image, p_low);
  const int hi = percentile_nearest_rank(image, p_high);
  Image out = image;
  if (lo == hi) {
    std::fill(out.pixels.begin(), out.pixels.end(), 0);
    return out;
  }
  const int top = image.max_value();
  const double span = hi - lo;
  for (auto& v : out.pixels) v = quantize((static_cast<double>(v) - lo) * top / span, top);
  return out;
}

void check_extraction(const ImageStack& stack, const BoundingBox& bbox, int slice_lo, int slice_hi,
                      int n_per_slice, int patch_size) {
  const std::string box = "bbox (" + std::to_string(bbox.x) + "," + std::to_string(bbox.y) + "," +
                          std::to_string(bbox.w) + "," + std::to_string(bbox.h) + ")";
  if (patch_size < 1) throw std::invalid_argument("patch size must be positive");
  if (bbox.w < patch_size || bbox.h < patch_size) {
    throw std::invalid_argument(box + " is smaller than patch size " + std::to_string(patch_size));
  }
  if (bbox.x < 0 || bbox.y < 0 || bbox.x + bbox.w > stack.width || bbox.y + bbox.h > stack.height) {
    throw std::invalid_argument(box + " extends outside the " + std::to_string(stack.width) + "x" +
                                std::to_string(stack.height) + " stack");
  }
  if (slice_lo < 0 || slice_lo > slice_hi || slice_hi >= stack.n_slices) {
    throw std::invalid_argument("slice range " + std::to_string(slice_lo) + ":" +
                                std::to_string(slice_hi) + " invalid for " +
                                std::to_string(stack.n_slices) + " slices");
  }
  if (n_per_slice < 0) throw std::invalid_argument("patches per slice must be >= 0");
}

std::vector<Patch> extract_patches(const ImageStack& stack, const BoundingBox& bbox, int slice_lo,
                                   int slice_hi, int n_per_slice, int patch_size, Rng& rng) {
  check_extraction(stack, bbox, slice_lo, slice_hi, n_per_slice, patch_size);
  const auto span_x = static_cast<std::uint64_t>(bbox.w - patch_size + 1);
  const auto span_y = static_cast<std::uint64_t>(bbox.h - patch_size + 1);
  std::vector<Patch> out;
  for (int z = slice_lo; z <= slice_hi; ++z) {
    for (int k = 0; k < n_per_slice; ++k) {
      const int ox = bbox.x + static_cast<int>(rng.below(span_x));
      const int oy = bbox.y + static_cast<int>(rng.below(span_y));
      Patch p;
      p.image = Image::blank(patch_size, patch_size, stack.bit_depth);
      for (int y = 0; y < patch_size; ++y)
        for (int x = 0; x < patch_size; ++x) p.image.at(x, y) = stack.at(ox + x, oy + y, z);
      p.provenance = {stack.meta.embryo_id, stack.meta.time_min, z, ox, oy};
      out.push_back(std::move(p));
    }
  }
  return out;
}

Image flip_horizontal(const Image& image) {
  Image out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) out.at(x, y) = image.at(image.width - 1 - x, y);
  return out;
}

Image flip_vertical(const Image& image) {
  Image out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) out.at(x, y) = image.at(x, image.height - 1 - y);
  return out;
}

Image adjust_photometric(const Image& image, double brightness, double contrast) {
  double mean = 0.0;
  for (auto v : image.pixels) mean += v;
  mean /= static_cast<double>(image.pixels.size());
  Image out = image;
  for (auto& v : out.pixels) {
    v = quantize(mean + contrast * (static_cast<double>(v) - mean) + brightness, image.max_value());
  }
  return out;
}

Patch augment(const Patch& patch, Rng& rng, const AugmentConfig& cfg) {
  const bool fh = rng.bernoulli(0.5);
  const bool fv = rng.bernoulli(0.5);
  const double b = rng.uniform(-1.0, 1.0) * cfg.brightness_delta * patch.image.max_value();
  const double c = 1.0 + rng.uniform(-1.0, 1.0) * cfg.contrast_delta;
  Patch out = patch;
  if (cfg.flip_horizontal && fh) out.image = flip_horizontal(out.image);
  if (cfg.flip_vertical && fv) out.image = flip_vertical(out.image);
  if (cfg.brightness_delta != 0.0 || cfg.contrast_delta != 0.0) {
    out.image = adjust_photometric(out.image, b, c);
  }
  return out;
}

Tensor normalize_for_net(const Image& image, DType dtype) {
  const double top = image.max_value();
  std::vector<double> v(image.pixels.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = image.pixels[i] / top * 2.0 - 1.0;
  return Tensor::from_vector({1, image.height, image.width}, std::move(v), dtype);
}

Image denormalize(const Tensor& tensor, int bit_depth) {
  const auto& s = tensor.shape();
  if (!(s.size() == 2 || (s.size() == 3 && s[0] == 1))) {
    throw DimensionError("denormalize expects [1,H,W] or [H,W], got " + shape_str(s));
  }
  const int h = static_cast<int>(s[s.size() - 2]);
  const int w = static_cast<int>(s[s.size() - 1]);
  Image img = Image::blank(w, h, bit_depth);
  const double top = img.max_value();
  const auto values = tensor.to_vector();
  for (std::size_t i = 0; i < values.size(); ++i) {
    img.pixels[i] = quantize((std::clamp(values[i], -1.0, 1.0) + 1.0) / 2.0 * top, img.max_value());
  }
  return img;
}

Tensor batch_images(const std::vector<const Image*>& images, DType dtype) {
  if (images.empty()) throw std::invalid_argument("cannot batch zero images");
  const int h = images[0]->height;
  const int w = images[0]->width;
  std::vector<double> v;
  v.reserve(images.size() * static_cast<std::size_t>(h) * w);
  for (const auto* img : images) {
    if (img->height != h || img->width != w) throw DimensionError("images in a batch differ in size");
    const double top = img->max_value();
    for (auto p : img->pixels) v.push_back(p / top * 2.0 - 1.0);
  }
  return Tensor::from_vector({static_cast<std::int64_t>(images.size()), 1, h, w}, std::move(v), dtype);
}

std::vector<Image> unbatch_images(const Tensor& batch, int bit_depth) {
  const auto& s = batch.shape();
  if (s.size() != 4 || s[1] != 1) throw DimensionError("unbatch_images expects [N,1,H,W], got " + shape_str(s));
  const auto values = batch.to_vector();
  const std::size_t plane = static_cast<std::size_t>(s[2] * s[3]);
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(s[0]));
  for (std::int64_t n = 0; n < s[0]; ++n) {
    std::vector<double> v(values.begin() + static_cast<std::ptrdiff_t>(n * plane),
                          values.begin() + static_cast<std::ptrdiff_t>((n + 1) * plane));
    out.push_back(denormalize(Tensor::from_vector({s[2], s[3]}, std::move(v)), bit_depth));
  }
  return out;
}

}  // namespace embryoforge
