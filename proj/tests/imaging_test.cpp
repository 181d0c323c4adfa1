#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "embryoforge/imaging.hpp"
#include "oracles.hpp"

using namespace embryoforge;

namespace {

Image random_image(int w, int h, Rng& rng, int bit_depth = 8) {
  Image img = Image::blank(w, h, bit_depth);
  for (auto& p : img.pixels) p = static_cast<std::uint16_t>(rng.below(img.max_value() + 1));
  return img;
}

}  // namespace

TEST(MedianFilter, CenterOfOneToTwentySeven) {
  ImageStack s = ImageStack::blank(3, 3, 3);
  std::iota(s.voxels.begin(), s.voxels.end(), 1);
  EXPECT_EQ(median_filter_3d(s).at(1, 1, 1), 14);
}

TEST(MedianFilter, ConstantVolumeUnchanged) {
  ImageStack s = ImageStack::blank(4, 5, 3);
  std::fill(s.voxels.begin(), s.voxels.end(), 77);
  EXPECT_EQ(median_filter_3d(s), s);
}

TEST(MedianFilter, MatchesFullSortOracle) {
  Rng rng(3);
  for (int r : {1, 2}) {
    ImageStack s = ImageStack::blank(5, 6, 7);
    for (auto& v : s.voxels) v = static_cast<std::uint16_t>(rng.below(256));
    const auto got = median_filter_3d(s, r);
    EXPECT_EQ(got.voxels, oracle::median_3d(s.voxels, 5, 6, 7, r));
    const auto [lo, hi] = std::minmax_element(s.voxels.begin(), s.voxels.end());
    for (auto v : got.voxels) {
      EXPECT_GE(v, *lo);
      EXPECT_LE(v, *hi);
    }
  }
}

TEST(MedianFilter, RejectsBadRadius) {
  EXPECT_THROW(median_filter_3d(ImageStack::blank(2, 2, 1), 0), std::invalid_argument);
}

TEST(Brightness, ThreeLevelExample) {
  Image img = Image::blank(3, 1);
  img.pixels = {0, 50, 100};
  EXPECT_EQ(adjust_brightness_range(img, 0, 100).pixels, (std::vector<std::uint16_t>{0, 128, 255}));
}

TEST(Brightness, FullRangeUnchangedAndConstantZero) {
  Rng rng(1);
  Image img = random_image(16, 16, rng);
  img.pixels[0] = 0;
  img.pixels[1] = 255;
  EXPECT_EQ(adjust_brightness_range(img, 0, 100), img);
  Image flat = Image::blank(4, 4);
  std::fill(flat.pixels.begin(), flat.pixels.end(), 90);
  for (auto v : adjust_brightness_range(flat).pixels) EXPECT_EQ(v, 0);
  EXPECT_THROW(adjust_brightness_range(img, 50, 50), std::invalid_argument);
}

TEST(Brightness, NearestRankPercentile) {
  Image img = Image::blank(10, 1);
  for (int i = 0; i < 10; ++i) img.pixels[i] = static_cast<std::uint16_t>(10 * (10 - i));
  EXPECT_EQ(percentile_nearest_rank(img, 0), 10);
  EXPECT_EQ(percentile_nearest_rank(img, 25), 30);  // ceil(2.5) = 3rd smallest
  EXPECT_EQ(percentile_nearest_rank(img, 100), 100);
}

TEST(Patches, CountsProvenanceAndContainment) {
  Rng rng(5);
  ImageStack s = ImageStack::blank(40, 30, 14);
  for (auto& v : s.voxels) v = static_cast<std::uint16_t>(rng.below(256));
  s.meta = {7, 63};
  const BoundingBox box{3, 2, 30, 20};
  Rng prng(9);
  auto patches = extract_patches(s, box, 9, 13, 2, 16, prng);
  ASSERT_EQ(patches.size(), 10u);
  for (const auto& p : patches) {
    EXPECT_EQ(p.provenance.embryo_id, 7);
    EXPECT_EQ(p.provenance.time_min, 63);
    EXPECT_GE(p.provenance.slice_index, 9);
    EXPECT_LE(p.provenance.slice_index, 13);
    EXPECT_GE(p.provenance.origin_x, box.x);
    EXPECT_GE(p.provenance.origin_y, box.y);
    EXPECT_LE(p.provenance.origin_x + 16, box.x + box.w);
    EXPECT_LE(p.provenance.origin_y + 16, box.y + box.h);
    EXPECT_EQ(p.image.at(3, 4), s.at(p.provenance.origin_x + 3, p.provenance.origin_y + 4,
                                     p.provenance.slice_index));
  }
  Rng again(9);
  auto twin = extract_patches(s, box, 9, 13, 2, 16, again);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    EXPECT_EQ(patches[i].provenance, twin[i].provenance);
  }
}

TEST(Patches, ExactBoxForcesCorner) {
  ImageStack s = ImageStack::blank(20, 20, 2);
  Rng rng(1);
  for (const auto& p : extract_patches(s, {4, 5, 8, 8}, 0, 1, 3, 8, rng)) {
    EXPECT_EQ(p.provenance.origin_x, 4);
    EXPECT_EQ(p.provenance.origin_y, 5);
  }
}

TEST(Patches, OriginsUniformOverTwoPositions) {
  ImageStack s = ImageStack::blank(10, 10, 1);
  Rng rng(2024);
  const auto patches = extract_patches(s, {0, 0, 9, 8}, 0, 0, 10000, 8, rng);
  const auto left = std::count_if(patches.begin(), patches.end(),
                                  [](const Patch& p) { return p.provenance.origin_x == 0; });
  const double f = static_cast<double>(left) / 10000.0;
  EXPECT_GE(f, 0.47);
  EXPECT_LE(f, 0.53);
}

TEST(Patches, SmallBoxErrorNamesBoxAndSize) {
  ImageStack s = ImageStack::blank(64, 64, 1);
  Rng rng(1);
  try {
    extract_patches(s, {1, 2, 30, 40}, 0, 0, 1, 32, rng);
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(1,2,30,40)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("32"), std::string::npos) << msg;
  }
}

TEST(Augment, DisabledIsIdentity) {
  Rng rng(4);
  Patch p{random_image(12, 9, rng), {}, 1};
  Rng arng(8);
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(augment(p, arng, AugmentConfig::disabled()).image, p.image);
  }
}

TEST(Augment, FlipsAreInvolutionsAndPreserveMultiset) {
  Rng rng(6);
  Image img = random_image(7, 5, rng);
  EXPECT_EQ(flip_horizontal(flip_horizontal(img)), img);
  EXPECT_EQ(flip_vertical(flip_vertical(img)), img);
  auto a = flip_horizontal(img).pixels;
  auto b = img.pixels;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
  EXPECT_EQ(flip_horizontal(img).at(0, 2), img.at(6, 2));
  EXPECT_EQ(flip_vertical(img).at(3, 0), img.at(3, 4));
}

TEST(Augment, BrightnessShiftIsExact) {
  Rng rng(7);
  Image img = random_image(16, 16, rng);
  const Image out = adjust_photometric(img, 10.0, 1.0);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    if (img.pixels[i] + 10 <= 255) {
      EXPECT_EQ(out.pixels[i], img.pixels[i] + 10);
    } else {
      EXPECT_EQ(out.pixels[i], 255);
    }
  }
}

TEST(Augment, OutputsStayInRangeAndStreamIsFixedLength) {
  Rng rng(11);
  Patch p{random_image(16, 16, rng, 16), {}, {}};
  Rng a(3), b(3);
  for (int i = 0; i < 50; ++i) {
    const auto out = augment(p, a);
    EXPECT_EQ(out.image.pixels.size(), p.image.pixels.size());
    augment(p, b, AugmentConfig::disabled());
  }
  // Toggling features must not shift the stream.
  EXPECT_EQ(a, b);
}

TEST(Normalize, EndpointsMidpointRoundtrip) {
  Image img = Image::blank(256, 1);
  for (int i = 0; i < 256; ++i) img.pixels[i] = static_cast<std::uint16_t>(i);
  const Tensor t = normalize_for_net(img, DType::f64);
  EXPECT_EQ(t.shape(), (Shape{1, 1, 256}));
  EXPECT_DOUBLE_EQ(t.value(0), -1.0);
  EXPECT_DOUBLE_EQ(t.value(255), 1.0);
  EXPECT_LT(std::abs(t.value(127)), 1.0 / 255.0);
  EXPECT_LT(std::abs(t.value(128)), 1.0 / 255.0);
  EXPECT_EQ(denormalize(t), img);
  // Half a quantization step tolerance for arbitrary values.
  std::vector<double> v{-1.0, -0.3, 0.0, 0.77, 1.0};
  const Image q = denormalize(Tensor::from_vector({1, 1, 5}, v));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double back = q.pixels[i] / 255.0 * 2.0 - 1.0;
    EXPECT_LE(std::abs(back - v[i]), 1.0 / 255.0 + 1e-12);
  }
}
