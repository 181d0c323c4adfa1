#include "embryoforge/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace embryoforge {

ParseError::ParseError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}

namespace {

struct HeaderReader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  void skip_space() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  }

  long number(const char* field) {
    skip_space();
    const std::size_t start = pos;
    long value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1'000'000'000L) throw ParseError(std::string(field) + " too large", start);
      ++pos;
    }
    if (pos == start) throw ParseError(std::string("expected ") + field, start);
    return value;
  }
};

}  // namespace

Image decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw ParseError("not a binary graymap (missing P5 magic)", 0);
  }
  HeaderReader r{bytes, 2};
  const long width = r.number("width");
  const long height = r.number("height");
  const std::size_t maxval_at = (r.skip_space(), r.pos);
  const long maxval = r.number("maxval");
  if (width < 1 || height < 1) throw ParseError("non-positive dimensions", maxval_at);
  if (maxval != 255 && maxval != 65535) {
    throw ParseError("maxval " + std::to_string(maxval) + " not in {255, 65535}", maxval_at);
  }
  if (r.pos >= bytes.size() || !std::isspace(bytes[r.pos])) {
    throw ParseError("missing whitespace after header", r.pos);
  }
  ++r.pos;
  const int bps = maxval == 255 ? 1 : 2;
  const auto count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - r.pos < count * bps) {
    throw ParseError("truncated raster: need " + std::to_string(count * bps) + " bytes, have " +
                         std::to_string(bytes.size() - r.pos),
                     bytes.size());
  }
  Image img = Image::blank(static_cast<int>(width), static_cast<int>(height), bps == 1 ? 8 : 16);
  const auto* raster = bytes.data() + r.pos;
  for (std::size_t i = 0; i < count; ++i) {
    img.pixels[i] = bps == 1 ? raster[i]
                             : static_cast<std::uint16_t>((raster[2 * i] << 8) | raster[2 * i + 1]);
  }
  return img;
}

std::vector<std::uint8_t> encode_pgm(const Image& image) {
  const int maxval = image.bit_depth == 8 ? 255 : 65535;
  const std::string header = "P5\n" + std::to_string(image.width) + " " +
                             std::to_string(image.height) + "\n" + std::to_string(maxval) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.pixels.size() * (image.bit_depth == 8 ? 1 : 2));
  for (auto p : image.pixels) {
    if (p > maxval) throw std::invalid_argument("pixel exceeds bit depth");
    if (image.bit_depth == 8) {
      out.push_back(static_cast<std::uint8_t>(p));
    } else {
      out.push_back(static_cast<std::uint8_t>(p >> 8));
      out.push_back(static_cast<std::uint8_t>(p & 0xff));
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Image read_pgm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_pgm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

void write_pgm(const std::filesystem::path& path, const Image& image) {
  write_file(path, encode_pgm(image));
}

void write_stack_pgm(const std::filesystem::path& path, const ImageStack& stack) {
  Image tall{stack.width, stack.height * stack.n_slices, stack.bit_depth, stack.voxels};
  write_pgm(path, tall);
}

ImageStack read_stack_pgm(const std::filesystem::path& path, int n_slices) {
  Image tall = read_pgm(path);
  if (n_slices < 1 || tall.height % n_slices != 0) {
    throw std::runtime_error(path.string() + ": height " + std::to_string(tall.height) +
                             " is not a multiple of " + std::to_string(n_slices) + " slices");
  }
  ImageStack s;
  s.width = tall.width;
  s.height = tall.height / n_slices;
  s.n_slices = n_slices;
  s.bit_depth = tall.bit_depth;
  s.voxels = std::move(tall.pixels);
  return s;
}

Image montage(std::span<const Image> images, int columns, int separator) {
  if (images.empty()) throw std::invalid_argument("montage of zero images");
  if (columns < 1 || separator < 0) throw std::invalid_argument("bad montage layout");
  const int w = images[0].width;
  const int h = images[0].height;
  const int bd = images[0].bit_depth;
  const int cols = std::min<int>(columns, static_cast<int>(images.size()));
  const int rows = static_cast<int>((images.size() + cols - 1) / cols);
  Image out = Image::blank(cols * w + (cols - 1) * separator, rows * h + (rows - 1) * separator, bd);
  std::fill(out.pixels.begin(), out.pixels.end(), static_cast<std::uint16_t>(out.max_value()));
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (img.width != w || img.height != h || img.bit_depth != bd) {
      throw std::invalid_argument("montage images differ in size or depth");
    }
    const int ox = static_cast<int>(i % cols) * (w + separator);
    const int oy = static_cast<int>(i / cols) * (h + separator);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(ox + x, oy + y) = img.at(x, y);
  }
  return out;
}

}  // namespace embryoforge
