#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "embryoforge/imaging.hpp"

namespace embryoforge {

/// Malformed or truncated file; `offset` is the byte position of the fault.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Binary P5 graymap. Maxval 255 gives an 8-bit image, 65535 a 16-bit one
/// with big-endian samples.
Image decode_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const Image& image);

Image read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& image);

/// Raw stacks are stored as one graymap with the slices stacked vertically.
void write_stack_pgm(const std::filesystem::path& path, const ImageStack& stack);
ImageStack read_stack_pgm(const std::filesystem::path& path, int n_slices);

/// Tiles images row by row, `columns` per row, with `separator`-pixel gaps
/// filled at the maximum intensity.
Image montage(std::span<const Image> images, int columns, int separator = 2);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace embryoforge
