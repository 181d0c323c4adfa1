#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "embryoforge/imaging.hpp"

namespace embryoforge {

enum class EntryRole { raw_stack, patch };

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  EntryRole role = EntryRole::patch;
  int embryo_id = 0;
  int time_min = 0;
  std::optional<int> slice_index;
  std::optional<BoundingBox> bbox;
  std::optional<int> label;
  std::uint64_t seed_used = 0;
  /// Raw stacks only.
  std::optional<int> n_slices;
  /// Patch origin in the source slice.
  std::optional<int> origin_x;
  std::optional<int> origin_y;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

std::string to_json_line(const ManifestEntry& entry);
ManifestEntry parse_json_line(const std::string& line);

/// One JSON object per line, entry order preserved.
std::string serialize_manifest(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> parse_manifest(const std::string& text);

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
/// Fails on duplicate paths, and on missing files when `check_files` is set.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path, bool check_files = true);

}  // namespace embryoforge
