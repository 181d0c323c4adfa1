#include "embryoforge/manifest.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

#include "embryoforge/pgm.hpp"
#include "json.hpp"

namespace embryoforge {

using json = nlohmann::ordered_json;

std::string to_json_line(const ManifestEntry& e) {
  json j;
  j["path"] = e.path;
  j["role"] = e.role == EntryRole::raw_stack ? "raw_stack" : "patch";
  j["embryo_id"] = e.embryo_id;
  j["time_min"] = e.time_min;
  j["slice_index"] = e.slice_index ? json(*e.slice_index) : json(nullptr);
  j["bbox"] = e.bbox ? json::array({e.bbox->x, e.bbox->y, e.bbox->w, e.bbox->h}) : json(nullptr);
  j["label"] = e.label ? json(*e.label) : json(nullptr);
  j["seed_used"] = e.seed_used;
  if (e.n_slices) j["n_slices"] = *e.n_slices;
  if (e.origin_x && e.origin_y) j["origin"] = json::array({*e.origin_x, *e.origin_y});
  return j.dump();
}

namespace {

std::optional<int> opt_int(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<int>();
}

}  // namespace

ManifestEntry parse_json_line(const std::string& line) {
  const json j = json::parse(line);
  ManifestEntry e;
  e.path = j.at("path").get<std::string>();
  const auto role = j.at("role").get<std::string>();
  if (role == "raw_stack") {
    e.role = EntryRole::raw_stack;
  } else if (role == "patch") {
    e.role = EntryRole::patch;
  } else {
    throw std::invalid_argument("unknown manifest role '" + role + "'");
  }
  e.embryo_id = j.at("embryo_id").get<int>();
  e.time_min = j.at("time_min").get<int>();
  e.slice_index = opt_int(j, "slice_index");
  if (j.contains("bbox") && !j.at("bbox").is_null()) {
    const auto& b = j.at("bbox");
    if (!b.is_array() || b.size() != 4) throw std::invalid_argument("bbox must be [x,y,w,h]");
    e.bbox = BoundingBox{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
  }
  e.label = opt_int(j, "label");
  e.seed_used = j.value("seed_used", std::uint64_t{0});
  e.n_slices = opt_int(j, "n_slices");
  if (j.contains("origin")) {
    e.origin_x = j.at("origin").at(0).get<int>();
    e.origin_y = j.at("origin").at(1).get<int>();
  }
  return e;
}

std::string serialize_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    out += to_json_line(e);
    out += '\n';
  }
  return out;
}

std::vector<ManifestEntry> parse_manifest(const std::string& text) {
  std::vector<ManifestEntry> entries;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      entries.push_back(parse_json_line(line));
    } catch (const std::exception& e) {
      throw std::invalid_argument("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return entries;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  const auto text = serialize_manifest(entries);
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path, bool check_files) {
  const auto bytes = read_file(path);
  auto entries = parse_manifest(std::string(bytes.begin(), bytes.end()));
  std::set<std::string> seen;
  const auto base = path.parent_path();
  for (const auto& e : entries) {
    if (!seen.insert(e.path).second) {
      throw std::invalid_argument(path.string() + ": duplicate path '" + e.path + "'");
    }
    if (check_files && !std::filesystem::exists(base / e.path)) {
      throw std::invalid_argument(path.string() + ": missing file '" + e.path + "'");
    }
  }
  return entries;
}

}  // namespace embryoforge
