#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "csishield/csi.hpp"
#include "csishield/error.hpp"

namespace csishield {

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

enum class Material { acrylic, aluminum, copper, pine, background };
enum class Condition { shielded, unshielded };

constexpr std::array<Material, 5> kAllMaterials = {
    Material::acrylic, Material::aluminum, Material::copper, Material::pine,
    Material::background};

inline std::string_view to_string(Material m) {
  switch (m) {
    case Material::acrylic: return "acrylic";
    case Material::aluminum: return "aluminum";
    case Material::copper: return "copper";
    case Material::pine: return "pine";
    case Material::background: return "background";
  }
  return "?";
}

inline std::string_view to_string(Condition c) {
  return c == Condition::shielded ? "shielded" : "unshielded";
}

inline Material material_from_string(std::string_view s) {
  for (Material m : kAllMaterials)
    if (to_string(m) == s) return m;
  throw DataError("unknown material: " + std::string(s));
}

inline Condition condition_from_string(std::string_view s) {
  if (s == "shielded") return Condition::shielded;
  if (s == "unshielded") return Condition::unshielded;
  throw DataError("unknown condition: " + std::string(s));
}

// ---------------------------------------------------------------------------
// csi-lines v1 capture format
// ---------------------------------------------------------------------------

constexpr std::string_view kCsiLinesHeader = "csi-lines,1,64";
constexpr int kNominalFrameCount = 1000;  // 100 packets/s for 10 s
constexpr int kFrameCountSlack = 10;      // capture-rate jitter tolerated either way

/// One capture line: timestamp, RSSI and 64 interleaved (re, im) integer pairs.
struct CsiFrameRecord {
  std::int64_t timestamp_us = 0;
  int rssi = 0;
  std::array<std::int32_t, 2 * kTotalSubcarriers> iq{};

  CfrVector cfr() const {
    CfrVector v(kTotalSubcarriers);
    for (int k = 0; k < kTotalSubcarriers; ++k)
      v[k] = ComplexSample(static_cast<double>(iq[2 * k]), static_cast<double>(iq[2 * k + 1]));
    return v;
  }

  bool operator==(const CsiFrameRecord&) const = default;
};

namespace detail {
inline bool parse_int_field(std::string_view field, std::int64_t& out) {
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && !field.empty();
}
}  // namespace detail

/// Parse one `timestamp_us,rssi,i0_re,i0_im,...,i63_re,i63_im` line.
inline CsiFrameRecord parse_csi_line(std::string_view line, long line_no = 0) {
  CsiFrameRecord rec;
  int field_index = 0;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    const std::string_view field =
        line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    std::int64_t value = 0;
    if (!detail::parse_int_field(field, value))
      throw MalformedLine(line_no, "field " + std::to_string(field_index) + " is not an integer");
    if (field_index == 0) {
      rec.timestamp_us = value;
    } else if (field_index == 1) {
      rec.rssi = static_cast<int>(value);
    } else if (field_index - 2 < static_cast<int>(rec.iq.size())) {
      rec.iq[field_index - 2] = static_cast<std::int32_t>(value);
    } else {
      throw MalformedLine(line_no, "too many fields");
    }
    ++field_index;
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (field_index != 2 + 2 * kTotalSubcarriers)
    throw MalformedLine(line_no, "expected " + std::to_string(2 + 2 * kTotalSubcarriers) +
                                     " fields, got " + std::to_string(field_index));
  return rec;
}

inline std::string serialize_csi_line(const CsiFrameRecord& rec) {
  std::string out;
  out.reserve(16 + rec.iq.size() * 6);
  out += std::to_string(rec.timestamp_us);
  out += ',';
  out += std::to_string(rec.rssi);
  for (std::int32_t v : rec.iq) {
    out += ',';
    out += std::to_string(v);
  }
  return out;
}

inline void write_csi_lines_file(const std::filesystem::path& path,
                                 const std::vector<CsiFrameRecord>& frames) {
  std::ofstream out(path, std::ios::binary);  // binary: LF line endings everywhere
  if (!out) throw IoFailure("cannot open for writing: " + path.string());
  out << kCsiLinesHeader << '\n';
  for (const auto& f : frames) out << serialize_csi_line(f) << '\n';
  if (!out) throw IoFailure("write failed: " + path.string());
}

inline std::vector<CsiFrameRecord> read_csi_lines_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty capture file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsiLinesHeader)
    throw MalformedLine(1, "bad header '" + line + "' in " + path.string());
  std::vector<CsiFrameRecord> frames;
  long line_no = 1;
  std::int64_t prev_ts = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    CsiFrameRecord rec = parse_csi_line(line, line_no);
    if (rec.timestamp_us <= prev_ts)
      throw MalformedLine(line_no, "timestamps not strictly increasing");
    prev_ts = rec.timestamp_us;
    frames.push_back(rec);
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Dataset manifest
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string path;  // relative to the manifest file
  Material material = Material::acrylic;
  Condition condition = Condition::shielded;
  int day = 1;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::string version = "1";
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;  // directory the paths are relative to

  std::filesystem::path resolve(const ManifestEntry& e) const { return base_dir / e.path; }
};

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open for writing: " + path.string());
  out << "version " << m.version << '\n';
  for (const auto& e : m.entries) {
    out << "entry path=" << e.path << " material=" << to_string(e.material)
        << " condition=" << to_string(e.condition) << " day=" << e.day << '\n';
  }
  if (!out) throw IoFailure("write failed: " + path.string());
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open: " + path.string());
  DatasetManifest m;
  m.base_dir = path.parent_path();
  std::string line;
  long line_no = 0;
  bool saw_version = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string tag;
    fields >> tag;
    if (tag == "version") {
      fields >> m.version;
      if (m.version != "1") throw DataError("unsupported manifest version: " + m.version);
      saw_version = true;
    } else if (tag == "entry") {
      ManifestEntry e;
      std::string kv;
      bool have_path = false, have_material = false, have_condition = false, have_day = false;
      while (fields >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw MalformedLine(line_no, "expected key=value, got " + kv);
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        if (key == "path") {
          e.path = value;
          have_path = true;
        } else if (key == "material") {
          e.material = material_from_string(value);
          have_material = true;
        } else if (key == "condition") {
          e.condition = condition_from_string(value);
          have_condition = true;
        } else if (key == "day") {
          e.day = std::stoi(value);
          have_day = true;
        } else {
          throw MalformedLine(line_no, "unknown manifest field: " + key);
        }
      }
      if (!(have_path && have_material && have_condition && have_day))
        throw MalformedLine(line_no, "entry missing one of path/material/condition/day");
      m.entries.push_back(std::move(e));
    } else {
      throw MalformedLine(line_no, "unknown manifest line tag: " + tag);
    }
  }
  if (!saw_version) throw DataError("manifest missing version line: " + path.string());
  return m;
}

// ---------------------------------------------------------------------------
// Acquisitions
// ---------------------------------------------------------------------------

/// One labeled 10-second capture, frame count already regularized.
struct Acquisition {
  std::string id;
  Material material = Material::acrylic;
  Condition condition = Condition::shielded;
  int day = 1;
  CsiMatrix csi;  // nominal_frames x 64
};

/// Parse a capture file and regularize it to exactly `nominal` rows: up to
/// kFrameCountSlack extra frames are trimmed from the tail, up to
/// kFrameCountSlack missing frames are padded by repeating the last frame.
inline Acquisition load_acquisition(const std::filesystem::path& path, const ManifestEntry& entry,
                                    int nominal = kNominalFrameCount) {
  std::vector<CsiFrameRecord> frames = read_csi_lines_file(path);
  const long n = static_cast<long>(frames.size());
  if (n < nominal - kFrameCountSlack) throw TooFewFrames(n);
  if (n > nominal + kFrameCountSlack) throw TooManyFrames(n);
  if (n > nominal) frames.resize(nominal);
  while (static_cast<int>(frames.size()) < nominal) frames.push_back(frames.back());

  std::vector<CfrVector> cfrs;
  cfrs.reserve(frames.size());
  for (const auto& f : frames) cfrs.push_back(f.cfr());

  Acquisition acq;
  acq.id = path.stem().string();
  acq.material = entry.material;
  acq.condition = entry.condition;
  acq.day = entry.day;
  acq.csi = assemble_csi(cfrs);
  return acq;
}

inline std::vector<Acquisition> load_acquisitions(const DatasetManifest& manifest,
                                                  int nominal = kNominalFrameCount) {
  std::vector<Acquisition> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) out.push_back(load_acquisition(manifest.resolve(e), e, nominal));
  return out;
}

// ---------------------------------------------------------------------------
// Dataset validation
// ---------------------------------------------------------------------------

struct CellCount {
  Material material;
  Condition condition;
  int count = 0;
  std::vector<int> days;  // distinct days present, ascending
};

struct ValidationReport {
  std::vector<CellCount> cells;  // one per (material, condition), fixed order
  std::vector<std::string> missing_files;
  int total = 0;
  bool valid = false;     // nonempty and every referenced file exists
  bool complete = false;  // every cell holds exactly 30 acquisitions

  const CellCount& cell(Material m, Condition c) const {
    for (const auto& cc : cells)
      if (cc.material == m && cc.condition == c) return cc;
    throw Error("validation report cell lookup failed");
  }
};

inline ValidationReport validate_dataset(const DatasetManifest& manifest) {
  ValidationReport report;
  for (Material m : kAllMaterials)
    for (Condition c : {Condition::shielded, Condition::unshielded})
      report.cells.push_back({m, c, 0, {}});

  for (const auto& e : manifest.entries) {
    for (auto& cc : report.cells) {
      if (cc.material == e.material && cc.condition == e.condition) {
        ++cc.count;
        if (std::find(cc.days.begin(), cc.days.end(), e.day) == cc.days.end())
          cc.days.push_back(e.day);
      }
    }
    if (!std::filesystem::exists(manifest.resolve(e)))
      report.missing_files.push_back(e.path);
    ++report.total;
  }
  for (auto& cc : report.cells) std::sort(cc.days.begin(), cc.days.end());
  report.valid = report.total > 0 && report.missing_files.empty();
  report.complete = std::all_of(report.cells.begin(), report.cells.end(),
                                [](const CellCount& cc) { return cc.count == 30; });
  return report;
}

inline std::string format_validation_report(const ValidationReport& r) {
  std::ostringstream out;
  out << "total " << r.total << "\n";
  for (const auto& cc : r.cells) {
    out << to_string(cc.material) << "/" << to_string(cc.condition) << " " << cc.count << " (days";
    for (int d : cc.days) out << " " << d;
    out << ")\n";
  }
  out << "missing " << r.missing_files.size() << "\n";
  for (const auto& f : r.missing_files) out << "  " << f << "\n";
  out << "valid " << (r.valid ? "yes" : "no") << "\n";
  out << "complete " << (r.complete ? "yes" : "no") << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Pairing for supervised content loss
// ---------------------------------------------------------------------------

/// Matched unshielded/shielded amplitude matrices of the same material and day.
struct PairedSample {
  AmplitudeMatrix noisy;  // unshielded, n x 52
  AmplitudeMatrix clean;  // shielded, n x 52
  Material material = Material::acrylic;
  int day = 1;
  std::string noisy_id;
  std::string clean_id;
};

struct NoCounterpart {
  Material material;
  int day;
  Condition leftover_condition;
  int count;
};

struct PairingResult {
  std::vector<PairedSample> pairs;
  std::vector<NoCounterpart> leftovers;
};

inline AmplitudeMatrix data_amplitudes(const Acquisition& acq) {
  return amplitude(select_data_subcarriers(acq.csi));
}

/// Pair the i-th unshielded with the i-th shielded acquisition of the same
/// (material, day), i in id (file-name) order. Unmatched acquisitions are
/// reported, never dropped silently.
inline PairingResult pair_acquisitions(const std::vector<Acquisition>& shielded,
                                       const std::vector<Acquisition>& unshielded) {
  if (shielded.empty() || unshielded.empty())
    throw EmptyInput("pair_acquisitions: both condition groups must be nonempty");

  using Key = std::pair<int, int>;  // (material index, day)
  std::map<Key, std::vector<const Acquisition*>> s_groups, u_groups;
  for (const auto& a : shielded)
    s_groups[{static_cast<int>(a.material), a.day}].push_back(&a);
  for (const auto& a : unshielded)
    u_groups[{static_cast<int>(a.material), a.day}].push_back(&a);

  auto by_id = [](const Acquisition* a, const Acquisition* b) { return a->id < b->id; };
  for (auto& [k, v] : s_groups) std::sort(v.begin(), v.end(), by_id);
  for (auto& [k, v] : u_groups) std::sort(v.begin(), v.end(), by_id);

  PairingResult result;
  std::map<Key, std::pair<int, int>> leftover;  // key -> (#shielded left, #unshielded left)
  for (const auto& [key, svec] : s_groups) {
    auto it = u_groups.find(key);
    const std::size_t matched = it == u_groups.end() ? 0 : std::min(svec.size(), it->second.size());
    for (std::size_t i = 0; i < matched; ++i) {
      const Acquisition& s = *svec[i];
      const Acquisition& u = *it->second[i];
      PairedSample p;
      p.noisy = data_amplitudes(u);
      p.clean = data_amplitudes(s);
      p.material = s.material;
      p.day = s.day;
      p.noisy_id = u.id;
      p.clean_id = s.id;
      result.pairs.push_back(std::move(p));
    }
    if (svec.size() > matched)
      leftover[key].first = static_cast<int>(svec.size() - matched);
  }
  for (const auto& [key, uvec] : u_groups) {
    auto it = s_groups.find(key);
    const std::size_t matched = it == s_groups.end() ? 0 : std::min(uvec.size(), it->second.size());
    if (uvec.size() > matched)
      leftover[key].second = static_cast<int>(uvec.size() - matched);
  }
  for (const auto& [key, counts] : leftover) {
    const Material m = static_cast<Material>(key.first);
    if (counts.first > 0)
      result.leftovers.push_back({m, key.second, Condition::shielded, counts.first});
    if (counts.second > 0)
      result.leftovers.push_back({m, key.second, Condition::unshielded, counts.second});
  }
  return result;
}

}  // namespace csishield
