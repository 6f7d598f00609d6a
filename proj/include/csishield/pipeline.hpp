#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "csishield/checkpoint.hpp"
#include "csishield/eval.hpp"
#include "csishield/ingest.hpp"
#include "csishield/ragan.hpp"

namespace csishield {

// ---------------------------------------------------------------------------
// amp-matrix v1: denoised/extracted amplitude matrices on disk
// ---------------------------------------------------------------------------

struct AmpFile {
  Matrix values;  // usually the [0,1]-scaled amplitudes
  ScaleRecord scale;
  Material material = Material::acrylic;
  Condition condition = Condition::unshielded;
  int day = 1;
  std::string source_id;
};

inline void save_amp_matrix(const AmpFile& amp, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open for writing: " + path.string());
  out << "amp-matrix,1," << amp.values.rows() << "," << amp.values.cols() << "\n";
  out << "source " << (amp.source_id.empty() ? "unknown" : amp.source_id) << "\n";
  out << "material " << to_string(amp.material) << "\n";
  out << "condition " << to_string(amp.condition) << "\n";
  out << "day " << amp.day << "\n";
  out << std::setprecision(17);
  out << "scale_min " << amp.scale.min << "\n";
  out << "scale_max " << amp.scale.max << "\n";
  out << "degenerate " << (amp.scale.degenerate ? 1 : 0) << "\n";
  out << "data\n";
  for (int r = 0; r < amp.values.rows(); ++r) {
    auto row = amp.values.row(r);
    for (int c = 0; c < amp.values.cols(); ++c) {
      if (c) out << ",";
      out << row[c];
    }
    out << "\n";
  }
  if (!out) throw IoFailure("write failed: " + path.string());
}

inline AmpFile load_amp_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty amplitude file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  int rows = 0, cols = 0;
  {
    std::istringstream h(line);
    std::string magic, version, r, c;
    std::getline(h, magic, ',');
    std::getline(h, version, ',');
    std::getline(h, r, ',');
    std::getline(h, c, ',');
    if (magic != "amp-matrix") throw MalformedLine(1, "not an amp-matrix file");
    if (version != "1") throw DataError("unsupported amp-matrix version: " + version);
    rows = std::stoi(r);
    cols = std::stoi(c);
  }
  AmpFile amp;
  amp.values = Matrix(rows, cols);
  long line_no = 1;
  bool in_data = false;
  int r = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!in_data) {
      std::istringstream fields(line);
      std::string key;
      fields >> key;
      if (key == "source") {
        fields >> amp.source_id;
      } else if (key == "material") {
        std::string v;
        fields >> v;
        amp.material = material_from_string(v);
      } else if (key == "condition") {
        std::string v;
        fields >> v;
        amp.condition = condition_from_string(v);
      } else if (key == "day") {
        fields >> amp.day;
      } else if (key == "scale_min") {
        fields >> amp.scale.min;
      } else if (key == "scale_max") {
        fields >> amp.scale.max;
      } else if (key == "degenerate") {
        int v;
        fields >> v;
        amp.scale.degenerate = v != 0;
      } else if (key == "data") {
        in_data = true;
      } else {
        throw MalformedLine(line_no, "unknown amp-matrix field: " + key);
      }
      continue;
    }
    if (r >= rows) throw MalformedLine(line_no, "more data rows than declared");
    std::size_t pos = 0;
    for (int c = 0; c < cols; ++c) {
      const std::size_t comma = line.find(',', pos);
      const std::string field =
          line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        amp.values(r, c) = std::stod(field);
      } catch (const std::exception&) {
        throw MalformedLine(line_no, "bad numeric field: " + field);
      }
      if (comma == std::string::npos) {
        if (c + 1 != cols) throw MalformedLine(line_no, "too few columns");
        break;
      }
      pos = comma + 1;
    }
    ++r;
  }
  if (r != rows) throw DataError("amp-matrix has " + std::to_string(r) + " rows, declared " +
                                 std::to_string(rows));
  return amp;
}

// ---------------------------------------------------------------------------
// Key/value config files (flag defaults; command line wins over them)
// ---------------------------------------------------------------------------

class ConfigFile {
 public:
  ConfigFile() = default;
  explicit ConfigFile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open config file: " + path.string());
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      std::istringstream fields(line);
      std::string key, value;
      fields >> key >> value;
      if (key.empty() || value.empty())
        throw MalformedLine(line_no, "config lines are `key value`");
      std::string extra;
      if (fields >> extra) throw MalformedLine(line_no, "trailing tokens after value");
      values_[key] = value;
    }
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  template <typename T>
  void apply(const std::string& key, T& target) const {
    auto it = values_.find(key);
    if (it == values_.end()) return;
    std::istringstream in(it->second);
    T v;
    if (!(in >> v)) throw ConfigError("config value for " + key + " is not parsable");
    target = v;
    consumed_.insert(key);
  }

  /// Unknown keys are configuration mistakes, not extension points.
  void reject_unconsumed() const {
    for (const auto& [k, v] : values_)
      if (!consumed_.count(k)) throw ConfigError("unknown config key: " + k);
  }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

// ---------------------------------------------------------------------------
// High-level steps shared by the command line tool and the test harnesses
// ---------------------------------------------------------------------------

inline std::string history_csv(const TrainHistory& h) {
  std::ostringstream out;
  out << "epoch,d_loss,g_adv,g_content,g_total,val_content\n";
  out << std::setprecision(17);
  for (std::size_t e = 0; e < h.epochs.size(); ++e) {
    const EpochStats& s = h.epochs[e];
    out << e << "," << s.d_loss << "," << s.g_adv << "," << s.g_content << "," << s.g_total << ","
        << s.val_content << "\n";
  }
  return out.str();
}

/// Split a manifest's acquisitions into pairs, optionally restricted to a
/// day subset (empty = all days).
inline std::vector<PairedSample> pairs_from_manifest(const DatasetManifest& manifest,
                                                     const std::vector<int>& days = {}) {
  std::vector<Acquisition> shielded, unshielded;
  for (const auto& e : manifest.entries) {
    if (!days.empty() && std::find(days.begin(), days.end(), e.day) == days.end()) continue;
    Acquisition a = load_acquisition(manifest.resolve(e), e);
    (a.condition == Condition::shielded ? shielded : unshielded).push_back(std::move(a));
  }
  if (shielded.empty() || unshielded.empty())
    throw DataError("manifest does not cover both conditions for the requested days");
  return pair_acquisitions(shielded, unshielded).pairs;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoFailure("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open: " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace csishield
