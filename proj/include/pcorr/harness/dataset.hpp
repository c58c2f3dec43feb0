#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/image.hpp"
#include "pcorr/image_io.hpp"

namespace pcorr::harness {

/// Fraction of the network input covered by the resampled source image.
enum class ScalePolicy { p50, p66, p100 };

inline double coverage(ScalePolicy s) {
  switch (s) {
    case ScalePolicy::p50: return 0.5;
    case ScalePolicy::p66: return 2.0 / 3.0;
    case ScalePolicy::p100: return 1.0;
  }
  return 1.0;
}

inline std::string_view to_string(ScalePolicy s) {
  switch (s) {
    case ScalePolicy::p50: return "50";
    case ScalePolicy::p66: return "66";
    case ScalePolicy::p100: return "100";
  }
  return "?";
}

inline ScalePolicy parse_scale(std::string_view s) {
  if (!s.empty() && s.back() == '%') s.remove_suffix(1);
  if (s == "50") return ScalePolicy::p50;
  if (s == "66") return ScalePolicy::p66;
  if (s == "100") return ScalePolicy::p100;
  throw ValidationError("scale must be 50, 66 or 100, got '" + std::string(s) + "'");
}

struct MaskingRecord {
  std::string id;
  std::string file;         ///< relative to the dataset directory
  Rect region;              ///< noise region in source-image pixels
  double threshold_db = 0;  ///< measured detection threshold
  int line = 0;             ///< CSV line, for messages
};

struct MaskingDatasetManifest {
  std::filesystem::path directory;
  std::vector<MaskingRecord> records;
  ScalePolicy scale = ScalePolicy::p100;
  double fill = 0.0;                  ///< canvas value outside the pasted image
  std::vector<std::string> missing;   ///< record ids whose image file is absent

  std::size_t size() const { return records.size(); }
};

inline constexpr std::string_view kThresholdFile = "thresholds.csv";
inline constexpr std::string_view kThresholdHeader = "id,file,x,y,width,height,threshold_db";

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t\r");
    const auto e = f.find_last_not_of(" \t\r");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

inline double parse_number(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ValidationError(where + ": '" + s + "' is not a number");
  return v;
}

inline int parse_int(const std::string& s, const std::string& where) {
  const double v = parse_number(s, where);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ValidationError(where + ": '" + s + "' is not an integer");
  return static_cast<int>(v);
}

}  // namespace detail

/// Reads `<dir>/thresholds.csv` (header id,file,x,y,width,height,threshold_db;
/// blank lines and lines starting with '#' skipped). Regions are checked
/// against the image size for every image that exists; absent images are
/// listed in `missing` and left for the experiment to skip.
inline MaskingDatasetManifest ingest_masking_dataset(const std::filesystem::path& dir,
                                                     ScalePolicy scale = ScalePolicy::p100, double fill = 0.0) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError("dataset directory not found: " + dir.string());
  MaskingDatasetManifest m;
  m.directory = dir;
  m.scale = scale;
  m.fill = fill;
  const auto csv = dir / kThresholdFile;
  std::ifstream in(csv);
  if (!in) throw ValidationError("dataset at " + dir.string() + " has 0 records: no " + std::string(kThresholdFile));

  std::string line;
  int lineno = 0;
  bool header = false;
  std::vector<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    const std::string where = csv.filename().string() + ":" + std::to_string(lineno);
    if (!header) {
      if (line != kThresholdHeader)
        throw ValidationError(where + ": expected header '" + std::string(kThresholdHeader) + "'");
      header = true;
      continue;
    }
    const auto f = detail::split_csv_line(line);
    if (f.size() != 7) throw ValidationError(where + ": expected 7 fields, got " + std::to_string(f.size()));
    MaskingRecord r;
    r.id = f[0];
    r.file = f[1];
    r.line = lineno;
    if (r.id.empty() || r.file.empty()) throw ValidationError(where + ": id and file must be non-empty");
    r.region = Rect{detail::parse_int(f[2], where), detail::parse_int(f[3], where), detail::parse_int(f[4], where),
                    detail::parse_int(f[5], where)};
    r.threshold_db = detail::parse_number(f[6], where);
    if (!std::isfinite(r.threshold_db)) throw ValidationError(where + ": threshold must be finite");
    if (r.region.empty()) throw ValidationError(where + ": noise region is empty");
    if (std::ranges::find(ids, r.id) != ids.end()) throw ValidationError(where + ": duplicate id '" + r.id + "'");
    ids.push_back(r.id);

    const auto path = dir / r.file;
    if (!std::filesystem::exists(path)) {
      m.missing.push_back(r.id);
    } else {
      const auto img = io::read_image(path);
      if (!r.region.inside(img.width(), img.height()))
        throw ValidationError(where + ": noise region lies outside the " + std::to_string(img.width()) + "x" +
                              std::to_string(img.height()) + " image");
    }
    m.records.push_back(std::move(r));
  }
  if (m.records.empty()) throw ValidationError("dataset at " + dir.string() + " has 0 records");
  return m;
}

/// Source image resampled onto the network input and the noise region in
/// input coordinates.
struct PreparedImage {
  ImagePlane image;
  Rect region;
};

/// Bilinear resize so the image covers the policy's fraction of the input
/// (aspect kept), pasted centred on a `fill` canvas. The region maps to the
/// smallest pixel rectangle containing its scaled footprint.
inline PreparedImage prepare_image(const ImagePlane& source, const Rect& region, int width, int height,
                                   int channels, ScalePolicy scale, double fill = 0.0) {
  const double k = std::min(coverage(scale) * width / source.width(), coverage(scale) * height / source.height());
  const int w = std::max(1, static_cast<int>(std::lround(source.width() * k)));
  const int h = std::max(1, static_cast<int>(std::lround(source.height() * k)));
  const double kx = static_cast<double>(w) / source.width(), ky = static_cast<double>(h) / source.height();
  int ox = 0, oy = 0;
  PreparedImage out;
  out.image = place_centered(resize_bilinear(convert_channels(source, channels), w, h), width, height, fill, &ox, &oy);
  const int x0 = std::clamp(ox + static_cast<int>(std::floor(region.x * kx + 1e-9)), 0, width);
  const int y0 = std::clamp(oy + static_cast<int>(std::floor(region.y * ky + 1e-9)), 0, height);
  const int x1 = std::clamp(ox + static_cast<int>(std::ceil((region.x + region.width) * kx - 1e-9)), 0, width);
  const int y1 = std::clamp(oy + static_cast<int>(std::ceil((region.y + region.height) * ky - 1e-9)), 0, height);
  out.region = Rect{x0, y0, x1 - x0, y1 - y0};
  if (out.region.empty()) throw ValidationError("noise region vanishes after scaling");
  return out;
}

inline PreparedImage prepare_record(const MaskingDatasetManifest& m, const MaskingRecord& r, int width, int height,
                                    int channels) {
  return prepare_image(io::read_image(m.directory / r.file), r.region, width, height, channels, m.scale, m.fill);
}

}  // namespace pcorr::harness
