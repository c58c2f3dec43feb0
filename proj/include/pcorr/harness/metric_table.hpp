#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/core/sha256.hpp"
#include "pcorr/harness/dataset.hpp"

namespace pcorr::harness {

inline constexpr int kTableFormatVersion = 1;
inline constexpr const char* kTableHeader =
    "experiment,model,config_id,tap,condition,level_or_contrast,frequency,value,seed,config_hash";

inline constexpr double kNone = std::numeric_limits<double>::quiet_NaN();

/// One measurement. NaN in level_or_contrast or frequency means "not
/// applicable" and is written as an empty field.
struct MetricRow {
  std::string experiment;
  std::string model;
  std::string config_id;
  std::string tap;
  std::string condition;
  double level_or_contrast = kNone;
  double frequency = kNone;
  double value = 0.0;
  std::uint64_t seed = 0;
};

/// Rows of one experiment run plus the configuration they came from. Every
/// row carries config_hash = first 16 hex digits of SHA-256 over the
/// canonical (key-sorted) JSON dump of `config`.
struct MetricTable {
  std::string experiment;
  std::string model;
  nlohmann::json config = nlohmann::json::object();
  std::vector<MetricRow> rows;

  std::string config_hash() const { return sha256_hex(config.dump()).substr(0, 16); }
};

/// Shortest round-trip decimal: %.17g, so re-reading gives the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline const std::string& csv_safe(const std::string& s, const char* what) {
  if (s.find_first_of(",\n\r\"") != std::string::npos)
    throw ValidationError(std::string(what) + " '" + s + "' contains a CSV delimiter");
  return s;
}

inline std::string optional_field(double v) { return std::isnan(v) ? std::string() : format_double(v); }

}  // namespace detail

inline void write_csv(std::ostream& out, const MetricTable& t) {
  const std::string hash = t.config_hash();
  out << kTableHeader << '\n';
  for (const auto& r : t.rows) {
    out << detail::csv_safe(r.experiment, "experiment") << ',' << detail::csv_safe(r.model, "model") << ','
        << detail::csv_safe(r.config_id, "config id") << ',' << detail::csv_safe(r.tap, "tap") << ','
        << detail::csv_safe(r.condition, "condition") << ',' << detail::optional_field(r.level_or_contrast) << ','
        << detail::optional_field(r.frequency) << ',' << format_double(r.value) << ',' << r.seed << ',' << hash
        << '\n';
  }
}

/// Data-only plot hint for downstream plotting tools.
inline nlohmann::json plot_descriptor(const std::string& experiment) {
  using nlohmann::json;
  if (experiment == "saliency")
    return {{"kind", "line"}, {"x", "level_or_contrast"}, {"y", "value"}, {"series", "tap"}, {"facet", "config_id"}};
  if (experiment == "context")
    return {{"kind", "scatter"}, {"x", "value[condition=hard]"}, {"y", "value[condition=easy]"}, {"series", "tap"}};
  if (experiment == "contrast")
    return {{"kind", "line"}, {"x", "frequency"}, {"y", "value"}, {"series", "level_or_contrast"}, {"facet", "tap"},
            {"log_x", true}};
  return {{"kind", "table"}};
}

inline nlohmann::json sidecar(const MetricTable& t) {
  return {{"format_version", kTableFormatVersion},
          {"experiment", t.experiment},
          {"model", t.model},
          {"config", t.config},
          {"config_hash", t.config_hash()},
          {"rows", t.rows.size()},
          {"columns", kTableHeader},
          {"plot", plot_descriptor(t.experiment)}};
}

/// Writes `<path>` (CSV) and `<path>.json` (sidecar).
inline void save_table(const MetricTable& t, const std::filesystem::path& path) {
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + path.string());
    write_csv(f, t);
  }
  std::ofstream j(path.string() + ".json", std::ios::binary | std::ios::trunc);
  if (!j) throw Error("cannot write " + path.string() + ".json");
  j << sidecar(t).dump(2) << '\n';
}

/// Parsed metric CSV. The config itself is not in the CSV; `config_hash`
/// is the single hash shared by every row.
struct LoadedTable {
  std::vector<MetricRow> rows;
  std::string config_hash;
};

inline LoadedTable read_csv(std::istream& in, const std::string& name = "table") {
  LoadedTable t;
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line) || (++lineno, line != kTableHeader))
    throw ValidationError(name + ":1: expected metric table header");
  auto number = [&](const std::string& s, const std::string& where) {
    if (s.empty()) return kNone;
    if (s == "nan") return kNone;
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return detail::parse_number(s, where);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto f = detail::split_csv_line(line);
    if (f.size() != 10) throw ValidationError(where + ": expected 10 fields, got " + std::to_string(f.size()));
    MetricRow r{f[0], f[1], f[2], f[3], f[4], number(f[5], where), number(f[6], where), number(f[7], where), 0};
    try {
      std::size_t used = 0;
      r.seed = std::stoull(f[8], &used);
      if (used != f[8].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError(where + ": bad seed '" + f[8] + "'");
    }
    if (t.config_hash.empty()) t.config_hash = f[9];
    else if (t.config_hash != f[9]) throw ValidationError(where + ": rows from more than one configuration");
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline LoadedTable load_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open " + path.string());
  return read_csv(f, path.filename().string());
}

}  // namespace pcorr::harness
