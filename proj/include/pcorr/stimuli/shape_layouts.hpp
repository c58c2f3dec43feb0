#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pcorr/core/error.hpp"

namespace pcorr::stimuli {

/// Line segment (x0, y0, x1, y1).
using Segment = std::array<double, 4>;

/// Target and context geometry for the object-superiority paradigm, in
/// units of the discriminated-line length relative to the pattern centre.
struct ShapeLayouts {
  std::vector<Segment> targets;            ///< the four possible target-line locations
  std::vector<Segment> easy;               ///< shape-forming context
  std::vector<std::vector<Segment>> hard;  ///< non-shape contexts, same line count

  static ShapeLayouts from_json(const nlohmann::json& doc) {
    ShapeLayouts out;
    try {
      out.targets = doc.at("targets").get<std::vector<Segment>>();
      out.easy = doc.at("easy").get<std::vector<Segment>>();
      out.hard = doc.at("hard").get<std::vector<std::vector<Segment>>>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("shape layouts: ") + e.what());
    }
    if (out.targets.size() != 4) throw ValidationError("shape layouts: exactly four targets required");
    if (out.hard.empty()) throw ValidationError("shape layouts: no hard layouts");
    for (const auto& h : out.hard)
      if (h.size() != out.easy.size())
        throw ValidationError("shape layouts: hard layouts must have as many lines as the easy one");
    return out;
  }

  static ShapeLayouts load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open shape layouts " + path.string());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
    return from_json(doc);
  }

  /// Built-in copy of data/shape_layouts.json.
  static const ShapeLayouts& builtin() {
    static const ShapeLayouts layouts = from_json(nlohmann::json::parse(kBuiltinJson));
    return layouts;
  }

  static constexpr const char* kBuiltinJson = R"json({"description":"Object-superiority layouts. Coordinates are (x0, y0, x1, y1) in units of the discriminated-line length, relative to the pattern centre, y pointing down.","targets":[[-0.95,-0.25,-0.2429,-0.9571],[0.25,-0.25,0.9571,-0.9571],[0.25,0.95,0.9571,0.2429],[-0.95,0.95,-0.2429,0.2429]],"easy":[[-0.95,-0.25,0.25,-0.25],[0.25,-0.25,0.25,0.95],[0.25,0.95,-0.95,0.95],[-0.95,0.95,-0.95,-0.25],[-0.2429,-0.9571,0.9571,-0.9571],[0.9571,-0.9571,0.9571,0.2429],[0.9571,0.2429,-0.2429,0.2429],[-0.2429,0.2429,-0.2429,-0.9571]],"hard":[[[-0.95,-0.25,0.25,-0.25],[0.25,-0.25,0.25,0.95],[0.25,0.95,-0.95,0.95],[-0.95,0.95,-0.95,-0.25],[0.3571,-1.2056,1.2056,-0.3571],[1.2056,-0.3571,0.3571,0.4914],[0.3571,0.4914,-0.4914,-0.3571],[-0.4914,-0.3571,0.3571,-1.2056]],[[-0.95,-0.55,0.25,-0.55],[0.55,-0.25,0.55,0.95],[0.25,1.25,-0.95,1.25],[-1.25,0.95,-1.25,-0.25],[-0.2429,-1.2571,0.9571,-1.2571],[1.2571,-0.9571,1.2571,0.2429],[0.9571,0.5429,-0.2429,0.5429],[-0.5429,0.2429,-0.5429,-0.9571]],[[-0.35,-0.85,-0.35,0.35],[0.85,0.35,-0.35,0.35],[-0.35,1.55,-0.35,0.35],[-1.55,0.35,-0.35,0.35],[0.3571,-1.5571,0.3571,-0.3571],[1.5571,-0.3571,0.3571,-0.3571],[0.3571,0.8429,0.3571,-0.3571],[-0.8429,-0.3571,0.3571,-0.3571]],[[-0.35,-0.85,-0.35,0.35],[0.85,0.35,-0.35,0.35],[-0.35,1.55,-0.35,0.35],[-1.55,0.35,-0.35,0.35],[-0.2429,-0.9571,0.9571,-0.9571],[0.9571,-0.9571,0.9571,0.2429],[0.9571,0.2429,-0.2429,0.2429],[-0.2429,0.2429,-0.2429,-0.9571]],[[-0.95,-0.25,0.25,-0.25],[0.25,-0.25,0.25,0.95],[0.25,0.95,-0.95,0.95],[-0.95,0.95,-0.95,-0.25],[0.3571,-1.5571,0.3571,-0.3571],[1.5571,-0.3571,0.3571,-0.3571],[0.3571,0.8429,0.3571,-0.3571],[-0.8429,-0.3571,0.3571,-0.3571]],[[-1.3,-1.15,-0.75,-1.15],[-0.6,-1.15,-0.05,-1.15],[0.1,-1.15,0.65,-1.15],[0.8,-1.15,1.35,-1.15],[-1.3,1.15,-0.75,1.15],[-0.6,1.15,-0.05,1.15],[0.1,1.15,0.65,1.15],[0.8,1.15,1.35,1.15]]]})json";
};

}  // namespace pcorr::stimuli
