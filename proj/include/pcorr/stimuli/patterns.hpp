#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/core/rng.hpp"
#include "pcorr/image.hpp"
#include "pcorr/stimuli/font.hpp"
#include "pcorr/stimuli/shape_layouts.hpp"

namespace pcorr::stimuli {

enum class Paradigm { segmentation, crowding, shape };

inline std::string_view to_string(Paradigm p) {
  switch (p) {
    case Paradigm::segmentation: return "segmentation";
    case Paradigm::crowding: return "crowding";
    case Paradigm::shape: return "shape";
  }
  return "?";
}

inline Paradigm parse_paradigm(std::string_view s) {
  if (s == "segmentation") return Paradigm::segmentation;
  if (s == "crowding") return Paradigm::crowding;
  if (s == "shape") return Paradigm::shape;
  throw ValidationError("unknown paradigm '" + std::string(s) + "'");
}

enum class Condition { easy, hard };

inline std::string_view to_string(Condition c) { return c == Condition::easy ? "easy" : "hard"; }

/// Discrete category plus difficulty condition.
///   segmentation: category 0 = horizontal arrangement, 1 = vertical
///   crowding:     category 0..5 = target letter A..F; hard = cluttered surround
///   shape:        category 0..3 = target-line location; hard layout from the config
struct CategoryLabel {
  int category = 0;
  Condition condition = Condition::easy;
};

inline int category_count(Paradigm p) {
  switch (p) {
    case Paradigm::segmentation: return 2;
    case Paradigm::crowding: return 6;
    case Paradigm::shape: return 4;
  }
  return 0;
}

inline constexpr double kJitterUnit = 0.0625;

/// Element-size, jitter and location grids of one paradigm. Sizes are in
/// pixels on the reference 224-px canvas.
struct ParadigmGrid {
  std::vector<double> element_sizes;
  std::vector<double> jitter_multipliers;
  int locations = 0;  ///< target locations (segmentation/crowding) or hard layouts (shape)
  std::vector<int> grid_lines;  ///< segmentation only: lines per grid side, one per scale

  static ParadigmGrid defaults(Paradigm p) {
    switch (p) {
      case Paradigm::segmentation: return {{9.0, 12.3, 19.4}, {1, 2, 3}, 10, {13, 9, 6}};
      case Paradigm::crowding: return {{15.1, 20.6, 32.4}, {1, 2, 3}, 10, {}};
      case Paradigm::shape: return {{9.0, 15.1, 22.7}, {1, 2, 5, 10, 15}, 6, {}};
    }
    return {};
  }
};

struct PatternConfig {
  Paradigm paradigm = Paradigm::segmentation;
  int scale_index = 0;
  int jitter_level_index = 0;
  int location_index = 0;
  double element_size = 0.0;        ///< px on the reference canvas
  double jitter_multiplier = 0.0;
  int grid_lines = 0;               ///< segmentation only

  /// Maximum displacement per axis on the reference canvas.
  double jitter_px() const { return jitter_multiplier * kJitterUnit * element_size; }

  std::string id() const {
    return std::string(to_string(paradigm)) + "/s" + std::to_string(scale_index) + "/j" +
           std::to_string(jitter_level_index) + "/l" + std::to_string(location_index);
  }
};

/// Full cross-product scale x jitter x location, in that nesting order.
inline std::vector<PatternConfig> enumerate_configs(Paradigm p, const ParadigmGrid& grid) {
  if (p == Paradigm::segmentation && grid.grid_lines.size() != grid.element_sizes.size())
    throw ValidationError("segmentation grid needs one line count per scale");
  std::vector<PatternConfig> out;
  for (int s = 0; s < static_cast<int>(grid.element_sizes.size()); ++s)
    for (int j = 0; j < static_cast<int>(grid.jitter_multipliers.size()); ++j)
      for (int l = 0; l < grid.locations; ++l) {
        PatternConfig c;
        c.paradigm = p;
        c.scale_index = s;
        c.jitter_level_index = j;
        c.location_index = l;
        c.element_size = grid.element_sizes[s];
        c.jitter_multiplier = grid.jitter_multipliers[j];
        if (p == Paradigm::segmentation) c.grid_lines = grid.grid_lines[s];
        out.push_back(c);
      }
  return out;
}

inline std::vector<PatternConfig> enumerate_configs(Paradigm p) {
  return enumerate_configs(p, ParadigmGrid::defaults(p));
}

struct RenderOptions {
  int width = 224;
  int height = 224;
  /// Canvas width the element sizes refer to; geometry scales by width/reference.
  double reference_size = 224.0;
  const ShapeLayouts* layouts = nullptr;  ///< nullptr -> built-in layouts

  double geometry_scale() const { return width / reference_size; }
};

namespace detail {

using Pixel = std::pair<int, int>;  // (x, y)

/// DDA rasterisation, 1 px wide, no anti-aliasing.
inline void raster_segment(double x0, double y0, double x1, double y1, std::vector<Pixel>& out) {
  const double dx = x1 - x0;
  const double dy = y1 - y0;
  const long steps = std::max(1L, std::lround(std::max(std::abs(dx), std::abs(dy))));
  for (long i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    out.emplace_back(static_cast<int>(std::lround(x0 + t * dx)),
                     static_cast<int>(std::lround(y0 + t * dy)));
  }
}

/// Segment of length `len` centred at (cx, cy) with direction (ux, uy).
inline void raster_line(double cx, double cy, double len, double ux, double uy,
                        std::vector<Pixel>& out) {
  const double half = std::max(0.0, len - 1.0) / 2.0;
  raster_segment(cx - half * ux, cy - half * uy, cx + half * ux, cy + half * uy, out);
}

/// Nearest-neighbour scaled glyph with top-left corner at (left, top).
inline void raster_glyph(char letter, int left, int top, int glyph_w, int glyph_h,
                         std::vector<Pixel>& out) {
  const auto glyph = glyph_for(letter);
  if (!glyph) throw ValidationError(std::string("no glyph for letter ") + letter);
  for (int py = 0; py < glyph_h; ++py)
    for (int px = 0; px < glyph_w; ++px) {
      const int row = py * kGlyphRows / glyph_h;
      const int col = px * kGlyphColumns / glyph_w;
      if ((*glyph)[row][col] == '#') out.emplace_back(left + px, top + py);
    }
}

struct Element {
  std::vector<Pixel> pixels;
  int shift_x = 0;
  int shift_y = 0;
  bool jittered = true;  ///< static elements need no jitter slack
};

/// Integer shift uniform over [-floor(j), floor(j)]; hard-edged rendering
/// cannot express sub-pixel displacement.
inline int draw_shift(Rng& rng, double max_shift) {
  const auto m = static_cast<std::int64_t>(std::floor(max_shift + 1e-9));
  return m <= 0 ? 0 : static_cast<int>(rng.uniform_int(-m, m));
}

inline ImagePlane compose(const std::vector<Element>& elements, int width, int height,
                          double max_shift) {
  const int jitter_slack = static_cast<int>(std::floor(max_shift + 1e-9));
  for (const auto& e : elements)
    for (auto [x, y] : e.pixels)
      if (const int slack = e.jittered ? jitter_slack : 0; x - slack < 0 || y - slack < 0 || x + slack >= width || y + slack >= height)
        throw ValidationError("pattern geometry exceeds the canvas");
  ImagePlane img(width, height, 1, 0.0);
  for (const auto& e : elements)
    for (auto [x, y] : e.pixels) img.at(y + e.shift_y, x + e.shift_x) = 255.0;
  return img;
}

inline constexpr double kInvSqrt2 = 0.70710678118654752440;

inline ImagePlane render_segmentation(const PatternConfig& cfg, const CategoryLabel& label,
                                      Rng& rng, const RenderOptions& opt) {
  const double g = opt.geometry_scale();
  const double len = cfg.element_size * g;
  const double spacing = 1.5 * len;
  const int n = cfg.grid_lines;
  if (n < 3) throw ValidationError("segmentation grid needs at least 3 lines per side");
  const double centre = (n - 1) / 2.0;
  const double max_shift = cfg.jitter_px() * g;

  auto cell = [&](double v) { return std::clamp(static_cast<int>(std::lround(v)), 1, n - 2); };
  const double half = centre / 2.0;
  int row = cell(centre), col = cell(centre);
  switch (cfg.location_index) {
    case 0: break;
    case 1:
      row = static_cast<int>(rng.uniform_int(1, n - 2));
      col = static_cast<int>(rng.uniform_int(1, n - 2));
      break;
    case 2: row = cell(centre - half), col = cell(centre - half); break;
    case 3: row = cell(centre - half), col = cell(centre + half); break;
    case 4: row = cell(centre + half), col = cell(centre - half); break;
    case 5: row = cell(centre + half), col = cell(centre + half); break;
    case 6: row = cell(centre - half); break;
    case 7: row = cell(centre + half); break;
    case 8: col = cell(centre - half); break;
    case 9: col = cell(centre + half); break;
    default: throw ValidationError("segmentation location index out of range");
  }
  const bool vertical = label.category == 1;
  auto is_diagonal = [&](int r, int c) {
    if (vertical ? (c != col || std::abs(r - row) > 1) : (r != row || std::abs(c - col) > 1))
      return false;
    if (r == row && c == col) return label.condition == Condition::easy;
    return true;
  };

  std::vector<Element> elements;
  elements.reserve(static_cast<std::size_t>(n) * n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      Element e;
      const double cx = opt.width / 2.0 + (c - centre) * spacing;
      const double cy = opt.height / 2.0 + (r - centre) * spacing;
      if (is_diagonal(r, c)) raster_line(cx, cy, len, kInvSqrt2, -kInvSqrt2, e.pixels);
      else raster_line(cx, cy, len, 1.0, 0.0, e.pixels);
      // Draw order is fixed so easy and hard renders share every shift.
      e.shift_x = draw_shift(rng, max_shift);
      e.shift_y = draw_shift(rng, max_shift);
      elements.push_back(std::move(e));
    }
  return compose(elements, opt.width, opt.height, max_shift);
}

inline ImagePlane render_crowding(const PatternConfig& cfg, const CategoryLabel& label, Rng& rng,
                                  const RenderOptions& opt) {
  const double g = opt.geometry_scale();
  const double size = cfg.element_size * g;
  const int glyph_h = std::max(kGlyphRows, static_cast<int>(std::lround(size)));
  const int glyph_w = std::max(kGlyphColumns, static_cast<int>(std::lround(size * kGlyphColumns / kGlyphRows)));
  const double pitch_x = 1.0 * size;
  const double pitch_y = 1.15 * size;
  const double max_shift = cfg.jitter_px() * g;

  const double w = opt.width, h = opt.height;
  double cx = w / 2.0, cy = h / 2.0;
  switch (cfg.location_index) {
    case 0: break;
    case 1: {
      const double mx = pitch_x + glyph_w / 2.0 + max_shift + 1.0;
      const double my = pitch_y + glyph_h / 2.0 + max_shift + 1.0;
      cx = rng.uniform(mx, w - mx);
      cy = rng.uniform(my, h - my);
      break;
    }
    case 2: cx = w / 4.0, cy = h / 4.0; break;
    case 3: cx = 3 * w / 4.0, cy = h / 4.0; break;
    case 4: cx = w / 4.0, cy = 3 * h / 4.0; break;
    case 5: cx = 3 * w / 4.0, cy = 3 * h / 4.0; break;
    case 6: cy = h / 4.0; break;
    case 7: cy = 3 * h / 4.0; break;
    case 8: cx = w / 4.0; break;
    case 9: cx = 3 * w / 4.0; break;
    default: throw ValidationError("crowding location index out of range");
  }

  auto top_left = [&](double x, double y) {
    return std::pair{static_cast<int>(std::lround(x - glyph_w / 2.0)),
                     static_cast<int>(std::lround(y - glyph_h / 2.0))};
  };
  std::vector<Element> elements;
  Element target;
  const auto [tl_x, tl_y] = top_left(cx, cy);
  raster_glyph(static_cast<char>('A' + label.category), tl_x, tl_y, glyph_w, glyph_h, target.pixels);
  target.shift_x = draw_shift(rng, max_shift);
  target.shift_y = draw_shift(rng, max_shift);
  elements.push_back(std::move(target));

  if (label.condition == Condition::hard) {
    // Static ring of eight flankers, clockwise from the top-left, cycling M N S T.
    static constexpr std::pair<int, int> ring[8] = {{-1, -1}, {0, -1}, {1, -1}, {1, 0},
                                                    {1, 1},   {0, 1},  {-1, 1}, {-1, 0}};
    static constexpr char letters[4] = {'M', 'N', 'S', 'T'};
    for (int k = 0; k < 8; ++k) {
      Element flank;
      flank.jittered = false;
      const auto [fx, fy] = top_left(cx + ring[k].first * pitch_x, cy + ring[k].second * pitch_y);
      raster_glyph(letters[k % 4], fx, fy, glyph_w, glyph_h, flank.pixels);
      elements.push_back(std::move(flank));
    }
  }
  return compose(elements, opt.width, opt.height, max_shift);
}

inline ImagePlane render_shape(const PatternConfig& cfg, const CategoryLabel& label, Rng& rng,
                               const RenderOptions& opt) {
  const ShapeLayouts& layouts = opt.layouts ? *opt.layouts : ShapeLayouts::builtin();
  if (cfg.location_index < 0 || cfg.location_index >= static_cast<int>(layouts.hard.size()))
    throw ValidationError("shape layout index out of range");
  const double g = opt.geometry_scale();
  const double len = cfg.element_size * g;
  const double max_shift = cfg.jitter_px() * g;
  const double cx = opt.width / 2.0, cy = opt.height / 2.0;

  Element pattern;
  auto draw = [&](const Segment& s) {
    raster_segment(cx + s[0] * len, cy + s[1] * len, cx + s[2] * len, cy + s[3] * len, pattern.pixels);
  };
  draw(layouts.targets.at(static_cast<std::size_t>(label.category)));
  const auto& context = label.condition == Condition::easy
                            ? layouts.easy
                            : layouts.hard[static_cast<std::size_t>(cfg.location_index)];
  for (const auto& s : context) draw(s);
  pattern.shift_x = draw_shift(rng, max_shift);
  pattern.shift_y = draw_shift(rng, max_shift);
  return compose({pattern}, opt.width, opt.height, max_shift);
}

}  // namespace detail

/// White-on-black rendering of one stimulus. Pure function of
/// (config, label, seed, options); easy and hard renders with the same seed
/// share all random draws.
inline ImagePlane render_pattern(const PatternConfig& config, const CategoryLabel& label,
                                 std::uint64_t seed, const RenderOptions& options = {}) {
  if (label.category < 0 || label.category >= category_count(config.paradigm))
    throw ValidationError("category " + std::to_string(label.category) + " invalid for " +
                          std::string(to_string(config.paradigm)));
  Rng rng(seed);
  switch (config.paradigm) {
    case Paradigm::segmentation: return detail::render_segmentation(config, label, rng, options);
    case Paradigm::crowding: return detail::render_crowding(config, label, rng, options);
    case Paradigm::shape: return detail::render_shape(config, label, rng, options);
  }
  throw ValidationError("unknown paradigm");
}

}  // namespace pcorr::stimuli
