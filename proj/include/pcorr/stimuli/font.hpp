#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace pcorr::stimuli {

/// 5x7 bitmap glyph; rows top to bottom, '#' is lit.
using Glyph = std::array<std::string_view, 7>;

inline constexpr int kGlyphColumns = 5;
inline constexpr int kGlyphRows = 7;

// Covers the crowding targets A-F and the surround letters M, N, S, T.
inline std::optional<Glyph> glyph_for(char letter) {
  switch (letter) {
    case 'A': return Glyph{".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"};
    case 'B': return Glyph{"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."};
    case 'C': return Glyph{".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."};
    case 'D': return Glyph{"####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."};
    case 'E': return Glyph{"#####", "#....", "#....", "####.", "#....", "#....", "#####"};
    case 'F': return Glyph{"#####", "#....", "#....", "####.", "#....", "#....", "#...."};
    case 'M': return Glyph{"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"};
    case 'N': return Glyph{"#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"};
    case 'S': return Glyph{".####", "#....", "#....", ".###.", "....#", "....#", "####."};
    case 'T': return Glyph{"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."};
    default: return std::nullopt;
  }
}

}  // namespace pcorr::stimuli
