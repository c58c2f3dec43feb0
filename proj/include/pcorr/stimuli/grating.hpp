#pragma once

#include <cmath>
#include <numbers>

#include "pcorr/core/error.hpp"
#include "pcorr/image.hpp"

namespace pcorr::stimuli {

struct GratingSpec {
  double contrast = 0.0;     ///< Michelson, in [0, 1]
  double frequency = 0.0;    ///< cycles per image width
  double orientation = 0.0;  ///< radians; 0 modulates along x
  double phase = 0.0;        ///< radians
  double mean_level = 127.5;
};

/// pixel = mean * (1 + contrast * sin(2*pi*f*u/width + phase)), with u the
/// x coordinate rotated by the orientation. Channels are replicated.
inline ImagePlane render_grating(const GratingSpec& spec, int width, int height, int channels = 1) {
  if (!(spec.contrast >= 0.0 && spec.contrast <= 1.0))
    throw ValidationError("grating contrast must lie in [0, 1]");
  if (!(spec.frequency >= 0.0)) throw ValidationError("grating frequency must be non-negative");
  if (!(spec.mean_level >= 0.0 && spec.mean_level <= 127.5))
    throw ValidationError("grating mean level must lie in [0, 127.5] to stay within [0, 255]");
  ImagePlane out(width, height, channels);
  const double c = std::cos(spec.orientation);
  const double s = std::sin(spec.orientation);
  const double k = 2.0 * std::numbers::pi * spec.frequency / width;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double u = x * c + y * s;
      const double v = spec.mean_level * (1.0 + spec.contrast * std::sin(k * u + spec.phase));
      for (int ch = 0; ch < channels; ++ch) out.at(ch, y, x) = v;
    }
  return out;
}

}  // namespace pcorr::stimuli
