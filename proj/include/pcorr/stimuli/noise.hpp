#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/core/fft.hpp"
#include "pcorr/core/numeric.hpp"
#include "pcorr/core/rng.hpp"
#include "pcorr/image.hpp"

namespace pcorr::stimuli {

/// Level value meaning "no noise".
inline constexpr double kNoiseDisabled = -std::numeric_limits<double>::infinity();

/// Noise standard deviation for a level in dB relative to the region's mean
/// pixel value: std = T * 10^(dB/20).
inline double db_to_std(double level_db, double mean_level) {
  if (!(mean_level > 0.0))
    throw DomainError("mean pixel level must be positive (region is all black?)");
  if (std::isnan(level_db)) throw DomainError("noise level is NaN");
  return mean_level * std::pow(10.0, level_db / 20.0);
}

/// Inverse of db_to_std: 20 * log10(std / T).
inline double std_to_db(double noise_std, double mean_level) {
  if (!(mean_level > 0.0))
    throw DomainError("mean pixel level must be positive (region is all black?)");
  if (!(noise_std >= 0.0)) throw DomainError("noise std must be non-negative");
  return 20.0 * std::log10(noise_std / mean_level);
}

enum class NoiseLaw {
  random_phase,    ///< flat amplitude spectrum, uniform random phases
  white_gaussian,  ///< i.i.d. normal samples
};

inline std::string_view to_string(NoiseLaw law) {
  return law == NoiseLaw::random_phase ? "random-phase" : "gaussian";
}

inline NoiseLaw parse_noise_law(std::string_view s) {
  if (s == "random-phase" || s == "random_phase") return NoiseLaw::random_phase;
  if (s == "gaussian" || s == "white-gaussian") return NoiseLaw::white_gaussian;
  throw ValidationError("unknown noise law '" + std::string(s) + "'");
}

struct NoiseSpec {
  Rect region;
  double level_db = kNoiseDisabled;
  std::uint64_t seed = 0;
  NoiseLaw law = NoiseLaw::random_phase;
};

namespace detail {

/// Real field over a w x h region with a flat amplitude spectrum and random
/// phases. Phases are drawn once per conjugate pair so the inverse transform
/// is real; self-conjugate bins get a random sign; DC is zero.
inline std::vector<double> random_phase_field(int w, int h, Rng& rng) {
  std::vector<fft::cplx> spectrum(static_cast<std::size_t>(w) * h);
  for (int u = 0; u < h; ++u)
    for (int v = 0; v < w; ++v) {
      const int pu = (h - u) % h;
      const int pv = (w - v) % w;
      const std::size_t here = static_cast<std::size_t>(u) * w + v;
      const std::size_t partner = static_cast<std::size_t>(pu) * w + pv;
      if (here == 0) continue;
      if (here == partner) {
        spectrum[here] = rng.uniform() < 0.5 ? -1.0 : 1.0;
      } else if (here < partner) {
        const double phase = 2.0 * std::numbers::pi * rng.uniform();
        spectrum[here] = std::polar(1.0, phase);
        spectrum[partner] = std::conj(spectrum[here]);
      }
    }
  spectrum = fft::dft2(std::move(spectrum), h, w, fft::Direction::inverse);
  std::vector<double> field(spectrum.size());
  for (std::size_t i = 0; i < field.size(); ++i) field[i] = spectrum[i].real();
  return field;
}

inline std::vector<double> gaussian_field(std::size_t n, Rng& rng) {
  std::vector<double> field(n);
  for (double& x : field) x = rng.normal();
  return field;
}

}  // namespace detail

/// Additive noise field for a width x height image. Inside `spec.region` the
/// field has zero mean and population std equal to db_to_std(level, mean_level);
/// outside it is zero. Pure function of its arguments.
inline ImagePlane synth_noise(const NoiseSpec& spec, int width, int height, double mean_level) {
  if (spec.region.empty()) throw ValidationError("noise region is empty");
  if (spec.region.area() < 2) throw ValidationError("noise region needs at least two pixels");
  if (!spec.region.inside(width, height)) throw ValidationError("noise region lies outside the image");
  ImagePlane out(width, height, 1);
  const double target = db_to_std(spec.level_db, mean_level);
  if (target == 0.0) return out;

  const int w = spec.region.width;
  const int h = spec.region.height;
  Rng rng(spec.seed);
  std::vector<double> field = spec.law == NoiseLaw::random_phase
                                  ? detail::random_phase_field(w, h, rng)
                                  : detail::gaussian_field(static_cast<std::size_t>(w) * h, rng);
  const double mu = mean_of(field);
  for (double& x : field) x -= mu;
  std::vector<double> squares(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) squares[i] = field[i] * field[i];
  const double sd = std::sqrt(mean_of(squares));
  if (!(sd > 0.0)) return out;
  const double gain = target / sd;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out.at(spec.region.y + y, spec.region.x + x) = field[static_cast<std::size_t>(y) * w + x] * gain;
  return out;
}

/// Adds a single-channel field to every channel inside `region`, clamping the
/// result to [0, 255]. Pixels outside the region are untouched.
inline void add_field(ImagePlane& image, const ImagePlane& field, const Rect& region) {
  if (field.width() != image.width() || field.height() != image.height())
    throw ValidationError("noise field and image sizes differ");
  for (int c = 0; c < image.channels(); ++c)
    for (int y = region.y; y < region.y + region.height; ++y)
      for (int x = region.x; x < region.x + region.width; ++x)
        image.at(c, y, x) = std::clamp(image.at(c, y, x) + field.at(y, x), 0.0, 255.0);
}

/// Image plus noise inside the spec region. T is the mean pixel value of the
/// clean image over that region.
inline ImagePlane perturb_image(const ImagePlane& image, const NoiseSpec& spec) {
  if (!spec.region.inside(image.width(), image.height()) || spec.region.empty())
    throw ValidationError("noise region incompatible with image");
  ImagePlane out = image;
  if (spec.level_db == kNoiseDisabled) return out;
  const double mean_level = region_mean(image, spec.region);
  add_field(out, synth_noise(spec, image.width(), image.height(), mean_level), spec.region);
  return out;
}

}  // namespace pcorr::stimuli
