#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/core/fft.hpp"
#include "pcorr/core/numeric.hpp"
#include "pcorr/core/rng.hpp"
#include "pcorr/image.hpp"
#include "pcorr/stimuli/noise.hpp"

namespace pcorr::stats {

/// Image-statistic predictors of masking thresholds. These are simple
/// stand-ins used to rank the model correlates against weak baselines.
struct BaselinePredictors {
  double rms_contrast = 0.0;     ///< std / mean of the region
  double snr_db = 0.0;           ///< 20 log10(region std / reference std)
  double spectral_change = 0.0;  ///< mean |A(perturbed) - A(clean)| per frequency bin
};

struct BaselineOptions {
  double reference_std = 25.5;  ///< 10% of the pixel range
  std::vector<double> levels_db = {-40, -35, -30, -25, -20, -15, -10, -5, 0, 5, 10, 15, 20, 25};
  stimuli::NoiseLaw law = stimuli::NoiseLaw::random_phase;
  std::uint64_t seed = 0;
};

namespace detail {

/// Channel-mean luminance inside the region, row-major.
inline std::vector<double> region_luminance(const ImagePlane& img, const Rect& r) {
  if (r.empty()) throw ValidationError("baseline region is empty");
  if (!r.inside(img.width(), img.height())) throw ValidationError("baseline region lies outside the image");
  std::vector<double> out(static_cast<std::size_t>(r.area()));
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) {
      double s = 0.0;
      for (int c = 0; c < img.channels(); ++c) s += img.at(c, r.y + y, r.x + x);
      out[static_cast<std::size_t>(y) * r.width + x] = s / img.channels();
    }
  return out;
}

inline std::vector<double> amplitude_spectrum(const std::vector<double>& v, int w, int h) {
  std::vector<fft::cplx> buf(v.begin(), v.end());
  buf = fft::dft2(std::move(buf), h, w, fft::Direction::forward);
  std::vector<double> a(buf.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::abs(buf[i]) / static_cast<double>(buf.size());
  return a;
}

}  // namespace detail

inline double rms_contrast(const ImagePlane& img, const Rect& region) {
  const auto v = detail::region_luminance(img, region);
  const double mu = mean_of(v);
  if (!(mu > 0.0)) throw DomainError("rms contrast needs a positive region mean");
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mu) * (v[i] - mu);
  return std::sqrt(mean_of(sq)) / mu;
}

inline BaselinePredictors baseline_predictors(const ImagePlane& img, const Rect& region,
                                              const BaselineOptions& opt = {}) {
  BaselinePredictors out;
  const auto clean = detail::region_luminance(img, region);
  const double mu = mean_of(clean);
  std::vector<double> sq(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) sq[i] = (clean[i] - mu) * (clean[i] - mu);
  const double sd = std::sqrt(mean_of(sq));
  out.rms_contrast = mu > 0.0 ? sd / mu : 0.0;
  out.snr_db = sd > 0.0 ? 20.0 * std::log10(sd / opt.reference_std) : -INFINITY;

  const auto a_clean = detail::amplitude_spectrum(clean, region.width, region.height);
  std::vector<double> per_level;
  for (std::size_t li = 0; li < opt.levels_db.size(); ++li) {
    const stimuli::NoiseSpec spec{region, opt.levels_db[li], derive_seed(opt.seed, "baseline", li), opt.law};
    const auto noisy = detail::region_luminance(stimuli::perturb_image(img, spec), region);
    const auto a = detail::amplitude_spectrum(noisy, region.width, region.height);
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = std::abs(a[i] - a_clean[i]);
    per_level.push_back(mean_of(d));
  }
  out.spectral_change = mean_of(per_level);
  return out;
}

}  // namespace pcorr::stats
