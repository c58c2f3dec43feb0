#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/core/fft.hpp"
#include "pcorr/engine/graph.hpp"
#include "pcorr/filterbank/gabor.hpp"

namespace pcorr::filterbank {

/// Undecimated steerable pyramid: `scales` radial bands, one octave apart,
/// times `orientations` angular windows. Bands are designed on a P x P
/// frequency grid (P = kernel_size, odd) and used as P x P spatial kernels.
struct PyramidParams {
  int scales = 4;
  int orientations = 4;
  double transition_octaves = 1.0;  ///< width of each radial raised-cosine edge, in (0, 1]
  int kernel_size = 0;              ///< 0: 16 * 2^scales + 1
  int width = 224;
  int height = 224;
  int channels = 1;

  int resolved_kernel_size() const { return kernel_size > 0 ? kernel_size : 16 * (1 << scales) + 1; }

  /// Radial frequencies (radians/pixel) on which the band powers sum to one.
  double passband_low() const { return std::numbers::pi / (1 << scales); }
  double passband_high() const { return std::numbers::pi / 2 * std::pow(2.0, 1.0 - transition_octaves); }
};

namespace detail {

/// Radial highpass edge: 0 below pi/2 * 2^-t, 1 above pi/2, raised-cosine in log2 r between.
inline double radial_high(double r, double t) {
  if (r <= 0.0) return 0.0;
  const double u = std::log2(2.0 * r / std::numbers::pi) / t;  // -1 .. 0 across the edge
  if (u <= -1.0) return 0.0;
  if (u >= 0.0) return 1.0;
  return std::cos(std::numbers::pi / 2 * u);
}

inline double radial_low(double r, double t) {
  const double h = radial_high(r, t);
  return std::sqrt(std::max(0.0, 1.0 - h * h));
}

inline double angular_gain(int k_count) {
  const int n = k_count - 1;
  double num = std::pow(2.0, n), fact_n = 1.0, fact_2n = 1.0;
  for (int i = 2; i <= n; ++i) fact_n *= i;
  for (int i = 2; i <= 2 * n; ++i) fact_2n *= i;
  return num * fact_n / std::sqrt(k_count * fact_2n);
}

}  // namespace detail

/// Frequency response of band (scale j, orientation k) at (wx, wy) in radians/pixel.
inline std::complex<double> pyramid_response(const PyramidParams& p, int j, int k, double wx, double wy) {
  const double r = std::hypot(wx, wy);
  const double t = p.transition_octaves;
  double radial = detail::radial_low(r / 2.0, t) * detail::radial_high(std::ldexp(r, j), t);
  for (int i = 0; i < j; ++i) radial *= detail::radial_low(std::ldexp(r, i), t);
  if (radial == 0.0) return {};
  const int K = p.orientations;
  const double theta = std::atan2(wy, wx) - std::numbers::pi * k / K;
  const double ang = detail::angular_gain(K) * std::pow(std::cos(theta), K - 1);
  std::complex<double> phase = 1.0;
  for (int i = 0; i < K - 1; ++i) phase *= std::complex<double>(0.0, -1.0);
  return phase * (radial * ang);
}

/// Spatial impulse response of one band, centred in a P x P kernel.
inline Kernel2D pyramid_kernel(const PyramidParams& p, int j, int k) {
  const int P = p.resolved_kernel_size();
  const int half = P / 2;
  std::vector<fft::cplx> spec(static_cast<std::size_t>(P) * P);
  for (int my = -half; my <= half; ++my)
    for (int mx = -half; mx <= half; ++mx) {
      const double wx = 2.0 * std::numbers::pi * mx / P, wy = 2.0 * std::numbers::pi * my / P;
      spec[static_cast<std::size_t>((my + P) % P) * P + (mx + P) % P] = pyramid_response(p, j, k, wx, wy);
    }
  const auto h = fft::dft2(std::move(spec), P, P, fft::Direction::inverse);
  Kernel2D out{P, std::vector<double>(static_cast<std::size_t>(P) * P)};
  for (int y = -half; y <= half; ++y)
    for (int x = -half; x <= half; ++x)
      out.values[static_cast<std::size_t>(y + half) * P + (x + half)] =
          h[static_cast<std::size_t>((y + P) % P) * P + (x + P) % P].real() / (static_cast<double>(P) * P);
  return out;
}

/// Two-stage graph like the Gabor bank: "stage1" holds the band responses
/// (channel = scale * orientations + orientation), "stage2" rectifies them.
/// Weights are the mirrored impulse responses, so the cross-correlating
/// convolution node applies each band as a true filter.
inline engine::NetworkGraph build_pyramid_bank(const PyramidParams& p) {
  using namespace engine;
  if (p.scales < 1 || p.orientations < 2) throw ValidationError("pyramid needs >= 1 scale and >= 2 orientations");
  if (!(p.transition_octaves > 0.0 && p.transition_octaves <= 1.0))
    throw ValidationError("pyramid transition width must lie in (0, 1] octaves");
  const int P = p.resolved_kernel_size();
  if (P % 2 == 0) throw ValidationError("pyramid kernel size must be odd");
  if (p.channels != 1 && p.channels != 3) throw ValidationError("pyramid input must have 1 or 3 channels");

  NetworkGraph g;
  g.name = "pyramid";
  g.input = {p.channels, p.height, p.width};
  g.preprocessing.mean = {127.5};
  g.nodes.push_back(Node{"data", OpKind::input, {}, "data", {}, {}, {}});
  const int bands = p.scales * p.orientations;
  WeightTensor w{{bands, p.channels, P, P}, {}};
  w.values.reserve(static_cast<std::size_t>(bands) * p.channels * P * P);
  for (int j = 0; j < p.scales; ++j)
    for (int k = 0; k < p.orientations; ++k) {
      const Kernel2D h = pyramid_kernel(p, j, k);
      for (int c = 0; c < p.channels; ++c)
        for (auto it = h.values.rbegin(); it != h.values.rend(); ++it)
          w.values.push_back(static_cast<float>(*it / p.channels));
    }
  Node conv{"stage1", OpKind::conv2d, {"data"}, "stage1", ConvParams{bands, P, P, 1, 1, P / 2, P / 2, 1}, {}, {}};
  conv.tensors["weight"] = std::move(w);
  g.nodes.push_back(std::move(conv));
  g.nodes.push_back(Node{"stage2", OpKind::relu, {"stage1"}, "stage2", {}, {}, {}});
  g.default_taps = {"stage2"};
  g.validate();
  return g;
}

}  // namespace pcorr::filterbank
