#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/engine/graph.hpp"

namespace pcorr::filterbank {

/// Square spatial kernel, row-major, odd side length centred on the middle tap.
struct Kernel2D {
  int size = 0;
  std::vector<double> values;

  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * size + x]; }
  double sum() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  double l1() const {
    double s = 0.0;
    for (double v : values) s += std::abs(v);
    return s;
  }
};

struct GaborParams {
  std::vector<double> sigmas = {1, 2, 4, 8, 16, 32, 64};
  std::vector<double> lambda_multipliers = {1, 2};
  std::vector<double> orientations = {0, std::numbers::pi / 3, 2 * std::numbers::pi / 3, std::numbers::pi,
                                      4 * std::numbers::pi / 3, 5 * std::numbers::pi / 3};
  std::vector<double> phases = {0, std::numbers::pi / 2};
  int width = 224;
  int height = 224;
  int channels = 1;  ///< 3: every kernel applied to the channel mean
  int stride = 1;

  std::size_t kernel_count() const {
    return sigmas.size() * lambda_multipliers.size() * orientations.size() * phases.size();
  }
};

/// Half-width of the truncated support: ceil(3 sigma).
inline int gabor_radius(double sigma) { return static_cast<int>(std::ceil(3.0 * sigma - 1e-12)); }

/// Gaussian envelope times cos(2 pi u / lambda + phase), u the coordinate
/// along `orientation`. Support is +-ceil(3 sigma). The result is zero-mean:
/// odd-phase kernels are antisymmetrised exactly, others have a multiple of
/// the envelope subtracted. Unit L1 norm unless the kernel vanishes on the
/// pixel grid, in which case it is returned as all zeros.
inline Kernel2D gabor_kernel(double sigma, double lambda, double orientation, double phase) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("gabor sigma must be positive");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("gabor wavelength must be positive");
  const int r = gabor_radius(sigma);
  Kernel2D k{2 * r + 1, {}};
  k.values.resize(static_cast<std::size_t>(k.size) * k.size);
  std::vector<double> env(k.values.size());
  const double c = std::cos(orientation), s = std::sin(orientation);
  const double two_pi = 2.0 * std::numbers::pi;
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x) {
      const std::size_t i = static_cast<std::size_t>(y + r) * k.size + (x + r);
      env[i] = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      k.values[i] = env[i] * std::cos(two_pi * (x * c + y * s) / lambda + phase);
    }

  // Odd part of the carrier: cos(phase) = 0 means k(-p) = -k(p).
  const bool odd = std::abs(std::cos(phase)) < 1e-12;
  if (odd) {
    const std::size_t n = k.values.size();
    for (std::size_t i = 0; i < n / 2; ++i) {
      const double a = 0.5 * (k.values[i] - k.values[n - 1 - i]);
      k.values[i] = a;
      k.values[n - 1 - i] = -a;
    }
    k.values[n / 2] = 0.0;
  } else {
    double env_sum = 0.0;
    for (double e : env) env_sum += e;
    const double dc = k.sum() / env_sum;
    for (std::size_t i = 0; i < env.size(); ++i) k.values[i] -= dc * env[i];
  }

  double env_l1 = 0.0;
  for (double e : env) env_l1 += e;
  const double l1 = k.l1();
  if (l1 < 1e-6 * env_l1) {
    std::fill(k.values.begin(), k.values.end(), 0.0);
    return k;
  }
  for (double& v : k.values) v /= l1;
  return k;
}

struct GaborSpec {
  double sigma, lambda, orientation, phase;
};

/// Enumeration order: sigma, then lambda multiplier, orientation, phase.
inline std::vector<GaborSpec> gabor_specs(const GaborParams& p) {
  std::vector<GaborSpec> out;
  for (double s : p.sigmas)
    for (double m : p.lambda_multipliers)
      for (double o : p.orientations)
        for (double ph : p.phases) out.push_back({s, m * s, o, ph});
  return out;
}

/// Two-stage graph: one "same"-padded convolution per sigma (channels in
/// gabor_specs order), concatenated into "stage1"; "stage2" half-wave
/// rectifies it. Default taps: the rectified stage.
inline engine::NetworkGraph build_gabor_bank(const GaborParams& p) {
  using namespace engine;
  if (p.sigmas.empty() || p.lambda_multipliers.empty() || p.orientations.empty() || p.phases.empty())
    throw ValidationError("gabor parameter lists must be non-empty");
  if (p.channels != 1 && p.channels != 3) throw ValidationError("gabor bank input must have 1 or 3 channels");
  if (p.stride < 1) throw ValidationError("gabor stride must be >= 1");

  NetworkGraph g;
  g.name = "gabor";
  g.input = {p.channels, p.height, p.width};
  g.preprocessing.mean = {127.5};
  g.nodes.push_back(Node{"data", OpKind::input, {}, "data", {}, {}, {}});

  const std::size_t per_sigma = p.lambda_multipliers.size() * p.orientations.size() * p.phases.size();
  const auto specs = gabor_specs(p);
  std::vector<std::string> convs;
  for (std::size_t si = 0; si < p.sigmas.size(); ++si) {
    const int r = gabor_radius(p.sigmas[si]);
    const int size = 2 * r + 1;
    const int out = static_cast<int>(per_sigma);
    WeightTensor w{{out, p.channels, size, size}, {}};
    w.values.reserve(static_cast<std::size_t>(out) * p.channels * size * size);
    for (std::size_t j = 0; j < per_sigma; ++j) {
      const auto& sp = specs[si * per_sigma + j];
      const Kernel2D k = gabor_kernel(sp.sigma, sp.lambda, sp.orientation, sp.phase);
      for (int c = 0; c < p.channels; ++c)
        for (double v : k.values) w.values.push_back(static_cast<float>(v / p.channels));
    }
    std::string id = "gabor_s" + std::to_string(si);
    Node conv{id, OpKind::conv2d, {"data"}, {}, ConvParams{out, size, size, p.stride, p.stride, r, r, 1}, {}, {}};
    conv.tensors["weight"] = std::move(w);
    g.nodes.push_back(std::move(conv));
    convs.push_back(std::move(id));
  }
  g.nodes.push_back(Node{"stage1", OpKind::concat, convs, "stage1", {}, {}, {}});
  g.nodes.push_back(Node{"stage2", OpKind::relu, {"stage1"}, "stage2", {}, {}, {}});
  g.default_taps = {"stage2"};
  g.validate();
  return g;
}

}  // namespace pcorr::filterbank
