#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "pcorr/core/rng.hpp"
#include "pcorr/engine/session.hpp"
#include "pcorr/filterbank/gabor.hpp"
#include "pcorr/filterbank/pyramid.hpp"
#include "pcorr/stimuli/grating.hpp"

using namespace pcorr;
using namespace pcorr::filterbank;

namespace {

GaborParams small_gabor(int size) {
  GaborParams p;
  p.sigmas = {1, 2};
  p.width = p.height = size;
  return p;
}

ImagePlane impulse(int size, double amplitude) {
  ImagePlane img(size, size, 1, 127.5);
  img.at(size / 2, size / 2) += amplitude;
  return img;
}

}  // namespace

TEST(Gabor, DefaultGridHas168Kernels) {
  const GaborParams p;
  EXPECT_EQ(p.kernel_count(), 168u);
  EXPECT_EQ(gabor_specs(p).size(), 168u);
  GaborParams small = p;
  small.width = small.height = 16;
  small.sigmas = {1, 2, 4, 8, 16, 32, 64};
  const auto g = build_gabor_bank(small);
  EXPECT_EQ(g.node("stage1").output.c, 168);
  EXPECT_EQ(g.node("stage2").output.c, 168);
}

TEST(Gabor, OddKernelsSumToZero) {
  for (const auto& s : gabor_specs(GaborParams{})) {
    if (s.phase == 0.0) continue;
    const Kernel2D k = gabor_kernel(s.sigma, s.lambda, s.orientation, s.phase);
    EXPECT_NEAR(k.sum(), 0.0, 1e-12) << s.sigma << " " << s.lambda << " " << s.orientation;
  }
}

TEST(Gabor, EvenKernelsAreZeroMeanWithUnitL1) {
  for (const auto& s : gabor_specs(GaborParams{})) {
    const Kernel2D k = gabor_kernel(s.sigma, s.lambda, s.orientation, s.phase);
    EXPECT_NEAR(k.sum(), 0.0, 1e-12);
    const double l1 = k.l1();
    EXPECT_TRUE(l1 == 0.0 || std::abs(l1 - 1.0) < 1e-12) << l1;
  }
}

TEST(Gabor, HalfTurnLeavesEvenKernelsUnchanged) {
  for (double sigma : {1.0, 2.0, 4.0, 8.0})
    for (double m : {1.0, 2.0}) {
      const Kernel2D a = gabor_kernel(sigma, m * sigma, 0.0, 0.0);
      const Kernel2D b = gabor_kernel(sigma, m * sigma, std::numbers::pi, 0.0);
      ASSERT_EQ(a.size, b.size);
      for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-12);
    }
}

TEST(Gabor, SupportIsThreeSigma) {
  EXPECT_EQ(gabor_kernel(1, 2, 0, 0).size, 7);
  EXPECT_EQ(gabor_kernel(64, 64, 0, 0).size, 385);
  EXPECT_EQ(gabor_kernel(2.5, 5, 0, 0).size, 17);
}

TEST(Gabor, RejectsNonPositiveSigma) {
  EXPECT_THROW(gabor_kernel(0.0, 1.0, 0, 0), DomainError);
  EXPECT_THROW(gabor_kernel(-1.0, 1.0, 0, 0), DomainError);
}

TEST(Gabor, ImpulseReproducesMirroredKernel) {
  const int size = 33;
  const auto p = small_gabor(size);
  const auto g = build_gabor_bank(p);
  engine::InferenceSession s(g);
  const auto out = s.forward(impulse(size, 1.0), g.resolve_taps({"stage1"})).at("stage1");
  const auto specs = gabor_specs(p);
  const int c0 = size / 2;
  for (std::size_t ch = 0; ch < specs.size(); ++ch) {
    const Kernel2D k = gabor_kernel(specs[ch].sigma, specs[ch].lambda, specs[ch].orientation, specs[ch].phase);
    const int r = k.size / 2;
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        const double got = out[(ch * size + (c0 + dy)) * size + (c0 + dx)];
        const double want = static_cast<float>(k.at(r - dy, r - dx));
        EXPECT_NEAR(got, want, 1e-12) << ch;
      }
  }
}

TEST(Gabor, StageOneIsLinear) {
  const int size = 24;
  const auto g = build_gabor_bank(small_gabor(size));
  engine::InferenceSession s(g);
  Rng rng(3);
  ImagePlane dx(size, size), dy(size, size);
  for (double& v : dx.data()) v = rng.uniform(-50, 50);
  for (double& v : dy.data()) v = rng.uniform(-50, 50);
  const double a = 0.7, b = -1.3;
  auto lift = [&](const ImagePlane& d, double scale) {
    ImagePlane img(size, size, 1, 127.5);
    for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] += scale * d.data()[i];
    return img;
  };
  ImagePlane mix(size, size, 1, 127.5);
  for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] += a * dx.data()[i] + b * dy.data()[i];
  const auto taps = g.resolve_taps({"stage1"});
  const auto rx = s.forward(lift(dx, 1), taps).values[0];
  const auto ry = s.forward(lift(dy, 1), taps).values[0];
  const auto rm = s.forward(mix, taps).values[0];
  double scale = 0;
  for (double v : rm) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < rm.size(); ++i) EXPECT_NEAR(rm[i], a * rx[i] + b * ry[i], 1e-9 * scale);
}

TEST(Gabor, PreferredOrientationWinsAndMatchesInnerProduct) {
  // sigma 4, lambda 8, orientation 0, even phase; grating with the same period.
  const int size = 64;
  GaborParams p;
  p.sigmas = {4};
  p.lambda_multipliers = {2};
  p.orientations = {0};
  p.phases = {0};
  p.width = p.height = size;
  const auto g = build_gabor_bank(p);
  engine::InferenceSession s(g);
  const Kernel2D k = gabor_kernel(4, 8, 0, 0);
  auto respond = [&](double orientation) {
    const ImagePlane img = stimuli::render_grating({0.5, size / 8.0, orientation, 0.0}, size, size);
    const auto out = s.forward(img, g.taps()).at("stage2");
    // Direct inner product at the centre pixel.
    const int r = k.size / 2, c = size / 2;
    double dot = 0.0;
    for (int y = -r; y <= r; ++y)
      for (int x = -r; x <= r; ++x)
        dot += static_cast<double>(static_cast<float>(k.at(y + r, x + r))) * (img.at(c + y, c + x) - 127.5);
    EXPECT_NEAR(out[c * size + c], std::max(0.0, dot), 1e-9);
    double total = 0.0;
    for (double v : out) total += v;
    return total;
  };
  EXPECT_GT(respond(0.0), respond(std::numbers::pi / 2));
}

TEST(Gabor, RgbBankFiltersChannelMean) {
  auto p = small_gabor(20);
  p.channels = 3;
  const auto rgb = build_gabor_bank(p);
  const auto gray = build_gabor_bank(small_gabor(20));
  ImagePlane img(20, 20, 3);
  ImagePlane mean(20, 20, 1);
  Rng rng(8);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) {
      double s = 0;
      for (int c = 0; c < 3; ++c) s += img.at(c, y, x) = rng.uniform(0, 255);
      mean.at(y, x) = s / 3;
    }
  const auto a = engine::forward(rgb, img, rgb.taps()).values[0];
  const auto b = engine::forward(gray, mean, gray.taps()).values[0];
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-5);
}

TEST(Pyramid, AngularGainNormalises) {
  for (int K : {2, 3, 4, 6}) {
    PyramidParams p;
    p.orientations = K;
    for (double theta : {0.1, 0.7, 1.9, 3.0}) {
      double sum = 0.0;
      for (int k = 0; k < K; ++k) {
        const double a = filterbank::detail::angular_gain(K) * std::pow(std::cos(theta - std::numbers::pi * k / K), K - 1);
        sum += a * a;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12) << K;
    }
  }
}

TEST(Pyramid, KernelsAreRealAndZeroMean) {
  PyramidParams p;
  p.scales = 3;
  for (int j = 0; j < p.scales; ++j)
    for (int k = 0; k < p.orientations; ++k) EXPECT_NEAR(pyramid_kernel(p, j, k).sum(), 0.0, 1e-12);
}

TEST(Pyramid, BandPowerIsFlatOverPassband) {
  // Zero-padded DFT of the actual FIR kernels (not the design samples).
  PyramidParams p;
  const int P = p.resolved_kernel_size();
  const int N = 2 * P;
  std::vector<double> power(static_cast<std::size_t>(N) * N, 0.0);
  for (int j = 0; j < p.scales; ++j)
    for (int k = 0; k < p.orientations; ++k) {
      const Kernel2D h = pyramid_kernel(p, j, k);
      std::vector<fft::cplx> buf(power.size());
      for (int y = 0; y < P; ++y)
        for (int x = 0; x < P; ++x) buf[static_cast<std::size_t>(y) * N + x] = h.at(y, x);
      buf = fft::dft2(std::move(buf), N, N, fft::Direction::forward);
      for (std::size_t i = 0; i < power.size(); ++i) power[i] += std::norm(buf[i]);
    }
  double lo = INFINITY, hi = 0.0;
  int counted = 0;
  for (int my = 0; my < N; ++my)
    for (int mx = 0; mx < N; ++mx) {
      const double wx = 2 * std::numbers::pi * (mx <= N / 2 ? mx : mx - N) / N;
      const double wy = 2 * std::numbers::pi * (my <= N / 2 ? my : my - N) / N;
      const double r = std::hypot(wx, wy);
      if (r < p.passband_low() || r > p.passband_high()) continue;
      lo = std::min(lo, power[static_cast<std::size_t>(my) * N + mx]);
      hi = std::max(hi, power[static_cast<std::size_t>(my) * N + mx]);
      ++counted;
    }
  EXPECT_GT(counted, 1000);
  RecordProperty("min_power", std::to_string(lo));
  RecordProperty("max_power", std::to_string(hi));
  EXPECT_GT(lo, 0.98);
  EXPECT_LT(hi, 1.02);
}

TEST(Pyramid, BankShapesAndTaps) {
  PyramidParams p;
  p.width = p.height = 32;
  const auto g = build_pyramid_bank(p);
  EXPECT_EQ(g.node("stage1").output, (engine::Shape{16, 32, 32}));
  EXPECT_EQ(g.taps().size(), 1u);
  EXPECT_EQ(g.taps()[0].node, "stage2");
}

TEST(Pyramid, ImpulseResponseIsTheBandFilter) {
  PyramidParams p;
  p.scales = 2;
  p.width = p.height = 41;
  const auto g = build_pyramid_bank(p);
  const auto out = engine::forward(g, impulse(41, 1.0), g.resolve_taps({"stage1"})).at("stage1");
  const Kernel2D h = pyramid_kernel(p, 1, 2);
  const int ch = 1 * p.orientations + 2, c0 = 20, r = h.size / 2;
  for (int dy = -10; dy <= 10; ++dy)
    for (int dx = -10; dx <= 10; ++dx)
      EXPECT_NEAR(out[(ch * 41 + c0 + dy) * 41 + c0 + dx], static_cast<float>(h.at(r + dy, r + dx)), 1e-9);
}
