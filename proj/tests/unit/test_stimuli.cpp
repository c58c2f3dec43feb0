#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include "pcorr/core/fft.hpp"
#include "pcorr/image_io.hpp"
#include "pcorr/stimuli/grating.hpp"
#include "pcorr/stimuli/noise.hpp"
#include "pcorr/stimuli/patterns.hpp"

using namespace pcorr;
using namespace pcorr::stimuli;

namespace {

double population_std(const ImagePlane& f, const Rect& r) {
  double s = 0, s2 = 0;
  for (int y = r.y; y < r.y + r.height; ++y)
    for (int x = r.x; x < r.x + r.width; ++x) {
      s += f.at(y, x);
      s2 += f.at(y, x) * f.at(y, x);
    }
  const double n = static_cast<double>(r.area());
  return std::sqrt(s2 / n - (s / n) * (s / n));
}

struct Box {
  int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1;
  long count = 0;
};

Box white_box(const ImagePlane& img) {
  Box b;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (img.at(y, x) > 0) {
        b.x0 = std::min(b.x0, x), b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x), b.y1 = std::max(b.y1, y);
        ++b.count;
      }
  return b;
}

}  // namespace

TEST(NoiseScale, ClosedFormPoints) {
  EXPECT_DOUBLE_EQ(std_to_db(37.0, 37.0), 0.0);
  EXPECT_NEAR(db_to_std(-20.0, 100.0), 10.0, 1e-12);
  // 20 log10 2 evaluated to 20 digits with arbitrary-precision arithmetic.
  EXPECT_NEAR(std_to_db(2.0 * 55.5, 55.5), 6.0205999132796239042, 1e-13);
}

TEST(NoiseScale, RoundTripOverTwelveDecades) {
  for (double T : {0.5, 1.0, 87.3, 255.0})
    for (int e = -60; e <= 60; ++e) {
      const double x = std::pow(10.0, e / 10.0);
      const double back = db_to_std(std_to_db(x, T), T);
      EXPECT_LE(std::abs(back - x) / x, 1e-12) << x;
    }
}

TEST(NoiseScale, NonPositiveMeanIsDomainError) {
  EXPECT_THROW(db_to_std(0.0, 0.0), DomainError);
  EXPECT_THROW(db_to_std(0.0, -3.0), DomainError);
  EXPECT_THROW(std_to_db(1.0, 0.0), DomainError);
}

TEST(Noise, StdMatchesTargetOnHundredSeeds) {
  const Rect region{10, 12, 40, 30};
  for (NoiseLaw law : {NoiseLaw::random_phase, NoiseLaw::white_gaussian})
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const double level = -40.0 + static_cast<double>(seed % 14) * 5.0;
      const ImagePlane f = synth_noise({region, level, seed, law}, 64, 64, 93.0);
      const double target = 93.0 * std::pow(10.0, level / 20.0);
      EXPECT_LE(std::abs(population_std(f, region) - target), 0.01 * target);
      double mean = 0;
      for (int y = region.y; y < region.y + region.height; ++y)
        for (int x = region.x; x < region.x + region.width; ++x) mean += f.at(y, x);
      EXPECT_LE(std::abs(mean / region.area()), 1e-9 * target);
    }
}

TEST(Noise, ZeroOutsideRegionAndDeterministic) {
  const Rect region{5, 6, 20, 17};
  const NoiseSpec spec{region, 0.0, 1234, NoiseLaw::random_phase};
  const ImagePlane a = synth_noise(spec, 40, 32, 50.0);
  const ImagePlane b = synth_noise(spec, 40, 32, 50.0);
  EXPECT_EQ(a, b);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 40; ++x)
      if (!(x >= 5 && x < 25 && y >= 6 && y < 23)) EXPECT_EQ(a.at(y, x), 0.0);
  const ImagePlane c = synth_noise({region, 0.0, 1235, NoiseLaw::random_phase}, 40, 32, 50.0);
  EXPECT_NE(a, c);
}

TEST(Noise, RandomPhaseSpectrumIsFlat) {
  const Rect region{0, 0, 24, 18};
  const ImagePlane f = synth_noise({region, 0.0, 7, NoiseLaw::random_phase}, 24, 18, 100.0);
  std::vector<fft::cplx> buf(f.data().begin(), f.data().end());
  buf = fft::dft2(std::move(buf), 18, 24, fft::Direction::forward);
  EXPECT_NEAR(std::abs(buf[0]), 0.0, 1e-8);
  const double ref = std::abs(buf[1]);
  for (std::size_t i = 1; i < buf.size(); ++i) EXPECT_NEAR(std::abs(buf[i]), ref, 1e-9 * ref);
}

TEST(Noise, EmptyRegionRejected) {
  EXPECT_THROW(synth_noise({Rect{0, 0, 0, 5}, 0.0, 1}, 10, 10, 50.0), ValidationError);
  EXPECT_THROW(synth_noise({Rect{8, 8, 5, 5}, 0.0, 1}, 10, 10, 50.0), ValidationError);
}

TEST(Perturb, DisabledLevelIsIdentity) {
  ImagePlane img(16, 16, 3, 80.0);
  img.at(1, 3, 4) = 200;
  EXPECT_EQ(perturb_image(img, {centered_square(16, 16), kNoiseDisabled, 3}), img);
}

TEST(Perturb, AddsInsideRegionAndClamps) {
  ImagePlane img(6, 6, 1, 100.0);
  img.at(2, 2) = 250.0;
  ImagePlane field(6, 6, 1, 0.0);
  field.at(3, 3) = 5.0;
  field.at(2, 2) = 20.0;
  field.at(0, 0) = 9.0;  // outside the region: ignored
  add_field(img, field, Rect{1, 1, 4, 4});
  EXPECT_EQ(img.at(3, 3), 105.0);
  EXPECT_EQ(img.at(2, 2), 255.0);
  EXPECT_EQ(img.at(0, 0), 100.0);
  EXPECT_EQ(img.at(4, 4), 100.0);
}

TEST(Perturb, ScaleUsesCleanRegionMean) {
  ImagePlane img(32, 32, 1, 0.0);
  const Rect region{8, 8, 16, 16};
  for (int y = 8; y < 24; ++y)
    for (int x = 8; x < 24; ++x) img.at(y, x) = 120.0;
  const NoiseSpec spec{region, -20.0, 11, NoiseLaw::white_gaussian};
  const ImagePlane out = perturb_image(img, spec);
  ImagePlane diff(32, 32);
  for (std::size_t i = 0; i < diff.size(); ++i) diff.data()[i] = out.data()[i] - img.data()[i];
  EXPECT_NEAR(population_std(diff, region), 12.0, 1e-9);
  EXPECT_THROW(perturb_image(ImagePlane(32, 32), spec), DomainError);
}

TEST(Configs, NinetyPerParadigmWithExactGrids) {
  const std::vector<double> seg = {9, 12.3, 19.4}, crowd = {15.1, 20.6, 32.4}, shape = {9, 15.1, 22.7};
  for (Paradigm p : {Paradigm::segmentation, Paradigm::crowding, Paradigm::shape}) {
    const auto configs = enumerate_configs(p);
    ASSERT_EQ(configs.size(), 90u);
    std::set<std::string> ids;
    std::set<double> sizes, jitters;
    std::set<int> locations;
    for (const auto& c : configs) {
      ids.insert(c.id());
      sizes.insert(c.element_size);
      jitters.insert(c.jitter_multiplier);
      locations.insert(c.location_index);
      EXPECT_DOUBLE_EQ(c.jitter_px(), c.jitter_multiplier * 0.0625 * c.element_size);
    }
    EXPECT_EQ(ids.size(), 90u);
    const auto& want_sizes = p == Paradigm::segmentation ? seg : p == Paradigm::crowding ? crowd : shape;
    EXPECT_EQ(std::vector<double>(sizes.begin(), sizes.end()), want_sizes);
    if (p == Paradigm::shape) {
      EXPECT_EQ(std::vector<double>(jitters.begin(), jitters.end()), (std::vector<double>{1, 2, 5, 10, 15}));
      EXPECT_EQ(locations.size(), 6u);
    } else {
      EXPECT_EQ(std::vector<double>(jitters.begin(), jitters.end()), (std::vector<double>{1, 2, 3}));
      EXPECT_EQ(locations.size(), 10u);
    }
  }
  EXPECT_THROW(parse_paradigm("texture"), ValidationError);
}

TEST(Patterns, EveryConfigRendersDeterministically) {
  for (int size : {224, 112})
    for (Paradigm p : {Paradigm::segmentation, Paradigm::crowding, Paradigm::shape})
      for (const auto& cfg : enumerate_configs(p))
        for (Condition cond : {Condition::easy, Condition::hard}) {
          const RenderOptions opt{size, size};
          const CategoryLabel label{category_count(p) - 1, cond};
          ImagePlane a;
          ASSERT_NO_THROW(a = render_pattern(cfg, label, 99, opt)) << cfg.id() << " at " << size;
          EXPECT_EQ(a, render_pattern(cfg, label, 99, opt)) << cfg.id();
          for (double v : a.data()) ASSERT_TRUE(v == 0.0 || v == 255.0);
        }
}

TEST(Patterns, BlankCrowdingIsOneGlyph) {
  PatternConfig cfg = enumerate_configs(Paradigm::crowding)[0];
  cfg.jitter_multiplier = 0.0;
  const ImagePlane img = render_pattern(cfg, {2, Condition::easy}, 5);
  std::vector<stimuli::detail::Pixel> glyph;
  const int h = static_cast<int>(std::lround(cfg.element_size));
  const int w = static_cast<int>(std::lround(cfg.element_size * kGlyphColumns / kGlyphRows));
  stimuli::detail::raster_glyph('C', 0, 0, w, h, glyph);
  EXPECT_EQ(white_box(img).count, static_cast<long>(glyph.size()));
  const ImagePlane cluttered = render_pattern(cfg, {2, Condition::hard}, 5);
  EXPECT_GT(white_box(cluttered).count, 5 * white_box(img).count);
}

TEST(Patterns, SegmentationConditionsDifferOnlyAtCentralElement) {
  for (const auto& cfg : enumerate_configs(Paradigm::segmentation)) {
    if (cfg.location_index != 0) continue;
    for (int category : {0, 1}) {
      const ImagePlane easy = render_pattern(cfg, {category, Condition::easy}, 21);
      const ImagePlane hard = render_pattern(cfg, {category, Condition::hard}, 21);
      // Central element footprint: one line length plus jitter around the
      // middle cell (rounded up for even grids).
      const double reach = cfg.element_size / 2 + cfg.jitter_px() + 1;
      const double centre = (cfg.grid_lines - 1) / 2.0;
      const double mid = 112 + (std::lround(centre) - centre) * 1.5 * cfg.element_size;
      int differing = 0;
      for (int y = 0; y < 224; ++y)
        for (int x = 0; x < 224; ++x)
          if (easy.at(y, x) != hard.at(y, x)) {
            ++differing;
            EXPECT_LE(std::abs(x - mid), reach) << cfg.id();
            EXPECT_LE(std::abs(y - mid), reach) << cfg.id();
          }
      EXPECT_GT(differing, 0);
    }
  }
}

TEST(Patterns, JitterStaysWithinBound) {
  for (Paradigm p : {Paradigm::crowding, Paradigm::shape}) {
    for (const auto& cfg : enumerate_configs(p)) {
      if (cfg.location_index != 0 && p == Paradigm::crowding) continue;
      PatternConfig still = cfg;
      still.jitter_multiplier = 0.0;
      const Box ref = white_box(render_pattern(still, {1, Condition::easy}, 0));
      const int bound = static_cast<int>(std::floor(cfg.jitter_px() + 1e-9));
      int widest = 0;
      for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const Box b = white_box(render_pattern(cfg, {1, Condition::easy}, seed));
        EXPECT_EQ(b.x1 - b.x0, ref.x1 - ref.x0);
        EXPECT_LE(std::abs(b.x0 - ref.x0), bound) << cfg.id();
        EXPECT_LE(std::abs(b.y0 - ref.y0), bound) << cfg.id();
        widest = std::max({widest, std::abs(b.x0 - ref.x0), std::abs(b.y0 - ref.y0)});
      }
      if (bound >= 2) EXPECT_GT(widest, 0) << cfg.id();
    }
  }
}

TEST(Patterns, SegmentationLineShiftsWithinBound) {
  // A diagonal-free grid row: each line's pixel run moves by at most the bound.
  for (const auto& cfg : enumerate_configs(Paradigm::segmentation)) {
    if (cfg.location_index != 0) continue;
    PatternConfig still = cfg;
    still.jitter_multiplier = 0.0;
    const ImagePlane a = render_pattern(still, {0, Condition::hard}, 1);
    const ImagePlane b = render_pattern(cfg, {0, Condition::hard}, 1);
    const int bound = static_cast<int>(std::floor(cfg.jitter_px() + 1e-9));
    const Box ba = white_box(a), bb = white_box(b);
    EXPECT_LE(std::abs(ba.x0 - bb.x0), bound);
    EXPECT_LE(std::abs(ba.y0 - bb.y0), bound);
    EXPECT_LE(std::abs(ba.x1 - bb.x1), bound);
    EXPECT_LE(std::abs(ba.y1 - bb.y1), bound);
  }
}

TEST(Patterns, InvalidLabelRejected) {
  const auto cfg = enumerate_configs(Paradigm::segmentation)[0];
  EXPECT_THROW(render_pattern(cfg, {2, Condition::easy}, 1), ValidationError);
  PatternConfig huge = cfg;
  huge.element_size = 200;
  EXPECT_THROW(render_pattern(huge, {0, Condition::easy}, 1), ValidationError);
}

TEST(Grating, ZeroContrastIsUniform) {
  const ImagePlane g = render_grating({0.0, 12, 0.3, 1.0}, 32, 32);
  for (double v : g.data()) EXPECT_EQ(v, 127.5);
}

TEST(Grating, FullContrastSpansRange) {
  const ImagePlane g = render_grating({1.0, 8, 0.0, 0.0}, 64, 64);
  const auto [lo, hi] = std::ranges::minmax(g.data());
  EXPECT_GE(lo, 0.0);
  EXPECT_LE(hi, 255.0);
  EXPECT_LE(lo, 1.0);
  EXPECT_GE(hi, 254.0);
}

TEST(Grating, SpectrumPeaksAtFrequency) {
  for (int f : {3, 6, 12, 24}) {
    const ImagePlane g = render_grating({0.5, static_cast<double>(f), 0.0, 0.7}, 96, 64);
    std::vector<fft::cplx> buf(g.data().begin(), g.data().end());
    for (auto& v : buf) v -= 127.5;
    buf = fft::dft2(std::move(buf), 64, 96, fft::Direction::forward);
    std::size_t best = 0;
    for (std::size_t i = 0; i < buf.size(); ++i)
      if (std::abs(buf[i]) > std::abs(buf[best])) best = i;
    const int row = static_cast<int>(best / 96), col = static_cast<int>(best % 96);
    EXPECT_EQ(row, 0);
    EXPECT_TRUE(col == f || col == 96 - f) << col;
  }
}

TEST(Grating, FullPeriodMeanIsMeanLevel) {
  for (double phase : {0.0, 0.4, 2.0}) {
    const ImagePlane g = render_grating({0.8, 5, 0.0, phase, 100.0}, 100, 10);
    double s = 0;
    for (double v : g.data()) s += v;
    EXPECT_NEAR(s / g.size(), 100.0, 0.5);
  }
}

TEST(Grating, ValidatesAndReplicatesChannels) {
  EXPECT_THROW(render_grating({1.2, 3, 0, 0}, 8, 8), ValidationError);
  EXPECT_THROW(render_grating({-0.1, 3, 0, 0}, 8, 8), ValidationError);
  const ImagePlane rgb = render_grating({0.5, 3, 0.5, 0}, 8, 8, 3);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      EXPECT_EQ(rgb.at(0, y, x), rgb.at(1, y, x));
      EXPECT_EQ(rgb.at(0, y, x), rgb.at(2, y, x));
    }
}

TEST(ImageIo, PngAndPnmRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "pcorr_io_test";
  std::filesystem::create_directories(dir);
  for (int channels : {1, 3}) {
    ImagePlane img(7, 5, channels);
    for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<double>((i * 37) % 256);
    for (const char* name : {"a.png", "a.pnm"}) {
      io::write_image(dir / name, img);
      EXPECT_EQ(io::read_image(dir / name), img) << name << " " << channels;
    }
  }
  std::filesystem::remove_all(dir);
}

TEST(ImageOps, ResizeAndPlace) {
  ImagePlane img(4, 4, 1, 10.0);
  const ImagePlane big = resize_bilinear(img, 9, 9);
  for (double v : big.data()) EXPECT_DOUBLE_EQ(v, 10.0);
  int ox = -1, oy = -1;
  const ImagePlane placed = place_centered(img, 10, 8, 0.0, &ox, &oy);
  EXPECT_EQ(ox, 3);
  EXPECT_EQ(oy, 2);
  EXPECT_EQ(placed.at(2, 3), 10.0);
  EXPECT_EQ(placed.at(0, 0), 0.0);
}
