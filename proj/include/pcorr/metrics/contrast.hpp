#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/core/numeric.hpp"
#include "pcorr/core/rng.hpp"
#include "pcorr/engine/session.hpp"
#include "pcorr/metrics/saliency.hpp"
#include "pcorr/stats/eval.hpp"
#include "pcorr/stimuli/grating.hpp"

namespace pcorr::metrics {

struct ContrastOptions {
  std::vector<double> contrasts = {0.01, 0.018, 0.032, 0.056, 0.1, 0.18, 0.32, 0.56, 1.0};
  std::vector<double> frequencies = {3, 6, 12, 24, 48, 75, 96};  ///< cycles per image width
  int repetitions = 250;
  MetricOrder order = MetricOrder::mean_of_abs;
  double mean_level = 127.5;
  unsigned workers = 1;
};

/// L1 response per tap on a (contrast x frequency) grid.
struct ContrastResponseTable {
  std::vector<engine::LayerTap> taps;
  std::vector<double> contrasts;
  std::vector<double> frequencies;
  int repetitions = 0;
  MetricOrder order = MetricOrder::mean_of_abs;
  std::vector<std::vector<double>> values;  ///< [tap][contrast * frequencies + frequency]

  double at(std::size_t tap, std::size_t ci, std::size_t fi) const {
    return values[tap][ci * frequencies.size() + fi];
  }
  std::size_t tap_index(std::string_view node) const {
    for (std::size_t t = 0; t < taps.size(); ++t)
      if (taps[t].node == node || taps[t].stage == node) return t;
    throw ValidationError("contrast table has no tap '" + std::string(node) + "'");
  }
};

/// Orientation and phase of repetition r at frequency index fi. Shared by
/// every contrast, so linear taps scale exactly with contrast.
inline std::pair<double, double> grating_draw(std::uint64_t seed, std::size_t fi, int r) {
  Rng rng(derive_seed(seed, "grating", fi, r));
  const double orientation = rng.uniform(0.0, std::numbers::pi);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return {orientation, phase};
}

/// Mean over repetitions (random orientation and phase) of the per-tap mean
/// absolute activation change between a grating and the uniform gray image.
inline ContrastResponseTable contrast_response(const engine::InferenceSession& session,
                                               const std::vector<engine::LayerTap>& taps,
                                               const ContrastOptions& opt, std::uint64_t seed) {
  if (taps.empty()) throw ValidationError("contrast response needs at least one tap");
  if (opt.repetitions < 1) throw ValidationError("contrast response needs at least one repetition");
  if (opt.contrasts.empty() || opt.frequencies.empty())
    throw ValidationError("contrast response needs contrasts and frequencies");
  const auto& in = session.graph().input;
  for (double f : opt.frequencies)
    if (!(f >= 0.0) || f >= in.w / 2.0)
      throw ValidationError("grating frequency " + std::to_string(f) + " is not below the Nyquist limit of " +
                            std::to_string(in.w / 2) + " cycles");

  ContrastResponseTable out;
  out.contrasts = opt.contrasts;
  out.frequencies = opt.frequencies;
  out.repetitions = opt.repetitions;
  out.order = opt.order;
  const auto gray = session.forward(stimuli::render_grating({0.0, 0.0, 0.0, 0.0, opt.mean_level}, in.w, in.h, in.c), taps);
  out.taps = gray.taps;
  const std::size_t nf = opt.frequencies.size();
  out.values.assign(taps.size(), std::vector<double>(opt.contrasts.size() * nf, 0.0));

  for (std::size_t ci = 0; ci < opt.contrasts.size(); ++ci) {
    if (opt.contrasts[ci] == 0.0) continue;  // the gray image itself: exactly zero
    for (std::size_t fi = 0; fi < nf; ++fi) {
      std::vector<std::vector<double>> per_rep(taps.size());
      std::vector<std::vector<double>> sums(taps.size());
      if (opt.order == MetricOrder::abs_of_mean)
        for (std::size_t t = 0; t < taps.size(); ++t) sums[t].assign(gray.values[t].size(), 0.0);
      auto make = [&](int r) {
        const auto [orientation, phase] = grating_draw(seed, fi, r);
        return stimuli::render_grating({opt.contrasts[ci], opt.frequencies[fi], orientation, phase, opt.mean_level},
                                       in.w, in.h, in.c);
      };
      auto fold = [&](int, const engine::ActivationSnapshot& snap) {
        for (std::size_t t = 0; t < taps.size(); ++t) {
          const auto& a = snap.values[t];
          const auto& b = gray.values[t];
          if (opt.order == MetricOrder::mean_of_abs) {
            std::vector<double> d(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) d[i] = std::abs(a[i] - b[i]);
            per_rep[t].push_back(mean_of(d));
          } else {
            for (std::size_t i = 0; i < a.size(); ++i) sums[t][i] += a[i] - b[i];
          }
        }
      };
      detail::ordered_passes(session, taps, opt.repetitions, opt.workers, make, fold);
      for (std::size_t t = 0; t < taps.size(); ++t) {
        double v;
        if (opt.order == MetricOrder::mean_of_abs) {
          v = mean_of(per_rep[t]);
        } else {
          std::vector<double> d(sums[t].size());
          for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::abs(sums[t][i] / opt.repetitions);
          v = mean_of(d);
        }
        out.values[t][ci * nf + fi] = v;
      }
    }
  }
  return out;
}

/// Contrast per frequency at which a tap reaches a target response.
struct IsoCurve {
  std::vector<double> frequencies;
  std::vector<double> contrasts;  ///< NaN where unreachable
  std::vector<bool> reachable;
};

/// Piecewise-linear interpolation of L1 against log10(contrast), per
/// frequency; returns the lowest-contrast crossing of `target`. Contrasts
/// <= 0 are skipped since they have no logarithm.
inline IsoCurve iso_output_invert(const ContrastResponseTable& table, std::size_t tap, double target) {
  if (!std::isfinite(target)) throw ValidationError("iso-output target must be finite");
  if (tap >= table.taps.size()) throw ValidationError("iso-output tap index out of range");
  std::vector<std::size_t> idx;
  for (std::size_t ci = 0; ci < table.contrasts.size(); ++ci)
    if (table.contrasts[ci] > 0.0) idx.push_back(ci);
  std::ranges::sort(idx, [&](std::size_t a, std::size_t b) { return table.contrasts[a] < table.contrasts[b]; });
  if (idx.size() < 2) throw ValidationError("iso-output inversion needs at least 2 positive contrasts");

  IsoCurve out;
  out.frequencies = table.frequencies;
  for (std::size_t fi = 0; fi < table.frequencies.size(); ++fi) {
    double found = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
      const double y0 = table.at(tap, idx[k], fi), y1 = table.at(tap, idx[k + 1], fi);
      const double x0 = std::log10(table.contrasts[idx[k]]), x1 = std::log10(table.contrasts[idx[k + 1]]);
      if (y0 == target) {
        found = table.contrasts[idx[k]];
        break;
      }
      if ((y0 - target) * (y1 - target) < 0.0) {
        found = std::pow(10.0, x0 + (target - y0) / (y1 - y0) * (x1 - x0));
        break;
      }
      if (k + 2 == idx.size() && y1 == target) found = table.contrasts[idx[k + 1]];
    }
    out.contrasts.push_back(found);
    out.reachable.push_back(!std::isnan(found));
  }
  return out;
}

struct LogLinearity {
  std::vector<double> r2;         ///< per frequency
  std::vector<bool> degenerate;   ///< constant column: r2 reported as 0
  double mean_r2 = 0.0;           ///< average over frequencies
};

/// R^2 of the OLS line of L1 against log10(contrast), per frequency.
inline LogLinearity log_linearity_r2(const ContrastResponseTable& table, std::size_t tap) {
  if (tap >= table.taps.size()) throw ValidationError("log-linearity tap index out of range");
  std::vector<std::size_t> idx;
  for (std::size_t ci = 0; ci < table.contrasts.size(); ++ci)
    if (table.contrasts[ci] > 0.0) idx.push_back(ci);
  if (idx.size() < 3) throw ValidationError("log-linearity needs at least 3 positive contrasts");
  LogLinearity out;
  for (std::size_t fi = 0; fi < table.frequencies.size(); ++fi) {
    std::vector<double> x, y;
    for (std::size_t ci : idx) {
      x.push_back(std::log10(table.contrasts[ci]));
      y.push_back(table.at(tap, ci, fi));
    }
    const auto r = stats::pearson(x, y);
    out.r2.push_back(r.degenerate ? 0.0 : r.value * r.value);
    out.degenerate.push_back(r.degenerate);
  }
  out.mean_r2 = mean_of(out.r2);
  return out;
}

/// Frequency -> contrast curve, frequencies increasing.
struct FrequencyCurve {
  std::vector<double> frequencies;
  std::vector<double> contrasts;
};

struct FrequencyAlignment {
  double scale = 1.0;  ///< model frequency = scale * human frequency
  double r2 = 0.0;     ///< squared Pearson of log10 contrasts over the resampled pairs
  std::size_t pairs = 0;
  bool degenerate = false;
};

namespace detail {

/// Index of the sampled minimum, which must not sit at either end.
inline std::size_t interior_minimum(const FrequencyCurve& c, const char* which) {
  if (c.frequencies.size() != c.contrasts.size() || c.frequencies.size() < 3)
    throw ValidationError(std::string(which) + " curve needs at least 3 points");
  for (std::size_t i = 1; i < c.frequencies.size(); ++i)
    if (!(c.frequencies[i] > c.frequencies[i - 1])) throw ValidationError(std::string(which) + " frequencies must increase");
  std::size_t best = c.contrasts.size();
  for (std::size_t i = 0; i < c.contrasts.size(); ++i)
    if (c.contrasts[i] > 0.0 && (best == c.contrasts.size() || c.contrasts[i] < c.contrasts[best])) best = i;
  if (best == 0 || best + 1 >= c.contrasts.size())
    throw ValidationError(std::string(which) + " curve has no interior minimum");
  return best;
}

}  // namespace detail

/// Scales the human frequency axis so both curves' sampled minima coincide,
/// then linearly interpolates the model's log10 contrast (in log10 frequency)
/// at each mapped human frequency inside the model's range and reports R^2
/// against the human log10 contrasts. Non-positive or NaN contrasts are skipped.
inline FrequencyAlignment align_frequency_scale(const FrequencyCurve& model, const FrequencyCurve& human) {
  const std::size_t m = detail::interior_minimum(model, "model");
  const std::size_t h = detail::interior_minimum(human, "human");
  FrequencyAlignment out;
  out.scale = model.frequencies[m] / human.frequencies[h];
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < human.frequencies.size(); ++i) {
    if (!(human.contrasts[i] > 0.0)) continue;
    const double f = out.scale * human.frequencies[i];
    if (f < model.frequencies.front() || f > model.frequencies.back()) continue;
    std::size_t k = 0;
    while (k + 2 < model.frequencies.size() && model.frequencies[k + 1] < f) ++k;
    const double c0 = model.contrasts[k], c1 = model.contrasts[k + 1];
    if (!(c0 > 0.0) || !(c1 > 0.0)) continue;
    const double lf0 = std::log10(model.frequencies[k]), lf1 = std::log10(model.frequencies[k + 1]);
    const double t = (std::log10(f) - lf0) / (lf1 - lf0);
    xs.push_back(std::log10(c0) + t * (std::log10(c1) - std::log10(c0)));
    ys.push_back(std::log10(human.contrasts[i]));
  }
  out.pairs = xs.size();
  if (xs.size() < 2) {
    out.degenerate = true;
    return out;
  }
  const auto r = stats::pearson(xs, ys);
  out.degenerate = r.degenerate;
  out.r2 = r.degenerate ? 0.0 : r.value * r.value;
  return out;
}

}  // namespace pcorr::metrics
