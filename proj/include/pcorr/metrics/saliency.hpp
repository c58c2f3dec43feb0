#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/core/numeric.hpp"
#include "pcorr/core/parallel.hpp"
#include "pcorr/core/rng.hpp"
#include "pcorr/engine/session.hpp"
#include "pcorr/image.hpp"
#include "pcorr/stimuli/noise.hpp"

namespace pcorr::metrics {

/// Where the repetition average sits relative to the absolute difference.
///   mean_of_abs: mean_r |a(x_r) - a(x)|   (default)
///   abs_of_mean: |mean_r a(x_r) - a(x)|
enum class MetricOrder { mean_of_abs, abs_of_mean };

inline std::string_view to_string(MetricOrder o) {
  return o == MetricOrder::mean_of_abs ? "mean-of-abs" : "abs-of-mean";
}

inline MetricOrder parse_metric_order(std::string_view s) {
  if (s == "mean-of-abs" || s == "mean_of_abs") return MetricOrder::mean_of_abs;
  if (s == "abs-of-mean" || s == "abs_of_mean") return MetricOrder::abs_of_mean;
  throw ValidationError("unknown metric order '" + std::string(s) + "'");
}

inline std::vector<double> default_noise_levels() {
  std::vector<double> out;
  for (int db = -40; db <= 25; db += 5) out.push_back(db);
  return out;
}

struct SaliencyOptions {
  std::vector<double> levels_db = default_noise_levels();
  int repetitions = 10;
  MetricOrder order = MetricOrder::mean_of_abs;
  stimuli::NoiseLaw law = stimuli::NoiseLaw::random_phase;
  std::optional<Rect> region;  ///< default: centred square of half the image side
  unsigned workers = 1;
};

struct SaliencyResult {
  std::vector<engine::LayerTap> taps;
  std::vector<double> levels_db;
  std::vector<std::vector<double>> per_level;  ///< [level][tap]: mean over neurons
  std::vector<double> per_tap;                 ///< mean over levels
  double aggregate = 0.0;                      ///< mean over taps
  int repetitions = 0;
  MetricOrder order = MetricOrder::mean_of_abs;
};

namespace detail {

/// Runs `reps` forward passes of perturbed(r) and folds each into `fold(r, snapshot)`
/// in increasing r, whatever the worker count. Snapshots are produced in
/// batches so at most `batch` are alive at once.
template <typename Make, typename Fold>
void ordered_passes(const engine::InferenceSession& session, std::span<const engine::LayerTap> taps, int reps,
                    unsigned workers, Make&& make, Fold&& fold) {
  const int batch = static_cast<int>(std::max(1u, workers)) * 2;
  std::vector<engine::ActivationSnapshot> slots(static_cast<std::size_t>(batch));
  for (int start = 0; start < reps; start += batch) {
    const int count = std::min(batch, reps - start);
    parallel_for(static_cast<std::size_t>(count), workers, [&](std::size_t i) {
      slots[i] = session.forward(make(start + static_cast<int>(i)), taps);
    });
    for (int i = 0; i < count; ++i) fold(start + i, slots[static_cast<std::size_t>(i)]);
  }
}

}  // namespace detail

/// Perturbation saliency of one image. Repetition r at level index l uses the
/// noise seed derive_seed(seed, "saliency", l, r), so results depend only on
/// (image, options, seed).
inline SaliencyResult saliency_l1(const engine::InferenceSession& session, const ImagePlane& image,
                                  const std::vector<engine::LayerTap>& taps, const SaliencyOptions& opt,
                                  std::uint64_t seed) {
  if (taps.empty()) throw ValidationError("saliency needs at least one tap");
  if (opt.repetitions < 1) throw ValidationError("saliency needs at least one repetition");
  if (opt.levels_db.empty()) throw ValidationError("saliency needs at least one noise level");
  const Rect region = opt.region.value_or(centered_square(image.width(), image.height()));

  SaliencyResult out;
  out.taps = taps;
  out.levels_db = opt.levels_db;
  out.repetitions = opt.repetitions;
  out.order = opt.order;
  const engine::ActivationSnapshot clean = session.forward(image, taps);
  out.taps = clean.taps;

  for (std::size_t li = 0; li < opt.levels_db.size(); ++li) {
    const double level = opt.levels_db[li];
    std::vector<double> level_values(taps.size(), 0.0);
    if (level != stimuli::kNoiseDisabled) {
      // mean_of_abs: per-tap mean |diff| per repetition; abs_of_mean: per-neuron diff sums.
      std::vector<std::vector<double>> per_rep(taps.size());
      std::vector<std::vector<double>> sums(taps.size());
      if (opt.order == MetricOrder::abs_of_mean)
        for (std::size_t t = 0; t < taps.size(); ++t) sums[t].assign(clean.values[t].size(), 0.0);
      auto make = [&](int r) {
        return stimuli::perturb_image(image, {region, level, derive_seed(seed, "saliency", li, r), opt.law});
      };
      auto fold = [&](int, const engine::ActivationSnapshot& snap) {
        for (std::size_t t = 0; t < taps.size(); ++t) {
          const auto& a = snap.values[t];
          const auto& b = clean.values[t];
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
        if (opt.order == MetricOrder::mean_of_abs) {
          level_values[t] = mean_of(per_rep[t]);
        } else {
          std::vector<double> d(sums[t].size());
          for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::abs(sums[t][i] / opt.repetitions);
          level_values[t] = mean_of(d);
        }
      }
    }
    out.per_level.push_back(std::move(level_values));
  }

  out.per_tap.assign(taps.size(), 0.0);
  for (std::size_t t = 0; t < taps.size(); ++t) {
    std::vector<double> col;
    for (const auto& row : out.per_level) col.push_back(row[t]);
    out.per_tap[t] = mean_of(col);
  }
  out.aggregate = mean_of(out.per_tap);
  return out;
}

}  // namespace pcorr::metrics
