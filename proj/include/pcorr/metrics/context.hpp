#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/core/parallel.hpp"
#include "pcorr/core/rng.hpp"
#include "pcorr/engine/session.hpp"
#include "pcorr/metrics/mi.hpp"
#include "pcorr/stimuli/patterns.hpp"

namespace pcorr::metrics {

enum class Verdict { consistent, inconsistent, tie };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::consistent: return "consistent";
    case Verdict::inconsistent: return "inconsistent";
    case Verdict::tie: return "tie";
  }
  return "?";
}

/// |MI(easy) - MI(hard)| at or below this is a tie.
inline constexpr double kTieTolerance = 1e-12;

struct ContextOptions {
  int samples_per_category = 0;  ///< 0: 500 total split evenly over the categories
  int bins = 8;
  unsigned workers = 1;
  /// Bytes allowed for one condition's activation matrix; larger requests are
  /// rejected up front instead of exhausting memory.
  std::size_t max_sample_bytes = std::size_t{2} << 30;

  int resolved_samples(int categories) const {
    return samples_per_category > 0 ? samples_per_category : 500 / categories;
  }
};

struct ContextResult {
  MIResult easy;
  MIResult hard;
  double difference = 0.0;  ///< aggregate MI(easy) - MI(hard), bits
  Verdict verdict = Verdict::tie;
  int samples_per_category = 0;
};

inline Verdict verdict_for(double easy, double hard) {
  const double d = easy - hard;
  if (std::abs(d) <= kTieTolerance) return Verdict::tie;
  return d > 0 ? Verdict::consistent : Verdict::inconsistent;
}

/// Produces the stimulus for (label, sample seed). Easy and hard renders of
/// the same (category, sample) receive the same seed.
using StimulusFn = std::function<ImagePlane(const stimuli::CategoryLabel&, std::uint64_t)>;

/// Collects activations for every (category, sample) of one condition.
/// Sample s of category c uses the seed derive_seed(seed, c, s).
inline MISample collect_condition(const engine::InferenceSession& session, const std::vector<engine::LayerTap>& taps,
                                  const StimulusFn& render, int categories, stimuli::Condition condition,
                                  std::uint64_t seed, const ContextOptions& opt) {
  const int per = opt.resolved_samples(categories);
  if (per < 1) throw ValidationError("context experiment needs at least one sample per category");
  const std::size_t n = static_cast<std::size_t>(per) * categories;

  MISample s;
  s.categories = categories;
  s.bins = opt.bins;
  s.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.labels[i] = static_cast<int>(i / static_cast<std::size_t>(per));

  auto render_pass = [&](std::size_t i) {
    const int c = s.labels[i];
    const auto k = static_cast<std::uint64_t>(i % static_cast<std::size_t>(per));
    return session.forward(render({c, condition}, derive_seed(seed, c, k)), taps);
  };
  auto store = [&](std::size_t i, const engine::ActivationSnapshot& snap) {
    for (std::size_t t = 0; t < taps.size(); ++t) {
      const auto& v = snap.values[t];
      if (v.size() != s.neurons[t]) throw Error("tap width changed between forward passes");
      std::copy(v.begin(), v.end(), s.values[t].begin() + static_cast<std::ptrdiff_t>(i * s.neurons[t]));
    }
  };
  // The first pass fixes the tap widths, so the memory guard runs before the rest.
  const auto first = render_pass(0);
  s.taps = first.taps;
  std::size_t width = 0;
  for (const auto& v : first.values) {
    s.neurons.push_back(v.size());
    width += v.size();
  }
  if (width * n * sizeof(double) > opt.max_sample_bytes)
    throw ValidationError("context activations need " + std::to_string(width * n * sizeof(double) >> 20) +
                          " MiB; reduce the input size, taps or samples");
  s.values.resize(taps.size());
  for (std::size_t t = 0; t < taps.size(); ++t) s.values[t].resize(n * s.neurons[t]);
  store(0, first);
  parallel_for(n - 1, opt.workers, [&](std::size_t i) { store(i + 1, render_pass(i + 1)); });
  return s;
}

/// MI of easy and hard stimulus sets and the easy-over-hard verdict.
inline ContextResult context_experiment(const engine::InferenceSession& session,
                                        const std::vector<engine::LayerTap>& taps, const StimulusFn& render,
                                        int categories, std::uint64_t seed, const ContextOptions& opt = {}) {
  if (taps.empty()) throw ValidationError("context experiment needs at least one tap");
  ContextResult out;
  out.samples_per_category = opt.resolved_samples(categories);
  out.easy = mi_per_neuron(collect_condition(session, taps, render, categories, stimuli::Condition::easy, seed, opt));
  out.hard = mi_per_neuron(collect_condition(session, taps, render, categories, stimuli::Condition::hard, seed, opt));
  out.difference = out.easy.aggregate - out.hard.aggregate;
  out.verdict = verdict_for(out.easy.aggregate, out.hard.aggregate);
  return out;
}

/// Pattern-stimulus form: stimuli rendered from `config` at the network's
/// input size, with seeds keyed by the config id.
inline ContextResult context_experiment(const engine::InferenceSession& session,
                                        const std::vector<engine::LayerTap>& taps,
                                        const stimuli::PatternConfig& config, std::uint64_t seed,
                                        const ContextOptions& opt = {}, const stimuli::RenderOptions& render = {}) {
  const auto& in = session.graph().input;
  stimuli::RenderOptions ro = render;
  ro.width = in.w;
  ro.height = in.h;
  const StimulusFn fn = [&](const stimuli::CategoryLabel& label, std::uint64_t s) {
    return convert_channels(stimuli::render_pattern(config, label, s, ro), in.c);
  };
  return context_experiment(session, taps, fn, stimuli::category_count(config.paradigm),
                            derive_seed(seed, config.id()), opt);
}

}  // namespace pcorr::metrics
