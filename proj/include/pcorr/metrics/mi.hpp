#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/core/numeric.hpp"
#include "pcorr/engine/graph.hpp"

namespace pcorr::metrics {

/// Equal-count ("equal-amount") bins over pooled samples. Values are ordered
/// by (value, occurrence index within the sample's category, category), and
/// the sample at rank q lands in bin floor(q * k / n), so bin counts differ
/// by at most one. The tie key interleaves categories, which keeps a run of
/// equal values from being split along category lines.
inline std::vector<int> quantile_bins(std::span<const double> values, std::span<const int> labels, int k) {
  if (k < 2) throw ValidationError("MI needs at least 2 bins");
  if (values.size() != labels.size()) throw ValidationError("values and labels differ in length");
  const std::size_t n = values.size();
  std::vector<std::size_t> occurrence(n);
  {
    std::vector<std::size_t> seen;
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(labels[i]);
      if (c >= seen.size()) seen.resize(c + 1, 0);
      occurrence[i] = seen[c]++;
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::sort(order, [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    if (occurrence[a] != occurrence[b]) return occurrence[a] < occurrence[b];
    return labels[a] < labels[b];
  });
  std::vector<int> bins(n);
  for (std::size_t q = 0; q < n; ++q) bins[order[q]] = static_cast<int>(q * static_cast<std::size_t>(k) / n);
  return bins;
}

/// Plug-in MI in bits from joint counts counts[b * C + c]:
/// H(C) - sum_b p(b) H(C | b), with 0 log 0 = 0.
inline double mi_from_counts(std::span<const double> counts, int bins, int categories) {
  if (counts.size() != static_cast<std::size_t>(bins) * categories)
    throw ValidationError("count table has the wrong size");
  double total = 0.0;
  for (double v : counts) total += v;
  if (!(total > 0.0)) return 0.0;
  auto entropy = [](std::span<const double> row, double sum) {
    double h = 0.0;
    for (double v : row)
      if (v > 0.0) h -= (v / sum) * std::log2(v / sum);
    return h;
  };
  std::vector<double> pc(static_cast<std::size_t>(categories), 0.0);
  for (int b = 0; b < bins; ++b)
    for (int c = 0; c < categories; ++c) pc[static_cast<std::size_t>(c)] += counts[static_cast<std::size_t>(b) * categories + c];
  double mi = entropy(pc, total);
  for (int b = 0; b < bins; ++b) {
    const auto row = counts.subspan(static_cast<std::size_t>(b) * categories, static_cast<std::size_t>(categories));
    double nb = 0.0;
    for (double v : row) nb += v;
    if (nb > 0.0) mi -= (nb / total) * entropy(row, nb);
  }
  return std::max(0.0, mi);
}

/// MI of one neuron. Constant neurons carry no information and return 0.
inline double neuron_mi(std::span<const double> values, std::span<const int> labels, int categories, int k) {
  const auto [lo, hi] = std::ranges::minmax(values);
  if (lo == hi) return 0.0;
  const auto bins = quantile_bins(values, labels, k);
  std::vector<double> counts(static_cast<std::size_t>(k) * categories, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i)
    counts[static_cast<std::size_t>(bins[i]) * categories + labels[i]] += 1.0;
  return mi_from_counts(counts, k, categories);
}

/// Activation samples of one experiment: values[t] is a row-major
/// [sample][neuron] matrix for tap t; labels[s] is the category of sample s.
struct MISample {
  std::vector<engine::LayerTap> taps;
  std::vector<std::size_t> neurons;  ///< per tap
  std::vector<std::vector<double>> values;
  std::vector<int> labels;
  int categories = 2;
  int bins = 8;

  std::size_t samples() const { return labels.size(); }

  /// Throws unless categories >= 2, bins >= 2, labels in range with equal
  /// counts, and every tap matrix is samples x neurons.
  void validate() const {
    if (categories < 2) throw ValidationError("MI needs at least 2 categories");
    if (bins < 2) throw ValidationError("MI needs at least 2 bins");
    std::vector<std::size_t> per(static_cast<std::size_t>(categories), 0);
    for (int c : labels) {
      if (c < 0 || c >= categories) throw ValidationError("MI label out of range");
      ++per[static_cast<std::size_t>(c)];
    }
    if (per[0] == 0) throw ValidationError("MI needs samples in every category");
    for (std::size_t n : per)
      if (n != per[0]) throw ValidationError("MI needs equal sample counts per category");
    if (values.size() != taps.size() || neurons.size() != taps.size())
      throw ValidationError("MI sample tap tables are inconsistent");
    for (std::size_t t = 0; t < taps.size(); ++t)
      if (values[t].size() != neurons[t] * samples()) throw ValidationError("MI sample matrix has the wrong size");
  }
};

struct MIResult {
  std::vector<engine::LayerTap> taps;
  std::vector<std::vector<double>> per_neuron;  ///< bits
  std::vector<double> per_tap;                  ///< mean over neurons
  double aggregate = 0.0;                       ///< mean over taps
  double category_entropy = 0.0;                ///< H(C), bits
};

inline MIResult mi_per_neuron(const MISample& s) {
  s.validate();
  MIResult out;
  out.taps = s.taps;
  out.category_entropy = std::log2(static_cast<double>(s.categories));
  const std::size_t n = s.samples();
  std::vector<double> column(n);
  for (std::size_t t = 0; t < s.taps.size(); ++t) {
    const std::size_t m = s.neurons[t];
    std::vector<double> mi(m);
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) column[i] = s.values[t][i * m + j];
      mi[j] = neuron_mi(column, s.labels, s.categories, s.bins);
    }
    out.per_tap.push_back(mean_of(mi));
    out.per_neuron.push_back(std::move(mi));
  }
  out.aggregate = mean_of(out.per_tap);
  return out;
}

}  // namespace pcorr::metrics
