#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/core/numeric.hpp"

namespace pcorr::stats {

/// A correlation-type value plus a flag for inputs where it is undefined
/// (a constant vector). Degenerate values are reported as 0.
struct Correlation {
  double value = 0.0;
  bool degenerate = false;
};

namespace detail {

inline void require_pair(std::span<const double> x, std::span<const double> y, std::size_t min_n) {
  if (x.size() != y.size()) throw ValidationError("paired vectors differ in length");
  if (x.size() < min_n)
    throw ValidationError("need at least " + std::to_string(min_n) + " paired values");
  if (!all_finite(x) || !all_finite(y)) throw ValidationError("paired vectors must be finite");
}

/// Centred second moments; two-pass for accuracy.
struct Moments {
  double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
};

inline Moments moments(std::span<const double> x, std::span<const double> y) {
  Moments m;
  m.mx = mean_of(x);
  m.my = mean_of(y);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - m.mx, dy = y[i] - m.my;
    xx[i] = dx * dx, yy[i] = dy * dy, xy[i] = dx * dy;
  }
  m.sxx = pairwise_sum(xx);
  m.syy = pairwise_sum(yy);
  m.sxy = pairwise_sum(xy);
  return m;
}

}  // namespace detail

inline Correlation pearson(std::span<const double> x, std::span<const double> y) {
  detail::require_pair(x, y, 2);
  const auto m = detail::moments(x, y);
  if (!(m.sxx > 0.0) || !(m.syy > 0.0)) return {0.0, true};
  return {std::clamp(m.sxy / std::sqrt(m.sxx * m.syy), -1.0, 1.0), false};
}

/// 1-based ranks; tied values share the mean of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank-order correlation: Pearson correlation of average ranks.
inline Correlation srocc(std::span<const double> x, std::span<const double> y) {
  detail::require_pair(x, y, 3);
  const auto rx = average_ranks(x), ry = average_ranks(y);
  return pearson(rx, ry);
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares of y on x. A constant x yields slope 0 and the mean of y.
inline LinearFit ols(std::span<const double> x, std::span<const double> y) {
  detail::require_pair(x, y, 2);
  const auto m = detail::moments(x, y);
  if (!(m.sxx > 0.0)) return {0.0, m.my};
  const double slope = m.sxy / m.sxx;
  return {slope, m.my - slope * m.mx};
}

struct PredictionEval {
  double r2 = 0.0;     ///< squared Pearson correlation of predictor and target
  double srocc = 0.0;
  double rmse = 0.0;   ///< residual RMS of the OLS line, in target units (divisor n)
  std::size_t n = 0;
  bool logistic = false;         ///< predictor passed through a fitted logistic first
  bool degenerate = false;       ///< constant predictor or target
  LinearFit fit;
};

/// Fits target = a * predictor + b by OLS and reports R^2, SROCC and RMSE.
inline PredictionEval linfit_eval(std::span<const double> predictor, std::span<const double> target) {
  detail::require_pair(predictor, target, 3);
  PredictionEval e;
  e.n = predictor.size();
  e.fit = ols(predictor, target);
  const auto r = pearson(predictor, target);
  e.r2 = r.value * r.value;
  const auto s = srocc(predictor, target);
  e.srocc = s.value;
  e.degenerate = r.degenerate || s.degenerate;
  std::vector<double> sq(e.n);
  for (std::size_t i = 0; i < e.n; ++i) {
    const double res = target[i] - (e.fit.slope * predictor[i] + e.fit.intercept);
    sq[i] = res * res;
  }
  e.rmse = std::sqrt(pairwise_sum(sq) / static_cast<double>(e.n));
  return e;
}

}  // namespace pcorr::stats
