#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/core/numeric.hpp"
#include "pcorr/stats/eval.hpp"

namespace pcorr::stats {

/// f(x) = lower + (upper - lower) / (1 + exp(-(x - center) / scale)).
/// A negative scale gives a decreasing curve.
struct Logistic4 {
  double upper = 1.0;
  double lower = 0.0;
  double center = 0.0;
  double scale = 1.0;

  double operator()(double x) const { return lower + (upper - lower) / (1.0 + std::exp(-(x - center) / scale)); }
};

struct LogisticFit {
  Logistic4 params;
  double sse = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

/// Solves the 4x4 system a x = b by Gaussian elimination with partial pivoting.
inline bool solve4(std::array<std::array<double, 4>, 4> a, std::array<double, 4>& b) {
  for (int c = 0; c < 4; ++c) {
    int p = c;
    for (int r = c + 1; r < 4; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    if (!(std::abs(a[p][c]) > 0.0)) return false;
    std::swap(a[p], a[c]);
    std::swap(b[p], b[c]);
    for (int r = c + 1; r < 4; ++r) {
      const double f = a[r][c] / a[c][c];
      for (int k = c; k < 4; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  for (int c = 3; c >= 0; --c) {
    for (int k = c + 1; k < 4; ++k) b[c] -= a[c][k] * b[k];
    b[c] /= a[c][c];
  }
  return true;
}

inline double sse(const Logistic4& f, std::span<const double> x, std::span<const double> y) {
  std::vector<double> sq(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f(x[i]);
    sq[i] = r * r;
  }
  return pairwise_sum(sq);
}

}  // namespace detail

/// Least-squares fit of y ~ f(x) by Levenberg-Marquardt with analytic
/// derivatives. The start point spans the observed y range with the centre
/// at the median x and the slope sign of the OLS line.
inline LogisticFit fit_logistic(std::span<const double> x, std::span<const double> y, int max_iterations = 500) {
  detail::require_pair(x, y, 4);
  LogisticFit out;
  const auto [ylo, yhi] = std::ranges::minmax(y);
  std::vector<double> xs(x.begin(), x.end());
  std::ranges::sort(xs);
  const double xspread = xs.back() - xs.front();
  const double slope = ols(x, y).slope;
  Logistic4 p{yhi, ylo, xs[xs.size() / 2], (xspread > 0 ? xspread / 8.0 : 1.0) * (slope < 0 ? -1.0 : 1.0)};
  if (yhi == ylo) p.upper = ylo + 1.0;
  double cost = detail::sse(p, x, y);
  double lambda = 1e-3;
  for (int it = 0; it < max_iterations; ++it) {
    out.iterations = it + 1;
    std::array<std::array<double, 4>, 4> jtj{};
    std::array<double, 4> jtr{};
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = std::exp(-(x[i] - p.center) / p.scale);
      const double s = 1.0 / (1.0 + e);
      const double ds = s * s * e;  // d s / d((x - c) / scale)
      const double span = p.upper - p.lower;
      const std::array<double, 4> j = {s, 1.0 - s, -span * ds / p.scale,
                                       -span * ds * (x[i] - p.center) / (p.scale * p.scale)};
      const double r = y[i] - (p.lower + span * s);
      for (int a = 0; a < 4; ++a) {
        jtr[a] += j[a] * r;
        for (int b = 0; b < 4; ++b) jtj[a][b] += j[a] * j[b];
      }
    }
    bool improved = false;
    while (lambda < 1e12) {
      auto a = jtj;
      auto step = jtr;
      for (int d = 0; d < 4; ++d) a[d][d] += lambda * std::max(jtj[d][d], 1e-300);
      if (!detail::solve4(a, step)) {
        lambda *= 10.0;
        continue;
      }
      const Logistic4 q{p.upper + step[0], p.lower + step[1], p.center + step[2], p.scale + step[3]};
      const double c = q.scale != 0.0 ? detail::sse(q, x, y) : INFINITY;
      if (std::isfinite(c) && c < cost) {
        const double rel = (cost - c) / std::max(cost, 1e-300);
        p = q;
        cost = c;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = true;
        out.converged = rel < 1e-14;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) {
      // No downhill step at any damping: a stationary point.
      out.converged = std::isfinite(cost);
      break;
    }
    if (out.converged) break;
  }
  out.params = p;
  out.sse = cost;
  if (!std::isfinite(cost)) out.converged = false;
  return out;
}

enum class LogisticMode { identity, fixed, fit };

struct LinearizeResult {
  std::vector<double> values;
  Logistic4 params;
  bool applied = false;    ///< false: identity (requested, or fallback after a failed fit)
  bool fit_failed = false;
};

/// Applies the logistic to `values`. In fit mode the parameters are fitted
/// so that f(values) approximates `target`; a failed fit falls back to the
/// identity and says so.
inline LinearizeResult logistic_linearize(std::span<const double> values, LogisticMode mode,
                                          const Logistic4& params = {},
                                          std::span<const double> target = {}) {
  if (!all_finite(values)) throw ValidationError("logistic input must be finite");
  LinearizeResult out;
  out.values.assign(values.begin(), values.end());
  if (mode == LogisticMode::identity) return out;
  out.params = params;
  if (mode == LogisticMode::fit) {
    const auto f = fit_logistic(values, target);
    if (!f.converged) {
      out.fit_failed = true;
      return out;
    }
    out.params = f.params;
  }
  for (double& v : out.values) v = out.params(v);
  out.applied = true;
  return out;
}

}  // namespace pcorr::stats
