#pragma once

// Independent closed-form checks used by the acceptance runner. None of these
// call into pcorr's metric or stats code.

#include <algorithm>
#include <cmath>
#include <vector>

#include "pcorr/image.hpp"

namespace oracle {

/// Plug-in MI over a bins x categories count table, as a literal double sum.
inline double double_sum_mi(const std::vector<double>& counts, int bins, int cats) {
  double total = 0.0;
  for (double v : counts) total += v;
  std::vector<double> pb(bins, 0.0), pc(cats, 0.0);
  for (int b = 0; b < bins; ++b)
    for (int c = 0; c < cats; ++c) {
      pb[b] += counts[b * cats + c] / total;
      pc[c] += counts[b * cats + c] / total;
    }
  double mi = 0.0;
  for (int b = 0; b < bins; ++b)
    for (int c = 0; c < cats; ++c) {
      const double p = counts[b * cats + c] / total;
      if (p > 0) mi += p * std::log2(p / (pb[b] * pc[c]));
    }
  return mi;
}

/// Shannon entropy of the empirical label distribution, bits.
inline double label_entropy(const std::vector<int>& labels, int cats) {
  std::vector<double> n(cats, 0.0);
  for (int l : labels) n[l] += 1;
  double h = 0.0;
  for (double v : n)
    if (v > 0) h -= v / labels.size() * std::log2(v / labels.size());
  return h;
}

struct LineFit {
  long double slope, intercept, r2, rmse;
};

/// Least squares from the 2x2 normal equations in long double.
inline LineFit normal_equations(const std::vector<double>& x, const std::vector<double>& y) {
  const long double n = x.size();
  long double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i], sy += y[i], sxx += (long double)x[i] * x[i], sxy += (long double)x[i] * y[i];
  }
  const long double det = n * sxx - sx * sx;
  LineFit e;
  e.slope = (n * sxy - sx * sy) / det;
  e.intercept = (sy * sxx - sx * sxy) / det;
  const long double my = sy / n;
  long double res = 0, tot = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double r = y[i] - (e.slope * x[i] + e.intercept);
    res += r * r;
    tot += (y[i] - my) * (y[i] - my);
  }
  e.r2 = 1 - res / tot;
  e.rmse = std::sqrt(res / n);
  return e;
}

/// Rank of v[i]: 1 + (# strictly smaller) + (# equal others) / 2.
inline std::vector<double> brute_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) less += 1;
      else if (v[j] == v[i] && j != i) equal += 1;
    }
    r[i] = 1 + less + equal / 2;
  }
  return r;
}

inline long double plain_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= a.size(), mb /= b.size();
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double population_std(const pcorr::ImagePlane& f, const pcorr::Rect& r) {
  long double s = 0, s2 = 0;
  for (int y = r.y; y < r.y + r.height; ++y)
    for (int x = r.x; x < r.x + r.width; ++x) {
      s += f.at(y, x);
      s2 += (long double)f.at(y, x) * f.at(y, x);
    }
  const long double n = r.area();
  return static_cast<double>(std::sqrt(s2 / n - (s / n) * (s / n)));
}

/// Bounding box of nonzero pixels.
struct Box {
  int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1;
};

inline Box white_box(const pcorr::ImagePlane& img) {
  Box b;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (img.at(y, x) > 0) {
        b.x0 = std::min(b.x0, x), b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x), b.y1 = std::max(b.y1, y);
      }
  return b;
}

}  // namespace oracle
