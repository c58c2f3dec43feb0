#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "pcorr/engine/graph.hpp"

namespace pcorr::engine {

/// Activation tensor in CHW order. Arithmetic is double precision;
/// stored weights are single precision.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}

  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * shape.h + y) * shape.w + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * shape.h + y) * shape.w + x];
  }
};

namespace kernels {

/// Cross-correlation with stride, zero padding and channel groups.
/// Accumulates weight-major: each weight is applied to a whole output row.
inline Tensor conv2d_direct(const Tensor& in, const ConvParams& p, std::span<const float> weight,
                            std::span<const float> bias, Shape out_shape) {
  Tensor out(out_shape);
  const int cin_g = in.shape.c / p.groups;
  const int cout_g = p.out_channels / p.groups;
  const int oh = out_shape.h, ow = out_shape.w;
  for (int o = 0; o < p.out_channels; ++o) {
    const int g = o / cout_g;
    double* dst = out.data.data() + static_cast<std::size_t>(o) * oh * ow;
    if (!bias.empty()) std::fill(dst, dst + static_cast<std::size_t>(oh) * ow, static_cast<double>(bias[o]));
    for (int ci = 0; ci < cin_g; ++ci) {
      const int c = g * cin_g + ci;
      const double* src = in.data.data() + static_cast<std::size_t>(c) * in.shape.h * in.shape.w;
      const float* wk = weight.data() + ((static_cast<std::size_t>(o) * cin_g + ci) * p.kernel_h) * p.kernel_w;
      for (int ky = 0; ky < p.kernel_h; ++ky)
        for (int kx = 0; kx < p.kernel_w; ++kx) {
          const double w = wk[ky * p.kernel_w + kx];
          if (w == 0.0) continue;
          // valid ox: 0 <= ox*s - pad + kx < W
          const int off_x = kx - p.pad_w;
          const int ox_lo = off_x >= 0 ? 0 : (-off_x + p.stride_w - 1) / p.stride_w;
          const int ox_hi = std::min(ow, (in.shape.w - 1 - off_x) / p.stride_w + 1);
          if (in.shape.w - 1 - off_x < 0 || ox_lo >= ox_hi) continue;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * p.stride_h - p.pad_h + ky;
            if (iy < 0 || iy >= in.shape.h) continue;
            const double* row = src + static_cast<std::size_t>(iy) * in.shape.w;
            double* drow = dst + static_cast<std::size_t>(oy) * ow;
            if (p.stride_w == 1) {
              for (int ox = ox_lo; ox < ox_hi; ++ox) drow[ox] += w * row[ox + off_x];
            } else {
              for (int ox = ox_lo; ox < ox_hi; ++ox) drow[ox] += w * row[ox * p.stride_w + off_x];
            }
          }
        }
    }
  }
  return out;
}

inline Tensor fully_connected(const Tensor& in, const FcParams& p, std::span<const float> weight,
                              std::span<const float> bias) {
  Tensor out(Shape{p.out_features, 1, 1});
  const std::size_t n = in.data.size();
  for (int o = 0; o < p.out_features; ++o) {
    const float* w = weight.data() + static_cast<std::size_t>(o) * n;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(w[i]) * in.data[i];
    out.data[o] = acc + (bias.empty() ? 0.0 : static_cast<double>(bias[o]));
  }
  return out;
}

inline Tensor relu(Tensor t) {
  for (double& x : t.data) x = std::max(0.0, x);
  return t;
}

inline Tensor pool(const Tensor& in, const PoolParams& p, Shape out_shape, bool max_pool) {
  Tensor out(out_shape);
  for (int c = 0; c < in.shape.c; ++c)
    for (int oy = 0; oy < out_shape.h; ++oy)
      for (int ox = 0; ox < out_shape.w; ++ox) {
        const int y0 = std::max(0, oy * p.stride_h - p.pad_h);
        const int x0 = std::max(0, ox * p.stride_w - p.pad_w);
        const int y1 = std::min(in.shape.h, oy * p.stride_h - p.pad_h + p.kernel_h);
        const int x1 = std::min(in.shape.w, ox * p.stride_w - p.pad_w + p.kernel_w);
        double acc = max_pool ? -std::numeric_limits<double>::infinity() : 0.0;
        int count = 0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) {
            const double v = in.at(c, y, x);
            acc = max_pool ? std::max(acc, v) : acc + v;
            ++count;
          }
        out.at(c, oy, ox) = max_pool ? acc : (count > 0 ? acc / count : 0.0);
      }
  return out;
}

inline Tensor local_response_norm(const Tensor& in, const LrnParams& p) {
  Tensor out(in.shape);
  const int half = (p.size - 1) / 2;
  const std::size_t plane = static_cast<std::size_t>(in.shape.h) * in.shape.w;
  for (int c = 0; c < in.shape.c; ++c) {
    const int lo = std::max(0, c - half);
    const int hi = std::min(in.shape.c - 1, c + p.size - 1 - half);
    for (std::size_t i = 0; i < plane; ++i) {
      double sq = 0.0;
      for (int j = lo; j <= hi; ++j) {
        const double v = in.data[j * plane + i];
        sq += v * v;
      }
      out.data[c * plane + i] = in.data[c * plane + i] / std::pow(p.k + p.alpha / p.size * sq, p.beta);
    }
  }
  return out;
}

inline Tensor batch_norm(Tensor t, const BatchNormParams& p, std::span<const float> mean,
                         std::span<const float> variance, std::span<const float> scale,
                         std::span<const float> shift) {
  const std::size_t plane = static_cast<std::size_t>(t.shape.h) * t.shape.w;
  for (int c = 0; c < t.shape.c; ++c) {
    const double g = scale[c] / std::sqrt(static_cast<double>(variance[c]) + p.eps);
    const double m = mean[c];
    const double b = shift[c];
    for (std::size_t i = 0; i < plane; ++i) {
      double& x = t.data[c * plane + i];
      x = g * (x - m) + b;
    }
  }
  return t;
}

/// exp-normalise with max subtraction; never overflows for finite input.
inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double m = *std::ranges::max_element(logits);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (out[i] = std::exp(logits[i] - m));
  for (double& x : out) x /= sum;
  return out;
}

inline Tensor add(const std::vector<const Tensor*>& in) {
  Tensor out = *in[0];
  for (std::size_t k = 1; k < in.size(); ++k)
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += in[k]->data[i];
  return out;
}

inline Tensor concat(const std::vector<const Tensor*>& in, Shape out_shape) {
  Tensor out(out_shape);
  std::size_t pos = 0;
  for (const Tensor* t : in) {
    std::ranges::copy(t->data, out.data.begin() + static_cast<std::ptrdiff_t>(pos));
    pos += t->data.size();
  }
  return out;
}

}  // namespace kernels
}  // namespace pcorr::engine
