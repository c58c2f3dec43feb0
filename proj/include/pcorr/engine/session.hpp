#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/core/fft.hpp"
#include "pcorr/core/numeric.hpp"
#include "pcorr/engine/graph.hpp"
#include "pcorr/engine/kernels.hpp"
#include "pcorr/image.hpp"

namespace pcorr::engine {

/// Per-tap flat neuron vectors from one forward pass.
struct ActivationSnapshot {
  std::vector<LayerTap> taps;
  std::vector<std::vector<double>> values;

  const std::vector<double>& at(std::string_view node) const {
    for (std::size_t i = 0; i < taps.size(); ++i)
      if (taps[i].node == node) return values[i];
    throw ValidationError("snapshot has no tap '" + std::string(node) + "'");
  }
};

enum class ConvPath { automatic, direct, fft };

struct SessionOptions {
  ConvPath conv_path = ConvPath::automatic;
  /// Upper bound on cached kernel spectra per convolution node.
  std::size_t max_spectrum_bytes = std::size_t{1} << 30;
};

namespace detail {

/// Frequency-domain execution plan for one convolution node (groups == 1).
/// Output channels are processed in pairs: with real input and real kernels,
/// IFFT(X * (conj(Ka) + i conj(Kb))) carries channel a in the real part and
/// channel b in the imaginary part.
struct FftConv {
  int rows = 0, cols = 0;          // transform size
  int pad_h = 0, pad_w = 0;        // padding after cropping unused kernel rows/cols
  std::vector<std::vector<fft::cplx>> spectra;  // [pair * cin + c], scaled by 1/(rows*cols)
  std::shared_ptr<fft::Plan2D> forward, inverse;
};

inline std::unique_ptr<FftConv> plan_fft_conv(const Node& n, const Shape& in, const SessionOptions& opt) {
  const auto& p = n.get<ConvParams>();
  if (p.groups != 1 || opt.conv_path == ConvPath::direct) return nullptr;
  const Shape& out = n.output;

  // Kernel rows/cols that can ever overlap the input.
  const int q0h = std::max(0, p.pad_h - (out.h - 1) * p.stride_h);
  const int q1h = std::min(p.kernel_h, p.pad_h + in.h);
  const int q0w = std::max(0, p.pad_w - (out.w - 1) * p.stride_w);
  const int q1w = std::min(p.kernel_w, p.pad_w + in.w);
  if (q1h <= q0h || q1w <= q0w) return nullptr;
  const int kh = q1h - q0h, kw = q1w - q0w;
  const int pad_h = p.pad_h - q0h, pad_w = p.pad_w - q0w;
  const int rows = fft::smooth_size(std::max({in.h + pad_h, (out.h - 1) * p.stride_h - pad_h + kh, in.h}));
  const int cols = fft::smooth_size(std::max({in.w + pad_w, (out.w - 1) * p.stride_w - pad_w + kw, in.w}));

  const double n_fft = static_cast<double>(rows) * cols;
  const int pairs = (p.out_channels + 1) / 2;
  const std::size_t bytes = static_cast<std::size_t>(pairs) * in.c * rows * cols * sizeof(fft::cplx);
  if (opt.conv_path == ConvPath::automatic) {
    const double direct = static_cast<double>(p.out_channels) * in.c * out.h * out.w * kh * kw;
    const double transform = 5.0 * n_fft * std::log2(n_fft);
    const double via_fft = (in.c + pairs) * transform + 8.0 * pairs * in.c * n_fft;
    if (via_fft * 2.0 >= direct || bytes > opt.max_spectrum_bytes) return nullptr;
  }

  auto plan = std::make_unique<FftConv>();
  plan->rows = rows;
  plan->cols = cols;
  plan->pad_h = pad_h;
  plan->pad_w = pad_w;
  plan->forward = std::make_shared<fft::Plan2D>(rows, cols, fft::Direction::forward);
  plan->inverse = std::make_shared<fft::Plan2D>(rows, cols, fft::Direction::inverse);

  const auto& weight = n.tensor("weight")->values;
  auto kernel_spectrum = [&](int o, int c) {
    std::vector<fft::cplx> k(static_cast<std::size_t>(rows) * cols);
    if (o >= p.out_channels) return k;
    const float* w = weight.data() + (static_cast<std::size_t>(o) * in.c + c) * p.kernel_h * p.kernel_w;
    for (int y = 0; y < kh; ++y)
      for (int x = 0; x < kw; ++x)
        k[static_cast<std::size_t>(y) * cols + x] = w[(y + q0h) * p.kernel_w + (x + q0w)];
    plan->forward->execute(k.data(), k.data());
    return k;
  };
  plan->spectra.resize(static_cast<std::size_t>(pairs) * in.c);
  for (int pr = 0; pr < pairs; ++pr)
    for (int c = 0; c < in.c; ++c) {
      const auto ka = kernel_spectrum(2 * pr, c);
      const auto kb = kernel_spectrum(2 * pr + 1, c);
      auto& s = plan->spectra[static_cast<std::size_t>(pr) * in.c + c];
      s.resize(ka.size());
      for (std::size_t i = 0; i < s.size(); ++i)
        s[i] = (std::conj(ka[i]) + fft::cplx(0.0, 1.0) * std::conj(kb[i])) / n_fft;
    }
  return plan;
}

inline Tensor conv2d_fft(const Tensor& in, const Node& n, const FftConv& plan) {
  const auto& p = n.get<ConvParams>();
  const Shape& out_shape = n.output;
  const std::size_t grid = static_cast<std::size_t>(plan.rows) * plan.cols;
  std::vector<std::vector<fft::cplx>> x(in.shape.c, std::vector<fft::cplx>(grid));
  for (int c = 0; c < in.shape.c; ++c) {
    for (int y = 0; y < in.shape.h; ++y)
      for (int xx = 0; xx < in.shape.w; ++xx) x[c][static_cast<std::size_t>(y) * plan.cols + xx] = in.at(c, y, xx);
    plan.forward->execute(x[c].data(), x[c].data());
  }
  const WeightTensor* bias = n.tensor("bias");
  Tensor out(out_shape);
  std::vector<fft::cplx> acc(grid);
  const int pairs = (p.out_channels + 1) / 2;
  for (int pr = 0; pr < pairs; ++pr) {
    std::fill(acc.begin(), acc.end(), fft::cplx{});
    for (int c = 0; c < in.shape.c; ++c) {
      const auto& s = plan.spectra[static_cast<std::size_t>(pr) * in.shape.c + c];
      for (std::size_t i = 0; i < grid; ++i) acc[i] += x[c][i] * s[i];
    }
    plan.inverse->execute(acc.data(), acc.data());
    const int a = 2 * pr, b = 2 * pr + 1;
    const double bias_a = bias ? bias->values[a] : 0.0;
    const double bias_b = bias && b < p.out_channels ? bias->values[b] : 0.0;
    for (int oy = 0; oy < out_shape.h; ++oy) {
      const int ty = ((oy * p.stride_h - plan.pad_h) % plan.rows + plan.rows) % plan.rows;
      for (int ox = 0; ox < out_shape.w; ++ox) {
        const int tx = ((ox * p.stride_w - plan.pad_w) % plan.cols + plan.cols) % plan.cols;
        const fft::cplx z = acc[static_cast<std::size_t>(ty) * plan.cols + tx];
        out.at(a, oy, ox) = z.real() + bias_a;
        if (b < p.out_channels) out.at(b, oy, ox) = z.imag() + bias_b;
      }
    }
  }
  return out;
}

inline std::span<const float> values_of(const Node& n, const std::string& name) {
  const WeightTensor* t = n.tensor(name);
  return t ? std::span<const float>(t->values) : std::span<const float>{};
}

}  // namespace detail

/// Executes a validated graph. Holds per-node execution plans; `forward` is
/// const and owns its scratch buffers, so one session serves many threads.
class InferenceSession {
 public:
  explicit InferenceSession(std::shared_ptr<const NetworkGraph> graph, SessionOptions options = {})
      : graph_(std::move(graph)), options_(options) {
    if (!graph_) throw ValidationError("null graph");
    plans_.resize(graph_->nodes.size());
    for (std::size_t i = 0; i < graph_->nodes.size(); ++i) {
      const Node& n = graph_->nodes[i];
      if (n.kind != OpKind::conv2d) continue;
      const Shape& in = graph_->node(n.inputs[0]).output;
      plans_[i] = detail::plan_fft_conv(n, in, options_);
    }
    last_use_.assign(graph_->nodes.size(), 0);
    for (std::size_t i = 0; i < graph_->nodes.size(); ++i)
      for (const auto& src : graph_->nodes[i].inputs) last_use_[*graph_->find(src)] = i;
  }

  explicit InferenceSession(NetworkGraph graph, SessionOptions options = {})
      : InferenceSession(std::make_shared<const NetworkGraph>(std::move(graph)), options) {}

  const NetworkGraph& graph() const { return *graph_; }
  std::shared_ptr<const NetworkGraph> graph_ptr() const { return graph_; }

  bool uses_fft(std::string_view node) const { return plans_[*graph_->find(node)] != nullptr; }

  /// Preprocessed input tensor for `image`.
  Tensor prepare_input(const ImagePlane& image) const {
    const Shape& s = graph_->input;
    if (image.channels() != s.c || image.height() != s.h || image.width() != s.w)
      throw ShapeError(graph_->nodes.front().id, "image " + std::to_string(image.channels()) + "x" +
                                                     std::to_string(image.height()) + "x" +
                                                     std::to_string(image.width()) + " does not match input " +
                                                     to_string(s));
    const Preprocessing& pre = graph_->preprocessing;
    Tensor t(s);
    for (int c = 0; c < s.c; ++c) {
      const int src = pre.reverse_channels ? s.c - 1 - c : c;
      const double mean = pre.mean_for(c);
      auto plane = image.plane(src);
      std::copy(plane.begin(), plane.end(), t.data.begin() + static_cast<std::ptrdiff_t>(c * plane.size()));
      for (std::size_t i = 0; i < plane.size(); ++i) {
        double& v = t.data[c * plane.size() + i];
        v = (v - mean) * pre.scale;
      }
    }
    return t;
  }

  ActivationSnapshot forward(const ImagePlane& image, std::span<const LayerTap> taps) const {
    const auto& nodes = graph_->nodes;
    std::vector<int> tap_slot(nodes.size(), -1);
    std::size_t last_needed = 0;
    for (std::size_t t = 0; t < taps.size(); ++t) {
      const auto idx = graph_->find(taps[t].node);
      if (!idx) throw ValidationError("unknown tap '" + taps[t].node + "'");
      tap_slot[*idx] = static_cast<int>(t);
      last_needed = std::max(last_needed, *idx);
    }
    ActivationSnapshot snap;
    snap.taps.assign(taps.begin(), taps.end());
    for (auto& tap : snap.taps)
      if (tap.stage.empty()) tap.stage = graph_->node(tap.node).stage_name();
    snap.values.resize(taps.size());

    std::vector<Tensor> outputs(nodes.size());
    for (std::size_t i = 0; i <= last_needed && i < nodes.size(); ++i) {
      const Node& n = nodes[i];
      std::vector<const Tensor*> in;
      for (const auto& src : n.inputs) in.push_back(&outputs[*graph_->find(src)]);
      outputs[i] = evaluate(i, n, in, image);
      if (tap_slot[i] >= 0) {
        if (!all_finite(outputs[i].data))
          throw Error("non-finite activation at tap '" + n.id + "'");
        snap.values[tap_slot[i]] = outputs[i].data;
      }
      for (const auto& src : n.inputs) {
        const std::size_t j = *graph_->find(src);
        if (last_use_[j] == i) outputs[j] = Tensor{};
      }
    }
    return snap;
  }

  ActivationSnapshot forward(const ImagePlane& image, const std::vector<LayerTap>& taps) const {
    return forward(image, std::span<const LayerTap>(taps));
  }

 private:
  Tensor evaluate(std::size_t i, const Node& n, const std::vector<const Tensor*>& in,
                  const ImagePlane& image) const {
    switch (n.kind) {
      case OpKind::input: return prepare_input(image);
      case OpKind::conv2d:
        if (plans_[i]) return detail::conv2d_fft(*in[0], n, *plans_[i]);
        return kernels::conv2d_direct(*in[0], n.get<ConvParams>(), detail::values_of(n, "weight"),
                                      detail::values_of(n, "bias"), n.output);
      case OpKind::fully_connected:
        return kernels::fully_connected(*in[0], n.get<FcParams>(), detail::values_of(n, "weight"),
                                        detail::values_of(n, "bias"));
      case OpKind::relu: return kernels::relu(*in[0]);
      case OpKind::max_pool: return kernels::pool(*in[0], n.get<PoolParams>(), n.output, true);
      case OpKind::avg_pool: return kernels::pool(*in[0], n.get<PoolParams>(), n.output, false);
      case OpKind::local_response_norm: return kernels::local_response_norm(*in[0], n.get<LrnParams>());
      case OpKind::batch_norm:
        return kernels::batch_norm(*in[0], n.get<BatchNormParams>(), detail::values_of(n, "mean"),
                                   detail::values_of(n, "variance"), detail::values_of(n, "scale"),
                                   detail::values_of(n, "shift"));
      case OpKind::add: return kernels::add(in);
      case OpKind::concat: return kernels::concat(in, n.output);
      case OpKind::softmax: {
        Tensor t(n.output);
        t.data = kernels::softmax(in[0]->data);
        return t;
      }
    }
    throw ShapeError(n.id, "unsupported op");
  }

  std::shared_ptr<const NetworkGraph> graph_;
  SessionOptions options_;
  std::vector<std::unique_ptr<detail::FftConv>> plans_;
  std::vector<std::size_t> last_use_;
};

/// One-off forward pass; builds a session per call.
inline ActivationSnapshot forward(const NetworkGraph& graph, const ImagePlane& image,
                                  const std::vector<LayerTap>& taps) {
  InferenceSession session(std::make_shared<const NetworkGraph>(graph));
  return session.forward(image, taps);
}

}  // namespace pcorr::engine
