#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "pcorr/core/error.hpp"

namespace pcorr::engine {

/// Channel/height/width extent of a node output. Vectors are (n, 1, 1).
struct Shape {
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t size() const { return static_cast<std::size_t>(c) * h * w; }
  bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

enum class OpKind {
  input,
  conv2d,
  fully_connected,
  relu,
  max_pool,
  avg_pool,
  local_response_norm,
  batch_norm,
  add,
  concat,
  softmax,
};

inline std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::input: return "input";
    case OpKind::conv2d: return "conv2d";
    case OpKind::fully_connected: return "fully_connected";
    case OpKind::relu: return "relu";
    case OpKind::max_pool: return "max_pool";
    case OpKind::avg_pool: return "avg_pool";
    case OpKind::local_response_norm: return "local_response_norm";
    case OpKind::batch_norm: return "batch_norm";
    case OpKind::add: return "add";
    case OpKind::concat: return "concat";
    case OpKind::softmax: return "softmax";
  }
  return "?";
}

inline std::optional<OpKind> parse_op_kind(std::string_view s) {
  for (OpKind k : {OpKind::input, OpKind::conv2d, OpKind::fully_connected, OpKind::relu,
                   OpKind::max_pool, OpKind::avg_pool, OpKind::local_response_norm,
                   OpKind::batch_norm, OpKind::add, OpKind::concat, OpKind::softmax})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

/// Shape or wiring inconsistency; carries the offending node id.
class ShapeError : public ValidationError {
 public:
  ShapeError(std::string node, const std::string& what)
      : ValidationError("node '" + node + "': " + what), node_(std::move(node)) {}
  const std::string& node() const { return node_; }

 private:
  std::string node_;
};

struct ConvParams {
  int out_channels = 0;
  int kernel_h = 1, kernel_w = 1;
  int stride_h = 1, stride_w = 1;
  int pad_h = 0, pad_w = 0;
  int groups = 1;
};

struct FcParams {
  int out_features = 0;
};

/// Window pooling. Padding never contributes to a window: max ignores it
/// and mean divides by the count of real input elements.
struct PoolParams {
  int kernel_h = 2, kernel_w = 2;
  int stride_h = 2, stride_w = 2;
  int pad_h = 0, pad_w = 0;
  bool ceil_mode = false;
};

/// Cross-channel response normalisation:
/// y = x / (k + alpha/size * sum_{window} x^2)^beta.
struct LrnParams {
  int size = 5;
  double alpha = 1e-4;
  double beta = 0.75;
  double k = 1.0;
};

/// Inference batch norm: y = scale * (x - mean) / sqrt(variance + eps) + shift.
struct BatchNormParams {
  double eps = 1e-5;
};

using OpParams = std::variant<std::monostate, ConvParams, FcParams, PoolParams, LrnParams, BatchNormParams>;

/// Stored parameter tensor (32-bit floats, row-major).
struct WeightTensor {
  std::vector<int> shape;
  std::vector<float> values;

  std::size_t expected_size() const {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }
};

struct Node {
  std::string id;
  OpKind kind = OpKind::input;
  std::vector<std::string> inputs;
  std::string stage;  ///< semantic stage name (e.g. conv1_1); defaults to id
  OpParams params;
  std::map<std::string, WeightTensor> tensors;  ///< weight, bias, mean, variance, scale, shift
  Shape output;                                 ///< filled in by validate()

  const std::string& stage_name() const { return stage.empty() ? id : stage; }

  template <typename P>
  const P& get() const {
    if (const P* p = std::get_if<P>(&params)) return *p;
    throw ShapeError(id, "missing parameters for " + std::string(to_string(kind)));
  }

  const WeightTensor* tensor(const std::string& name) const {
    auto it = tensors.find(name);
    return it == tensors.end() ? nullptr : &it->second;
  }
};

/// Per-channel affine input transform: (pixel - mean[c]) * scale, optionally
/// reversing channel order first.
struct Preprocessing {
  std::vector<double> mean;  ///< one entry per channel, or a single shared entry
  double scale = 1.0;
  bool reverse_channels = false;

  double mean_for(int c) const {
    if (mean.empty()) return 0.0;
    return mean.size() == 1 ? mean[0] : mean[static_cast<std::size_t>(c)];
  }
};

/// A node output captured during a forward pass.
struct LayerTap {
  std::string node;
  std::string stage;  ///< display name; defaults to the node's stage name
};

/// Ordered layered model. Nodes are stored in evaluation order; every input
/// edge refers to an earlier node.
class NetworkGraph {
 public:
  std::string name;
  Shape input;
  Preprocessing preprocessing;
  std::vector<Node> nodes;
  std::vector<std::string> default_taps;  ///< declared by the producer; may be empty

  std::optional<std::size_t> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const Node& node(std::string_view id) const {
    auto i = find(id);
    if (!i) throw ValidationError("no node named '" + std::string(id) + "'");
    return nodes[*i];
  }

  /// Wiring, acyclicity (by ordering), parameter and tensor checks, then
  /// shape inference. Must be called after any structural change.
  void validate();

  /// Taps declared by the producer, or the conventional set: the input,
  /// every convolution / fully-connected output, and every softmax.
  std::vector<LayerTap> taps() const {
    std::vector<LayerTap> out;
    if (!default_taps.empty()) {
      for (const auto& id : default_taps) out.push_back({id, node(id).stage_name()});
      return out;
    }
    for (const auto& n : nodes)
      if (n.kind == OpKind::input || n.kind == OpKind::conv2d ||
          n.kind == OpKind::fully_connected || n.kind == OpKind::softmax)
        out.push_back({n.id, n.stage_name()});
    return out;
  }

  /// Every node as a tap, in evaluation order.
  std::vector<LayerTap> all_taps() const {
    std::vector<LayerTap> out;
    for (const auto& n : nodes) out.push_back({n.id, n.stage_name()});
    return out;
  }

  /// Resolves tap names (node ids or stage names) against the graph.
  std::vector<LayerTap> resolve_taps(const std::vector<std::string>& names) const {
    std::vector<LayerTap> out;
    for (const auto& name : names) {
      if (find(name)) {
        out.push_back({name, node(name).stage_name()});
        continue;
      }
      auto it = std::ranges::find_if(nodes, [&](const Node& n) { return n.stage == name; });
      if (it == nodes.end()) throw ValidationError("unknown tap '" + name + "'");
      out.push_back({it->id, it->stage_name()});
    }
    return out;
  }

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline int pooled_extent(int in, int k, int s, int p, bool ceil_mode) {
  const int span = in + 2 * p - k;
  if (span < 0) return 0;
  int out = (ceil_mode ? (span + s - 1) / s : span / s) + 1;
  // A window must start inside the input or its leading padding.
  if (ceil_mode && (out - 1) * s >= in + p) --out;
  return out;
}

inline void require_tensor(const Node& n, const std::string& name, std::size_t size, bool optional = false) {
  const WeightTensor* t = n.tensor(name);
  if (!t) {
    if (optional) return;
    throw ShapeError(n.id, "missing tensor '" + name + "'");
  }
  if (t->expected_size() != t->values.size())
    throw ShapeError(n.id, "tensor '" + name + "' declared shape does not match its data");
  if (t->values.size() != size)
    throw ShapeError(n.id, "tensor '" + name + "' has " + std::to_string(t->values.size()) +
                               " values, expected " + std::to_string(size));
}

}  // namespace detail

inline void NetworkGraph::validate() {
  index_.clear();
  if (input.c < 1 || input.h < 1 || input.w < 1) throw ValidationError("input shape must be positive");
  if (!preprocessing.mean.empty() && preprocessing.mean.size() != 1 &&
      preprocessing.mean.size() != static_cast<std::size_t>(input.c))
    throw ValidationError("preprocessing mean needs 1 or " + std::to_string(input.c) + " entries");
  if (nodes.empty()) throw ValidationError("graph has no nodes");

  std::vector<int> consumers(nodes.size(), 0);
  int inputs_seen = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Node& n = nodes[i];
    if (n.id.empty()) throw ValidationError("node without id at position " + std::to_string(i));
    if (index_.contains(n.id)) throw ShapeError(n.id, "duplicate node id");

    std::vector<const Shape*> in;
    for (const auto& src : n.inputs) {
      auto it = index_.find(src);
      if (it == index_.end())
        throw ShapeError(n.id, "input '" + src + "' is not an earlier node");
      in.push_back(&nodes[it->second].output);
      ++consumers[it->second];
    }
    auto arity = [&](std::size_t k) {
      if (in.size() != k)
        throw ShapeError(n.id, std::string(to_string(n.kind)) + " takes " + std::to_string(k) + " input(s)");
    };

    switch (n.kind) {
      case OpKind::input:
        arity(0);
        ++inputs_seen;
        n.output = input;
        break;
      case OpKind::conv2d: {
        arity(1);
        const auto& p = n.get<ConvParams>();
        const Shape& s = *in[0];
        if (p.groups < 1 || s.c % p.groups != 0 || p.out_channels < 1 || p.out_channels % p.groups != 0)
          throw ShapeError(n.id, "channel counts incompatible with groups");
        if (p.kernel_h < 1 || p.kernel_w < 1 || p.stride_h < 1 || p.stride_w < 1 || p.pad_h < 0 || p.pad_w < 0)
          throw ShapeError(n.id, "invalid kernel/stride/pad");
        const int oh = (s.h + 2 * p.pad_h - p.kernel_h) / p.stride_h + 1;
        const int ow = (s.w + 2 * p.pad_w - p.kernel_w) / p.stride_w + 1;
        if (s.h + 2 * p.pad_h < p.kernel_h || s.w + 2 * p.pad_w < p.kernel_w || oh < 1 || ow < 1)
          throw ShapeError(n.id, "kernel larger than padded input " + to_string(s));
        detail::require_tensor(n, "weight",
                               static_cast<std::size_t>(p.out_channels) * (s.c / p.groups) * p.kernel_h * p.kernel_w);
        detail::require_tensor(n, "bias", static_cast<std::size_t>(p.out_channels), true);
        n.output = {p.out_channels, oh, ow};
        break;
      }
      case OpKind::fully_connected: {
        arity(1);
        const auto& p = n.get<FcParams>();
        if (p.out_features < 1) throw ShapeError(n.id, "out_features must be positive");
        detail::require_tensor(n, "weight", static_cast<std::size_t>(p.out_features) * in[0]->size());
        detail::require_tensor(n, "bias", static_cast<std::size_t>(p.out_features), true);
        n.output = {p.out_features, 1, 1};
        break;
      }
      case OpKind::relu:
      case OpKind::local_response_norm:
        arity(1);
        if (n.kind == OpKind::local_response_norm) {
          const auto& p = n.get<LrnParams>();
          if (p.size < 1) throw ShapeError(n.id, "LRN size must be positive");
        }
        n.output = *in[0];
        break;
      case OpKind::batch_norm: {
        arity(1);
        const auto& p = n.get<BatchNormParams>();
        if (!(p.eps >= 0.0)) throw ShapeError(n.id, "eps must be non-negative");
        for (const char* t : {"mean", "variance", "scale", "shift"})
          detail::require_tensor(n, t, static_cast<std::size_t>(in[0]->c));
        n.output = *in[0];
        break;
      }
      case OpKind::max_pool:
      case OpKind::avg_pool: {
        arity(1);
        const auto& p = n.get<PoolParams>();
        if (p.kernel_h < 1 || p.kernel_w < 1 || p.stride_h < 1 || p.stride_w < 1 || p.pad_h < 0 ||
            p.pad_w < 0 || p.pad_h >= p.kernel_h || p.pad_w >= p.kernel_w)
          throw ShapeError(n.id, "invalid pooling window");
        const int oh = detail::pooled_extent(in[0]->h, p.kernel_h, p.stride_h, p.pad_h, p.ceil_mode);
        const int ow = detail::pooled_extent(in[0]->w, p.kernel_w, p.stride_w, p.pad_w, p.ceil_mode);
        if (oh < 1 || ow < 1) throw ShapeError(n.id, "pooling window larger than input " + to_string(*in[0]));
        n.output = {in[0]->c, oh, ow};
        break;
      }
      case OpKind::add: {
        if (in.size() < 2) throw ShapeError(n.id, "add takes at least two inputs");
        for (const Shape* s : in)
          if (!(*s == *in[0])) throw ShapeError(n.id, "add inputs differ in shape");
        n.output = *in[0];
        break;
      }
      case OpKind::concat: {
        if (in.empty()) throw ShapeError(n.id, "concat takes at least one input");
        Shape out = *in[0];
        out.c = 0;
        for (const Shape* s : in) {
          if (s->h != out.h || s->w != out.w) throw ShapeError(n.id, "concat inputs differ in spatial size");
          out.c += s->c;
        }
        n.output = out;
        break;
      }
      case OpKind::softmax:
        arity(1);
        n.output = {static_cast<int>(in[0]->size()), 1, 1};
        break;
    }
    index_.emplace(n.id, i);
  }
  if (inputs_seen != 1) throw ValidationError("graph must have exactly one input node");
  if (nodes.front().kind != OpKind::input) throw ShapeError(nodes.front().id, "first node must be the input");
  const auto sinks = std::ranges::count(consumers, 0);
  if (sinks != 1) throw ValidationError("graph must have exactly one output node, found " + std::to_string(sinks));
  for (const auto& id : default_taps)
    if (!index_.contains(id)) throw ValidationError("declared tap '" + id + "' is not a node");
}

}  // namespace pcorr::engine
