#pragma once
// Naive reference interpreter and random graph generator shared by the
// engine unit tests and the acceptance runner. Deliberately written without
// the engine's kernels: every output element is one direct summation.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "pcorr/engine/graph.hpp"
#include "pcorr/image.hpp"

namespace ref {

using pcorr::engine::NetworkGraph;
using pcorr::engine::Node;
using pcorr::engine::OpKind;
using pcorr::engine::Shape;

struct T {
  Shape s;
  std::vector<double> v;
  double get(int c, int y, int x) const { return v[(static_cast<std::size_t>(c) * s.h + y) * s.w + x]; }
};

inline const std::vector<float>* tensor(const Node& n, const char* name) {
  auto it = n.tensors.find(name);
  return it == n.tensors.end() ? nullptr : &it->second.values;
}

inline T conv(const T& in, const Node& n) {
  const auto& p = n.get<pcorr::engine::ConvParams>();
  const auto& w = *tensor(n, "weight");
  const auto* b = tensor(n, "bias");
  const int cg = in.s.c / p.groups, og = p.out_channels / p.groups;
  T out{n.output, std::vector<double>(n.output.size())};
  std::size_t k = 0;
  for (int o = 0; o < n.output.c; ++o)
    for (int oy = 0; oy < n.output.h; ++oy)
      for (int ox = 0; ox < n.output.w; ++ox) {
        double acc = b ? (*b)[o] : 0.0;
        const int g = o / og;
        for (int ci = 0; ci < cg; ++ci)
          for (int ky = 0; ky < p.kernel_h; ++ky)
            for (int kx = 0; kx < p.kernel_w; ++kx) {
              const int y = oy * p.stride_h - p.pad_h + ky, x = ox * p.stride_w - p.pad_w + kx;
              if (y < 0 || x < 0 || y >= in.s.h || x >= in.s.w) continue;
              acc += static_cast<double>(w[((o * cg + ci) * p.kernel_h + ky) * p.kernel_w + kx]) *
                     in.get(g * cg + ci, y, x);
            }
        out.v[k++] = acc;
      }
  return out;
}

inline T pool(const T& in, const Node& n, bool is_max) {
  const auto& p = n.get<pcorr::engine::PoolParams>();
  T out{n.output, {}};
  for (int c = 0; c < n.output.c; ++c)
    for (int oy = 0; oy < n.output.h; ++oy)
      for (int ox = 0; ox < n.output.w; ++ox) {
        double best = -INFINITY, sum = 0.0;
        int count = 0;
        for (int ky = 0; ky < p.kernel_h; ++ky)
          for (int kx = 0; kx < p.kernel_w; ++kx) {
            const int y = oy * p.stride_h - p.pad_h + ky, x = ox * p.stride_w - p.pad_w + kx;
            if (y < 0 || x < 0 || y >= in.s.h || x >= in.s.w) continue;
            best = std::max(best, in.get(c, y, x));
            sum += in.get(c, y, x);
            ++count;
          }
        out.v.push_back(is_max ? best : sum / count);
      }
  return out;
}

inline T evaluate(const Node& n, const std::vector<const T*>& in) {
  using namespace pcorr::engine;
  switch (n.kind) {
    case OpKind::conv2d: return conv(*in[0], n);
    case OpKind::fully_connected: {
      const auto& w = *tensor(n, "weight");
      const auto* b = tensor(n, "bias");
      T out{n.output, {}};
      const std::size_t m = in[0]->v.size();
      for (int o = 0; o < n.output.c; ++o) {
        double acc = b ? (*b)[o] : 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += static_cast<double>(w[o * m + i]) * in[0]->v[i];
        out.v.push_back(acc);
      }
      return out;
    }
    case OpKind::relu: {
      T out = *in[0];
      for (double& x : out.v) x = x > 0 ? x : 0.0;
      return out;
    }
    case OpKind::max_pool: return pool(*in[0], n, true);
    case OpKind::avg_pool: return pool(*in[0], n, false);
    case OpKind::local_response_norm: {
      const auto& p = n.get<LrnParams>();
      T out = *in[0];
      const int half = (p.size - 1) / 2;
      for (int c = 0; c < out.s.c; ++c)
        for (int y = 0; y < out.s.h; ++y)
          for (int x = 0; x < out.s.w; ++x) {
            double sq = 0.0;
            for (int j = c - half; j <= c - half + p.size - 1; ++j)
              if (j >= 0 && j < out.s.c) sq += in[0]->get(j, y, x) * in[0]->get(j, y, x);
            out.v[(c * out.s.h + y) * out.s.w + x] =
                in[0]->get(c, y, x) / std::pow(p.k + p.alpha * sq / p.size, p.beta);
          }
      return out;
    }
    case OpKind::batch_norm: {
      const double eps = n.get<BatchNormParams>().eps;
      T out = *in[0];
      const std::size_t plane = static_cast<std::size_t>(out.s.h) * out.s.w;
      for (std::size_t i = 0; i < out.v.size(); ++i) {
        const std::size_t c = i / plane;
        out.v[i] = (*tensor(n, "scale"))[c] * (in[0]->v[i] - (*tensor(n, "mean"))[c]) /
                       std::sqrt((*tensor(n, "variance"))[c] + eps) +
                   (*tensor(n, "shift"))[c];
      }
      return out;
    }
    case OpKind::add: {
      T out = *in[0];
      for (std::size_t k = 1; k < in.size(); ++k)
        for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += in[k]->v[i];
      return out;
    }
    case OpKind::concat: {
      T out{n.output, {}};
      for (const T* t : in) out.v.insert(out.v.end(), t->v.begin(), t->v.end());
      return out;
    }
    case OpKind::softmax: {
      T out{n.output, {}};
      double m = -INFINITY;
      for (double x : in[0]->v) m = std::max(m, x);
      double z = 0.0;
      for (double x : in[0]->v) z += std::exp(x - m);
      for (double x : in[0]->v) out.v.push_back(std::exp(x - m) / z);
      return out;
    }
    case OpKind::input: break;
  }
  return {};
}

/// All node outputs, keyed by id.
inline std::map<std::string, T> run(const NetworkGraph& g, const pcorr::ImagePlane& image) {
  std::map<std::string, T> out;
  const auto& pre = g.preprocessing;
  for (const auto& n : g.nodes) {
    if (n.kind == OpKind::input) {
      T t{g.input, {}};
      for (int c = 0; c < g.input.c; ++c)
        for (int y = 0; y < g.input.h; ++y)
          for (int x = 0; x < g.input.w; ++x) {
            const int src = pre.reverse_channels ? g.input.c - 1 - c : c;
            t.v.push_back((image.at(src, y, x) - pre.mean_for(c)) * pre.scale);
          }
      out[n.id] = std::move(t);
      continue;
    }
    std::vector<const T*> in;
    for (const auto& s : n.inputs) in.push_back(&out.at(s));
    out[n.id] = evaluate(n, in);
  }
  return out;
}

/// Random small graph: a chain of 2..6 ops over an input of at most 16x16x4,
/// sometimes with an add or concat branch, ending in fc + softmax.
inline NetworkGraph random_graph(std::uint64_t seed) {
  using namespace pcorr::engine;
  std::mt19937_64 rng(seed);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto weights = [&](std::vector<int> shape) {
    WeightTensor t{shape, {}};
    std::normal_distribution<float> d(0.0f, 0.5f);
    for (std::size_t i = 0; i < t.expected_size(); ++i) t.values.push_back(d(rng));
    return t;
  };

  NetworkGraph g;
  std::string last = "data";
  g.name = "random-" + std::to_string(seed);
  g.input = {uni(0, 1) ? 3 : 1, uni(6, 16), uni(6, 16)};
  g.preprocessing.mean = {uni(0, 128) * 1.0};
  g.preprocessing.scale = 1.0 / 64;
  g.preprocessing.reverse_channels = g.input.c == 3 && uni(0, 1);
  g.nodes.push_back(Node{"data", OpKind::input, {}, "data", {}, {}, {}});
  g.validate();

  // Appends the nodes if the result still validates; returns the last id or "".
  auto add_nodes = [&](std::vector<Node> ns) -> std::string {
    const std::size_t before = g.nodes.size();
    for (auto& n : ns) g.nodes.push_back(std::move(n));
    try {
      g.validate();
    } catch (const pcorr::ValidationError&) {
      g.nodes.resize(before);
      g.validate();
      return {};
    }
    return g.nodes.back().id;
  };
  auto add_node = [&](Node n) { return add_nodes({std::move(n)}); };
  auto advance = [&](const std::string& id) {
    if (!id.empty()) last = id;
  };
  auto make_conv = [&](const std::string& id, const std::string& src, int out_c, int k, int stride, int pad) {
    const Shape s = g.node(src).output;
    int groups = 1;
    if (s.c % 2 == 0 && out_c % 2 == 0 && uni(0, 2) == 0) groups = 2;
    Node n{id, OpKind::conv2d, {src}, {}, ConvParams{out_c, k, k, stride, stride, pad, pad, groups}, {}, {}};
    n.tensors["weight"] = weights({out_c, s.c / groups, k, k});
    if (uni(0, 3) != 0) n.tensors["bias"] = weights({out_c});
    return n;
  };

  const int ops = uni(2, 6);
  for (int i = 0; i < ops; ++i) {
    const Shape s = g.node(last).output;
    const std::string id = "n" + std::to_string(i);
    const int choice = uni(0, 7);
    if (choice <= 2 || s.h < 3 || s.w < 3) {
      const int k = std::min({uni(1, 5), s.h + 2, s.w + 2});
      const int pad = std::min(uni(0, 2), k - 1);
      advance(add_node(make_conv(id, last, 2 * uni(1, 3), k, uni(1, 2), pad)));
    } else if (choice == 3) {
      advance(add_node(Node{id, OpKind::relu, {last}, {}, {}, {}, {}}));
    } else if (choice == 4) {
      PoolParams p{2, 2, uni(1, 2), uni(1, 2), uni(0, 1), uni(0, 1), uni(0, 1) == 1};
      p.stride_w = p.stride_h;
      p.pad_w = p.pad_h;
      advance(add_node(Node{id, uni(0, 1) ? OpKind::max_pool : OpKind::avg_pool, {last}, {}, p, {}, {}}));
    } else if (choice == 5) {
      const bool lrn = uni(0, 1);
      if (lrn) {
        advance(add_node(Node{id, OpKind::local_response_norm, {last}, {}, LrnParams{uni(1, 5), 1e-2, 0.75, 2.0}, {}, {}}));
      } else {
        Node n{id, OpKind::batch_norm, {last}, {}, BatchNormParams{1e-5}, {}, {}};
        n.tensors["mean"] = weights({s.c});
        n.tensors["scale"] = weights({s.c});
        n.tensors["shift"] = weights({s.c});
        auto var = weights({s.c});
        for (float& v : var.values) v = std::abs(v) + 0.1f;
        n.tensors["variance"] = var;
        advance(add_node(std::move(n)));
      }
    } else {
      // Two same-shape 3x3 convolution branches joined by add or concat.
      const int oc = 2 * uni(1, 2);
      advance(add_nodes({make_conv(id + "a", last, oc, 3, 1, 1), make_conv(id + "b", last, oc, 1, 1, 0),
                         Node{id, choice == 6 ? OpKind::add : OpKind::concat, {id + "a", id + "b"}, {}, {}, {}, {}}}));
    }
  }
  const Shape s = g.node(last).output;
  Node fc{"fc", OpKind::fully_connected, {last}, {}, FcParams{uni(2, 10)}, {}, {}};
  fc.tensors["weight"] = weights({fc.get<FcParams>().out_features, static_cast<int>(s.size())});
  fc.tensors["bias"] = weights({fc.get<FcParams>().out_features});
  add_node(std::move(fc));
  add_node(Node{"prob", OpKind::softmax, {"fc"}, {}, {}, {}, {}});
  return g;
}

inline pcorr::ImagePlane random_image(const NetworkGraph& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.0, 255.0);
  pcorr::ImagePlane img(g.input.w, g.input.h, g.input.c);
  for (double& v : img.data()) v = d(rng);
  return img;
}

/// Normwise relative error max|a-b| / max|b| (absolute when b is all zero).
inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

}  // namespace ref
