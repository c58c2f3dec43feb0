#pragma once

#include <cstdint>
#include <utility>

#include "pcorr/core/rng.hpp"
#include "pcorr/engine/graph.hpp"

namespace pcorr::engine {

/// Uniformly permutes the entries of every tensor of every convolution and
/// fully-connected node. Each tensor draws from its own stream, keyed by
/// (seed, node id, tensor name), so results do not depend on node order.
inline NetworkGraph scramble_weights(NetworkGraph net, std::uint64_t seed) {
  for (auto& n : net.nodes) {
    if (n.kind != OpKind::conv2d && n.kind != OpKind::fully_connected) continue;
    for (auto& [name, t] : n.tensors) {
      Rng rng(derive_seed(seed, "scramble", n.id, name));
      auto& v = t.values;
      for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
    }
  }
  net.name += "+scrambled";
  return net;
}

}  // namespace pcorr::engine
