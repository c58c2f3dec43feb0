#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/core/sha256.hpp"
#include "pcorr/engine/graph.hpp"

namespace pcorr::nwf {

static_assert(std::endian::native == std::endian::little, "NWF blobs are read in place as little-endian");

inline constexpr char kMagic[8] = {'N', 'W', 'F', 'v', '0', '0', '0', '1'};
inline constexpr int kFormatVersion = 1;

enum class ErrorKind { bad_magic, bad_version, malformed, unsupported_op, shape_mismatch, digest_mismatch, io };

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::bad_magic: return "bad magic";
    case ErrorKind::bad_version: return "bad version";
    case ErrorKind::malformed: return "malformed";
    case ErrorKind::unsupported_op: return "unsupported op";
    case ErrorKind::shape_mismatch: return "shape mismatch";
    case ErrorKind::digest_mismatch: return "digest mismatch";
    case ErrorKind::io: return "io";
  }
  return "?";
}

class NwfError : public ValidationError {
 public:
  NwfError(ErrorKind kind, const std::string& what, std::string node = {})
      : ValidationError("nwf " + std::string(to_string(kind)) + (node.empty() ? "" : " at node '" + node + "'") +
                        ": " + what),
        kind_(kind),
        node_(std::move(node)) {}
  ErrorKind kind() const { return kind_; }
  const std::string& node() const { return node_; }

 private:
  ErrorKind kind_;
  std::string node_;
};

namespace detail {

using nlohmann::json;

inline json pair(int a, int b) { return json::array({a, b}); }

inline void read_pair(const json& j, const char* key, int& a, int& b) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (v.is_number_integer()) {
    a = b = v.get<int>();
  } else {
    if (!v.is_array() || v.size() != 2) throw std::invalid_argument(std::string(key) + " must be an integer or [h, w]");
    a = v[0].get<int>();
    b = v[1].get<int>();
  }
}

inline json params_to_json(const engine::Node& n) {
  using namespace engine;
  json p = json::object();
  switch (n.kind) {
    case OpKind::conv2d: {
      const auto& c = n.get<ConvParams>();
      p = {{"out_channels", c.out_channels}, {"kernel", pair(c.kernel_h, c.kernel_w)},
           {"stride", pair(c.stride_h, c.stride_w)}, {"pad", pair(c.pad_h, c.pad_w)}, {"groups", c.groups}};
      break;
    }
    case OpKind::fully_connected: p = {{"out_features", n.get<FcParams>().out_features}}; break;
    case OpKind::max_pool:
    case OpKind::avg_pool: {
      const auto& c = n.get<PoolParams>();
      p = {{"kernel", pair(c.kernel_h, c.kernel_w)}, {"stride", pair(c.stride_h, c.stride_w)},
           {"pad", pair(c.pad_h, c.pad_w)}, {"ceil_mode", c.ceil_mode}};
      break;
    }
    case OpKind::local_response_norm: {
      const auto& c = n.get<LrnParams>();
      p = {{"size", c.size}, {"alpha", c.alpha}, {"beta", c.beta}, {"k", c.k}};
      break;
    }
    case OpKind::batch_norm: p = {{"eps", n.get<BatchNormParams>().eps}}; break;
    default: break;
  }
  return p;
}

inline engine::OpParams params_from_json(engine::OpKind kind, const json& j) {
  using namespace engine;
  switch (kind) {
    case OpKind::conv2d: {
      ConvParams c;
      c.out_channels = j.at("out_channels").get<int>();
      read_pair(j, "kernel", c.kernel_h, c.kernel_w);
      read_pair(j, "stride", c.stride_h, c.stride_w);
      read_pair(j, "pad", c.pad_h, c.pad_w);
      c.groups = j.value("groups", 1);
      return c;
    }
    case OpKind::fully_connected: return FcParams{j.at("out_features").get<int>()};
    case OpKind::max_pool:
    case OpKind::avg_pool: {
      PoolParams c;
      read_pair(j, "kernel", c.kernel_h, c.kernel_w);
      read_pair(j, "stride", c.stride_h, c.stride_w);
      read_pair(j, "pad", c.pad_h, c.pad_w);
      c.ceil_mode = j.value("ceil_mode", false);
      return c;
    }
    case OpKind::local_response_norm: {
      LrnParams c;
      c.size = j.value("size", c.size);
      c.alpha = j.value("alpha", c.alpha);
      c.beta = j.value("beta", c.beta);
      c.k = j.value("k", c.k);
      return c;
    }
    case OpKind::batch_norm: return BatchNormParams{j.value("eps", 1e-5)};
    default: return std::monostate{};
  }
}

}  // namespace detail

/// Serialised file image: magic, u64 LE manifest length, manifest, blob.
/// Tensors are laid out in node order, then tensor-name order, with no gaps.
inline std::string serialize(const engine::NetworkGraph& g) {
  using detail::json;
  std::string blob;
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json jn = {{"id", n.id}, {"op", std::string(engine::to_string(n.kind))}, {"inputs", n.inputs}};
    if (!n.stage.empty()) jn["stage"] = n.stage;
    jn["params"] = detail::params_to_json(n);
    json tensors = json::object();
    for (const auto& [name, t] : n.tensors) {
      const std::size_t nbytes = t.values.size() * sizeof(float);
      tensors[name] = {{"shape", t.shape}, {"offset", blob.size()}, {"nbytes", nbytes}};
      blob.append(reinterpret_cast<const char*>(t.values.data()), nbytes);
    }
    jn["tensors"] = std::move(tensors);
    nodes.push_back(std::move(jn));
  }
  const auto& pre = g.preprocessing;
  json manifest = {
      {"format_version", kFormatVersion},
      {"name", g.name},
      {"input", {{"channels", g.input.c}, {"height", g.input.h}, {"width", g.input.w}}},
      {"preprocessing",
       {{"mean", pre.mean}, {"scale", pre.scale}, {"channel_order", pre.reverse_channels ? "bgr" : "rgb"}}},
      {"nodes", std::move(nodes)},
      {"default_taps", g.default_taps},
      {"blob", {{"nbytes", blob.size()}, {"sha256", sha256_hex(blob)}}},
  };
  const std::string text = manifest.dump();
  std::string out(kMagic, sizeof kMagic);
  std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out += text;
  out += blob;
  return out;
}

inline engine::NetworkGraph deserialize(std::string_view bytes) {
  using detail::json;
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kMagic, 4) == 0)
      throw NwfError(ErrorKind::bad_version, "unsupported format tag '" + std::string(bytes.substr(0, 8)) + "'");
    throw NwfError(ErrorKind::bad_magic, "not an NWF file");
  }
  if (bytes.size() < 16) throw NwfError(ErrorKind::malformed, "missing manifest length");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof len);
  if (len > bytes.size() - 16) throw NwfError(ErrorKind::malformed, "manifest length exceeds file size");
  const std::string_view blob = bytes.substr(16 + len);

  json m;
  try {
    m = json::parse(bytes.substr(16, len));
  } catch (const json::exception& e) {
    throw NwfError(ErrorKind::malformed, std::string("manifest is not valid JSON: ") + e.what());
  }

  engine::NetworkGraph g;
  std::string current;
  try {
    if (m.at("format_version").get<int>() != kFormatVersion)
      throw NwfError(ErrorKind::bad_version, "format_version " + m.at("format_version").dump());
    const std::uint64_t declared = m.at("blob").at("nbytes").get<std::uint64_t>();
    if (blob.size() != declared || sha256_hex(blob) != m.at("blob").at("sha256").get<std::string>())
      throw NwfError(ErrorKind::digest_mismatch, "blob has " + std::to_string(blob.size()) + " bytes, manifest declares " +
                                                     std::to_string(declared) + " with a different digest");

    g.name = m.value("name", std::string{});
    const json& in = m.at("input");
    g.input = {in.at("channels").get<int>(), in.at("height").get<int>(), in.at("width").get<int>()};
    if (m.contains("preprocessing")) {
      const json& p = m.at("preprocessing");
      g.preprocessing.mean = p.value("mean", std::vector<double>{});
      g.preprocessing.scale = p.value("scale", 1.0);
      const auto order = p.value("channel_order", std::string("rgb"));
      if (order != "rgb" && order != "bgr") throw NwfError(ErrorKind::malformed, "channel_order must be rgb or bgr");
      g.preprocessing.reverse_channels = order == "bgr";
    }

    std::vector<std::pair<std::uint64_t, std::uint64_t>> extents;  // (offset, nbytes)
    for (const json& jn : m.at("nodes")) {
      engine::Node n;
      n.id = jn.at("id").get<std::string>();
      current = n.id;
      const auto op = jn.at("op").get<std::string>();
      const auto kind = engine::parse_op_kind(op);
      if (!kind) throw NwfError(ErrorKind::unsupported_op, "op kind '" + op + "' is not supported", n.id);
      n.kind = *kind;
      n.inputs = jn.value("inputs", std::vector<std::string>{});
      n.stage = jn.value("stage", std::string{});
      n.params = detail::params_from_json(n.kind, jn.value("params", json::object()));
      const json tensors = jn.value("tensors", json::object());
      for (const auto& [name, jt] : tensors.items()) {
        engine::WeightTensor t;
        t.shape = jt.at("shape").get<std::vector<int>>();
        const auto offset = jt.at("offset").get<std::uint64_t>();
        const auto nbytes = jt.at("nbytes").get<std::uint64_t>();
        if (nbytes % sizeof(float) != 0 || offset % sizeof(float) != 0 || offset > blob.size() ||
            nbytes > blob.size() - offset)
          throw NwfError(ErrorKind::malformed, "tensor '" + name + "' lies outside the blob", n.id);
        if (t.expected_size() * sizeof(float) != nbytes)
          throw NwfError(ErrorKind::shape_mismatch, "tensor '" + name + "' shape disagrees with its byte count", n.id);
        t.values.resize(nbytes / sizeof(float));
        std::memcpy(t.values.data(), blob.data() + offset, nbytes);
        extents.emplace_back(offset, nbytes);
        n.tensors.emplace(name, std::move(t));
      }
      g.nodes.push_back(std::move(n));
    }
    current.clear();
    // Tensors must partition the blob: no overlap, no gaps, no trailing bytes.
    std::ranges::sort(extents);
    std::uint64_t end = 0;
    for (const auto& [offset, nbytes] : extents) {
      if (offset != end) throw NwfError(ErrorKind::malformed, "tensor extents overlap or leave gaps");
      end += nbytes;
    }
    if (end != blob.size()) throw NwfError(ErrorKind::malformed, "trailing bytes in blob");
    g.default_taps = m.value("default_taps", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw NwfError(ErrorKind::malformed, e.what(), current);
  } catch (const std::invalid_argument& e) {
    throw NwfError(ErrorKind::malformed, e.what(), current);
  }

  try {
    g.validate();
  } catch (const engine::ShapeError& e) {
    throw NwfError(ErrorKind::shape_mismatch, e.what(), e.node());
  } catch (const ValidationError& e) {
    throw NwfError(ErrorKind::shape_mismatch, e.what());
  }
  return g;
}

inline engine::NetworkGraph load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NwfError(ErrorKind::io, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

inline void save(const engine::NetworkGraph& g, const std::filesystem::path& path) {
  const std::string bytes = serialize(g);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !f.write(bytes.data(), static_cast<std::streamsize>(bytes.size())))
    throw Error("cannot write " + path.string());
}

}  // namespace pcorr::nwf
