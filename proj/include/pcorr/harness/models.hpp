#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>

#include "pcorr/core/error.hpp"
#include "pcorr/core/sha256.hpp"
#include "pcorr/engine/graph.hpp"
#include "pcorr/engine/nwf.hpp"
#include "pcorr/engine/scramble.hpp"
#include "pcorr/filterbank/gabor.hpp"
#include "pcorr/filterbank/pyramid.hpp"

namespace pcorr::harness {

/// Environment variable naming the directory for cached built-in banks.
inline constexpr const char* kCacheEnv = "PCORR_CACHE_DIR";

/// Model selector: "builtin:gabor", "builtin:gabor-desk", "builtin:pyramid",
/// or a path to an NWF v1 file.
struct ModelSpec {
  std::string source;
  int input_size = 224;  ///< built-ins only; NWF files fix their own input
  int channels = 1;      ///< built-ins only
  std::optional<std::uint64_t> scramble_seed;
};

struct LoadedModel {
  engine::NetworkGraph graph;
  std::string id;  ///< stable identifier written to every metric row
};

/// Reduced Gabor bank for desk-scale runs: sigmas 1, 2, 4 sampled every 8 px.
inline filterbank::GaborParams gabor_desk_params(int size, int channels) {
  filterbank::GaborParams p;
  p.sigmas = {1, 2, 4};
  p.stride = 8;
  p.width = p.height = size;
  p.channels = channels;
  return p;
}

inline std::optional<std::filesystem::path> cache_dir() {
  const char* v = std::getenv(kCacheEnv);
  if (!v || !*v) return std::nullopt;
  return std::filesystem::path(v);
}

namespace detail {

inline std::string file_digest(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ValidationError("cannot open model " + p.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

/// Builds a bank, or reloads it from the cache directory when present.
/// The cache key is the builtin id, so a stale entry can only come from a
/// changed builder; delete the directory after upgrading.
template <typename Build>
engine::NetworkGraph cached_builtin(const std::string& key, Build build) {
  const auto dir = cache_dir();
  if (!dir) return build();
  const auto path = *dir / (sha256_hex(key).substr(0, 16) + ".nwf");
  if (std::filesystem::exists(path)) return nwf::load(path);
  auto g = build();
  std::filesystem::create_directories(*dir);
  const auto tmp = path.string() + ".tmp";
  nwf::save(g, tmp);
  std::filesystem::rename(tmp, path);
  return g;
}

}  // namespace detail

inline LoadedModel load_model(const ModelSpec& spec) {
  LoadedModel m;
  constexpr std::string_view prefix = "builtin:";
  if (spec.source.starts_with(prefix)) {
    const std::string kind = spec.source.substr(prefix.size());
    if (spec.input_size < 8) throw ValidationError("input size must be >= 8");
    if (spec.channels != 1 && spec.channels != 3) throw ValidationError("channels must be 1 or 3");
    m.id = spec.source + "@" + std::to_string(spec.input_size) + "x" + std::to_string(spec.channels);
    if (kind == "gabor") {
      m.graph = detail::cached_builtin(m.id, [&] {
        filterbank::GaborParams p;
        p.width = p.height = spec.input_size;
        p.channels = spec.channels;
        return filterbank::build_gabor_bank(p);
      });
    } else if (kind == "gabor-desk") {
      m.graph = detail::cached_builtin(
          m.id, [&] { return filterbank::build_gabor_bank(gabor_desk_params(spec.input_size, spec.channels)); });
    } else if (kind == "pyramid") {
      m.graph = detail::cached_builtin(m.id, [&] {
        filterbank::PyramidParams p;
        p.width = p.height = spec.input_size;
        p.channels = spec.channels;
        return filterbank::build_pyramid_bank(p);
      });
    } else {
      throw ValidationError("unknown builtin model '" + kind + "' (gabor, gabor-desk, pyramid)");
    }
  } else {
    const std::filesystem::path path(spec.source);
    m.graph = nwf::load(path);
    m.id = path.stem().string() + "@" + detail::file_digest(path).substr(0, 16);
  }
  if (spec.scramble_seed) {
    m.graph = engine::scramble_weights(std::move(m.graph), *spec.scramble_seed);
    m.id += "+scrambled" + std::to_string(*spec.scramble_seed);
  }
  return m;
}

}  // namespace pcorr::harness
