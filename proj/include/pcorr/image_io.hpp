#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/image.hpp"

namespace pcorr::io {

namespace detail {

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

inline std::string read_pnm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

/// Binary PGM (1 channel) or PPM (3 channels), 8 bits, values rounded and
/// clamped to [0, 255].
inline void write_pnm(const std::filesystem::path& path, const ImagePlane& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << (image.channels() == 1 ? "P5" : "P6") << '\n'
      << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<char> row(static_cast<std::size_t>(image.width()) * image.channels());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < image.channels(); ++c)
        row[static_cast<std::size_t>(x) * image.channels() + c] =
            static_cast<char>(detail::to_byte(image.at(c, y, x)));
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

inline ImagePlane read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  const std::string magic = detail::read_pnm_token(in);
  int channels;
  bool binary;
  if (magic == "P5") channels = 1, binary = true;
  else if (magic == "P6") channels = 3, binary = true;
  else if (magic == "P2") channels = 1, binary = false;
  else if (magic == "P3") channels = 3, binary = false;
  else throw ValidationError(path.string() + ": not a PGM/PPM file");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(detail::read_pnm_token(in));
    height = std::stoi(detail::read_pnm_token(in));
    maxval = std::stoi(detail::read_pnm_token(in));
  } catch (const std::exception&) {
    throw ValidationError(path.string() + ": malformed PNM header");
  }
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535)
    throw ValidationError(path.string() + ": malformed PNM header");
  ImagePlane image(width, height, channels);
  const double scale = 255.0 / maxval;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) {
        int v;
        if (binary) {
          if (maxval < 256) {
            v = in.get();
          } else {
            const int hi = in.get();
            v = (hi << 8) | in.get();
          }
        } else {
          in >> v;
        }
        if (!in) throw ValidationError(path.string() + ": truncated pixel data");
        image.at(c, y, x) = v * scale;
      }
  return image;
}

inline void write_png(const std::filesystem::path& path, const ImagePlane& image) {
  detail::FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw Error("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng initialisation failed");
  }
  std::vector<png_byte> row(static_cast<std::size_t>(image.width()) * image.channels());
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width(), image.height(), 8,
               image.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < image.channels(); ++c)
        row[static_cast<std::size_t>(x) * image.channels() + c] =
            detail::to_byte(image.at(c, y, x));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Reads 8/16-bit PNG; palette and alpha are stripped, gray+alpha becomes
/// gray, everything else RGB.
inline ImagePlane read_png(const std::filesystem::path& path) {
  detail::FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw ValidationError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("libpng initialisation failed");
  }
  std::vector<png_byte> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError(path.string() + ": malformed PNG");
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info) >= 3 ? 3 : 1;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  ImagePlane image(width, height, channels);
  const std::size_t stride = rowbytes / width;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) image.at(c, y, x) = rows[y][x * stride + c];
  return image;
}

/// Dispatches on the file signature.
inline ImagePlane read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  in.close();
  if (sig[0] == 0x89 && sig[1] == 'P' && sig[2] == 'N' && sig[3] == 'G') return read_png(path);
  if (sig[0] == 'P' && sig[1] >= '2' && sig[1] <= '6') return read_pnm(path);
  throw ValidationError(path.string() + ": unsupported image format (PNG/PGM/PPM expected)");
}

/// Picks PNG for a .png extension, PGM/PPM otherwise.
inline void write_image(const std::filesystem::path& path, const ImagePlane& image) {
  if (path.extension() == ".png") write_png(path, image);
  else write_pnm(path, image);
}

}  // namespace pcorr::io
