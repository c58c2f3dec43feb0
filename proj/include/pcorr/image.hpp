#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/core/numeric.hpp"

namespace pcorr {

/// Axis-aligned pixel rectangle [x, x+width) x [y, y+height).
struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool empty() const { return width <= 0 || height <= 0; }
  long area() const { return empty() ? 0 : static_cast<long>(width) * height; }
  bool inside(int image_width, int image_height) const {
    return x >= 0 && y >= 0 && x + width <= image_width && y + height <= image_height;
  }
  bool operator==(const Rect&) const = default;
};

/// Centered square with half the shorter image side.
inline Rect centered_square(int width, int height) {
  const int side = std::max(1, std::min(width, height) / 2);
  return Rect{(width - side) / 2, (height - side) / 2, side, side};
}

/// Single-channel or RGB raster; nominal pixel range [0, 255].
/// Storage is planar: channel-major, then row-major within a channel.
class ImagePlane {
 public:
  ImagePlane() = default;
  ImagePlane(int width, int height, int channels = 1, double fill = 0.0)
      : width_(width), height_(height), channels_(channels) {
    if (width < 1 || height < 1) throw ValidationError("image dimensions must be >= 1");
    if (channels != 1 && channels != 3) throw ValidationError("image must have 1 or 3 channels");
    pixels_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(width_) * height_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  double& at(int c, int y, int x) { return pixels_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return pixels_[index(c, y, x)]; }
  double& at(int y, int x) { return at(0, y, x); }
  double at(int y, int x) const { return at(0, y, x); }

  std::span<double> plane(int c) { return {pixels_.data() + c * plane_size(), plane_size()}; }
  std::span<const double> plane(int c) const {
    return {pixels_.data() + c * plane_size(), plane_size()};
  }

  std::vector<double>& data() { return pixels_; }
  const std::vector<double>& data() const { return pixels_; }

  bool all_finite() const { return pcorr::all_finite(pixels_); }

  bool operator==(const ImagePlane&) const = default;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> pixels_;
};

/// Mean over all channels of the pixels inside `region`.
inline double region_mean(const ImagePlane& image, const Rect& region) {
  if (region.empty() || !region.inside(image.width(), image.height()))
    throw ValidationError("region is empty or outside the image");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(region.area()) * image.channels());
  for (int c = 0; c < image.channels(); ++c)
    for (int y = region.y; y < region.y + region.height; ++y)
      for (int x = region.x; x < region.x + region.width; ++x) values.push_back(image.at(c, y, x));
  return mean_of(values);
}

/// Gray -> RGB replicates; RGB -> gray averages the channels.
inline ImagePlane convert_channels(const ImagePlane& image, int channels) {
  if (image.channels() == channels) return image;
  ImagePlane out(image.width(), image.height(), channels);
  if (channels == 3) {
    for (int c = 0; c < 3; ++c) std::ranges::copy(image.plane(0), out.plane(c).begin());
  } else {
    auto dst = out.plane(0);
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] = (image.plane(0)[i] + image.plane(1)[i] + image.plane(2)[i]) / 3.0;
  }
  return out;
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
inline ImagePlane resize_bilinear(const ImagePlane& src, int width, int height) {
  ImagePlane out(width, height, src.channels());
  const double sx = static_cast<double>(src.width()) / width;
  const double sy = static_cast<double>(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < src.channels(); ++c) {
        const double top = src.at(c, y0, x0) * (1 - wx) + src.at(c, y0, x1) * wx;
        const double bottom = src.at(c, y1, x0) * (1 - wx) + src.at(c, y1, x1) * wx;
        out.at(c, y, x) = top * (1 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

/// Pastes `src` centered onto a canvas filled with `fill`. Returns the
/// canvas and writes the paste offset to `offset_x`/`offset_y`.
inline ImagePlane place_centered(const ImagePlane& src, int width, int height, double fill,
                                 int* offset_x = nullptr, int* offset_y = nullptr) {
  ImagePlane out(width, height, src.channels(), fill);
  const int ox = (width - src.width()) / 2;
  const int oy = (height - src.height()) / 2;
  for (int c = 0; c < src.channels(); ++c)
    for (int y = 0; y < src.height(); ++y) {
      const int ty = y + oy;
      if (ty < 0 || ty >= height) continue;
      for (int x = 0; x < src.width(); ++x) {
        const int tx = x + ox;
        if (tx < 0 || tx >= width) continue;
        out.at(c, ty, tx) = src.at(c, y, x);
      }
    }
  if (offset_x) *offset_x = ox;
  if (offset_y) *offset_y = oy;
  return out;
}

}  // namespace pcorr
