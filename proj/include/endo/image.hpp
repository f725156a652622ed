#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <vector>

#include "endo/tensor.hpp"

namespace endo {

inline constexpr double kMissDepth = std::numeric_limits<double>::infinity();

// Single-channel raster, row-major, values nominally in [0, 1].
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), pixels(w * h, fill) {}

  double& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  std::size_t size() const { return pixels.size(); }
  bool same_dims(const Image& o) const { return width == o.width && height == o.height; }
};

// Per-pixel depth in scene units; kMissDepth marks rays that hit nothing.
struct DepthMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;

  DepthMap() = default;
  DepthMap(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), values(w * h, fill) {}

  double& at(std::size_t x, std::size_t y) { return values[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
  std::size_t size() const { return values.size(); }
};

// HxWx1 tensor view of an image.
Tensor to_tensor(const Image& image);
Image from_tensor(const Tensor& t);

// 8-bit binary PGM (P5, maxval 255). Values are clamped to [0,1] and rounded.
void write_pgm(const std::filesystem::path& path, const Image& image);
Image read_pgm(const std::filesystem::path& path);

// 16-bit binary PGM (maxval 65535, big-endian samples) for label rasters.
void write_pgm16(const std::filesystem::path& path, std::size_t width, std::size_t height,
                 const std::vector<int>& values);

// "DPTH", u32 LE width, u32 LE height, then width*height f32 LE row-major.
void write_depth(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth(const std::filesystem::path& path);

// Finite depths min-max normalized into an 8-bit visualization; misses are 0.
Image depth_visualization(const DepthMap& depth);

}  // namespace endo
