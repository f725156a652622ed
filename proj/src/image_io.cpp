#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "endo/binary_io.hpp"
#include "endo/image.hpp"

namespace endo {

Tensor to_tensor(const Image& image) {
  return Tensor({image.height, image.width, 1}, image.pixels);
}

Image from_tensor(const Tensor& t) {
  if (t.rank() != 3 || t.dim(2) != 1) {
    throw ShapeError("image tensor must be HxWx1, got " + shape_str(t.shape()));
  }
  Image img(t.dim(1), t.dim(0));
  img.pixels = t.storage();
  return img;
}

void write_pgm(const std::filesystem::path& path, const Image& image) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::string bytes(image.size(), '\0');
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::clamp(image.pixels[i], 0.0, 1.0);
    bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

namespace {

// Reads the next whitespace-delimited header token, skipping comments.
std::string pnm_token(std::istream& is) {
  std::string tok;
  char c;
  while (is.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(is, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  if (pnm_token(is) != "P5") throw std::runtime_error("not a binary PGM: " + path.string());
  const std::size_t w = std::stoul(pnm_token(is));
  const std::size_t h = std::stoul(pnm_token(is));
  const unsigned long maxval = std::stoul(pnm_token(is));
  if (maxval == 0 || maxval > 65535) throw std::runtime_error("bad PGM maxval in " + path.string());
  Image img(w, h);
  const bool wide = maxval > 255;
  std::string bytes(w * h * (wide ? 2 : 1), '\0');
  if (!is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
    throw std::runtime_error("truncated PGM: " + path.string());
  }
  for (std::size_t i = 0; i < w * h; ++i) {
    unsigned v = wide ? (static_cast<unsigned char>(bytes[2 * i]) << 8) | static_cast<unsigned char>(bytes[2 * i + 1])
                      : static_cast<unsigned char>(bytes[i]);
    img.pixels[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return img;
}

void write_pgm16(const std::filesystem::path& path, std::size_t width, std::size_t height,
                 const std::vector<int>& values) {
  if (values.size() != width * height) throw std::invalid_argument("label raster size mismatch");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "P5\n" << width << ' ' << height << "\n65535\n";
  for (int v : values) {
    const unsigned u = static_cast<unsigned>(std::clamp(v, 0, 65535));
    os.put(static_cast<char>(u >> 8));
    os.put(static_cast<char>(u & 0xff));
  }
}

void write_depth(const std::filesystem::path& path, const DepthMap& depth) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write("DPTH", 4);
  le::put_u32(os, static_cast<std::uint32_t>(depth.width));
  le::put_u32(os, static_cast<std::uint32_t>(depth.height));
  for (double v : depth.values) le::put_f32(os, static_cast<float>(v));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

DepthMap read_depth(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "DPTH") {
    throw std::runtime_error("not a DPTH file: " + path.string());
  }
  const std::uint32_t w = le::get_u32(is);
  const std::uint32_t h = le::get_u32(is);
  DepthMap d(w, h);
  for (auto& v : d.values) v = le::get_f32(is);
  return d;
}

Image depth_visualization(const DepthMap& depth) {
  double lo = kMissDepth, hi = -kMissDepth;
  for (double v : depth.values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Image img(depth.width, depth.height);
  const double range = hi > lo ? hi - lo : 1.0;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double v = depth.values[i];
    img.pixels[i] = std::isfinite(v) ? (v - lo) / range : 0.0;
  }
  return img;
}

}  // namespace endo
