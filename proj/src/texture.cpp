#include "endo/texture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "endo/rng.hpp"

namespace endo {
namespace {

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Value noise on a lattice of `cell` pixels, values in [-1, 1].
std::vector<double> value_noise(std::size_t w, std::size_t h, double cell, Rng& rng) {
  const std::size_t gw = static_cast<std::size_t>(std::ceil(w / cell)) + 2;
  const std::size_t gh = static_cast<std::size_t>(std::ceil(h / cell)) + 2;
  std::vector<double> lattice(gw * gh);
  for (auto& v : lattice) v = rng.uniform(-1.0, 1.0);
  const double ox = rng.uniform(0.0, cell), oy = rng.uniform(0.0, cell);
  std::vector<double> out(w * h);
  for (std::size_t y = 0; y < h; ++y) {
    const double fy = (static_cast<double>(y) + oy) / cell;
    const std::size_t iy = static_cast<std::size_t>(fy);
    const double ty = smoothstep(fy - iy);
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = (static_cast<double>(x) + ox) / cell;
      const std::size_t ix = static_cast<std::size_t>(fx);
      const double tx = smoothstep(fx - ix);
      const double a = lattice[iy * gw + ix], b = lattice[iy * gw + ix + 1];
      const double c = lattice[(iy + 1) * gw + ix], d = lattice[(iy + 1) * gw + ix + 1];
      out[y * w + x] = (a + (b - a) * tx) + ((c + (d - c) * tx) - (a + (b - a) * tx)) * ty;
    }
  }
  return out;
}

void draw_streak(std::vector<double>& mask, std::size_t w, std::size_t h, const TextureParams& p,
                 Rng& rng) {
  double x = rng.uniform(0.0, static_cast<double>(w));
  double y = rng.uniform(0.0, static_cast<double>(h));
  double heading = rng.uniform(0.0, 2 * std::numbers::pi);
  double turn = 0.0;
  const double length = rng.uniform(p.min_streak_length, p.max_streak_length);
  const double sigma = p.streak_width;
  const int reach = static_cast<int>(std::ceil(3.0 * sigma));
  for (double travelled = 0.0; travelled < length; travelled += 0.5) {
    turn = 0.85 * turn + rng.uniform(-0.08, 0.08);
    heading += turn;
    x += 0.5 * std::cos(heading);
    y += 0.5 * std::sin(heading);
    const int cx = static_cast<int>(std::lround(x)), cy = static_cast<int>(std::lround(y));
    for (int dy = -reach; dy <= reach; ++dy) {
      for (int dx = -reach; dx <= reach; ++dx) {
        const int px = cx + dx, py = cy + dy;
        if (px < 0 || py < 0 || px >= static_cast<int>(w) || py >= static_cast<int>(h)) continue;
        const double ddx = px - x, ddy = py - y;
        const double v = std::exp(-(ddx * ddx + ddy * ddy) / (2.0 * sigma * sigma));
        double& m = mask[static_cast<std::size_t>(py) * w + px];
        m = std::max(m, v);
      }
    }
  }
}

}  // namespace

Image texture_field(std::size_t width, std::size_t height, std::uint64_t seed,
                    const TextureParams& params) {
  Rng rng = Rng(seed).split("texture");
  Rng noise_rng = rng.split("noise");
  Rng streak_rng = rng.split("streaks");
  const auto fine = value_noise(width, height, params.fine_cell, noise_rng);
  const auto coarse = value_noise(width, height, params.coarse_cell, noise_rng);

  std::vector<double> noise(width * height);
  double mean = 0.0;
  for (std::size_t i = 0; i < noise.size(); ++i) {
    noise[i] = 0.65 * fine[i] + 0.35 * coarse[i];
    mean += noise[i];
  }
  mean /= static_cast<double>(std::max<std::size_t>(noise.size(), 1));
  double peak = 1e-12;
  for (auto& v : noise) {
    v -= mean;
    peak = std::max(peak, std::abs(v));
  }

  std::vector<double> mask(width * height, 0.0);
  for (int s = 0; s < params.streaks; ++s) draw_streak(mask, width, height, params, streak_rng);

  Image field(width, height);
  for (std::size_t i = 0; i < noise.size(); ++i) {
    field.pixels[i] = std::clamp(params.noise_weight * noise[i] / peak - mask[i], -1.0, 1.0);
  }
  return field;
}

Image apply_texture(const Image& image, std::uint64_t seed, double strength,
                    const TextureParams& params) {
  if (!(strength >= 0.0 && strength <= 1.0)) throw std::invalid_argument("texture strength must be in [0,1]");
  if (strength == 0.0) return image;
  const Image t = texture_field(image.width, image.height, seed, params);
  Image out = image;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.pixels[i] = std::clamp(image.pixels[i] * (1.0 + strength * t.pixels[i]), 0.0, 1.0);
  }
  return out;
}

}  // namespace endo
