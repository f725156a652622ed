#pragma once

#include <cstdint>

#include "endo/image.hpp"

namespace endo {

// Procedural "patient texture": band-limited value noise plus thin dark
// curvilinear streaks that look like superficial vessels.
struct TextureParams {
  double fine_cell = 2.0;     // pixels per lattice cell, fine octave
  double coarse_cell = 4.0;   // pixels per lattice cell, coarse octave
  double noise_weight = 1.0;  // peak magnitude of the noise part
  int streaks = 40;
  double streak_width = 1.2;  // Gaussian sigma in pixels
  double min_streak_length = 15.0;
  double max_streak_length = 50.0;
};

// Texture field T in [-1, 1], same size as the target image.
Image texture_field(std::size_t width, std::size_t height, std::uint64_t seed,
                    const TextureParams& params = {});

// clamp(image * (1 + strength * T(seed)), 0, 1); strength in [0, 1].
Image apply_texture(const Image& image, std::uint64_t seed, double strength,
                    const TextureParams& params = {});

}  // namespace endo
