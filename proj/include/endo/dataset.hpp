#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "endo/render.hpp"
#include "endo/texture.hpp"

namespace endo {

enum class Split { Train, Val, Test };

std::string split_name(Split s);
Split parse_split(const std::string& s);

// Train/val/test counts in the 55/40/5 proportion; test takes the remainder.
std::array<std::size_t, 3> split_counts(std::size_t n);

struct ManifestEntry {
  std::size_t index = 0;
  std::filesystem::path image;  // as written, relative to the manifest directory
  std::filesystem::path depth;
  std::uint64_t seed = 0;
  Split split = Split::Train;
};

// Text manifest, one `index\timage\tdepth\tseed\tsplit` record per line.
struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  std::filesystem::path image_path(const ManifestEntry& e) const { return resolve(e.image); }
  std::filesystem::path depth_path(const ManifestEntry& e) const { return resolve(e.depth); }
  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : base_dir / p;
  }
  std::vector<ManifestEntry> with_split(Split s) const;
  std::size_t size() const { return entries.size(); }
};

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

struct DatasetConfig {
  SceneParams scene;
  ViewParams view;
  RenderOptions render;
  bool textured = false;
  double texture_strength = 0.6;
  TextureParams texture;
};

inline constexpr char kManifestName[] = "manifest.tsv";
// Written next to a textured dataset: the untextured renders, same depths.
inline constexpr char kCleanManifestName[] = "clean.tsv";

std::uint64_t item_seed(std::uint64_t dataset_seed, std::size_t index);

// Renders one dataset item (untextured) from its seed.
RenderedPair render_item(std::uint64_t seed, const DatasetConfig& config);

// Renders n items into out_dir and writes the manifest (plus the clean
// manifest for textured sets). On failure every file written so far is
// removed before the error propagates.
Manifest generate_dataset(std::size_t n, std::uint64_t seed, const std::filesystem::path& out_dir,
                          const DatasetConfig& config);

}  // namespace endo
