#include "endo/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace endo {

namespace fs = std::filesystem;

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw std::invalid_argument("unknown split '" + s + "'");
}

std::array<std::size_t, 3> split_counts(std::size_t n) {
  const auto train = static_cast<std::size_t>(std::llround(0.55 * static_cast<double>(n)));
  auto val = static_cast<std::size_t>(std::llround(0.40 * static_cast<double>(n)));
  if (train + val > n) val = n - train;
  return {train, val, n - train - val};
}

std::vector<ManifestEntry> Manifest::with_split(Split s) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(e);
  return out;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write manifest " + path.string());
  for (const auto& e : manifest.entries) {
    os << e.index << '\t' << e.image.generic_string() << '\t' << e.depth.generic_string() << '\t'
       << e.seed << '\t' << split_name(e.split) << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 5) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 5 fields");
    }
    ManifestEntry e;
    e.index = std::stoull(fields[0]);
    e.image = fields[1];
    e.depth = fields[2];
    e.seed = std::stoull(fields[3]);
    e.split = parse_split(fields[4]);
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::uint64_t item_seed(std::uint64_t dataset_seed, std::size_t index) {
  return mix64(dataset_seed ^ mix64(static_cast<std::uint64_t>(index) + 1));
}

RenderedPair render_item(std::uint64_t seed, const DatasetConfig& config) {
  const Scene scene = make_scene(seed, config.scene);
  Rng rng = Rng(seed).split("view");
  const EndoscopeCamera camera = sample_camera(scene, config.view, rng);
  const LightRig rig = sample_lights(config.view, rng);
  RenderedPair pair = render_view(scene, camera, rig, config.render);
  pair.seed = seed;
  return pair;
}

Manifest generate_dataset(std::size_t n, std::uint64_t seed, const fs::path& out_dir,
                          const DatasetConfig& config) {
  if (n < 1) throw std::invalid_argument("dataset size must be >= 1");
  fs::create_directories(out_dir);
  if (config.textured) fs::create_directories(out_dir / "clean");

  std::vector<fs::path> written;
  try {
    Manifest manifest, clean;
    manifest.base_dir = clean.base_dir = out_dir;
    const auto counts = split_counts(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Split split = i < counts[0] ? Split::Train : (i < counts[0] + counts[1] ? Split::Val : Split::Test);
      const std::uint64_t s = item_seed(seed, i);
      const RenderedPair pair = render_item(s, config);

      char stem[32];
      std::snprintf(stem, sizeof stem, "%05zu", i);
      const fs::path image_rel = fs::path("img_" + std::string(stem) + ".pgm");
      const fs::path depth_rel = fs::path("depth_" + std::string(stem) + ".dpth");

      write_depth(out_dir / depth_rel, pair.depth);
      written.push_back(out_dir / depth_rel);
      if (config.textured) {
        const fs::path clean_rel = fs::path("clean") / image_rel;
        write_pgm(out_dir / clean_rel, pair.image);
        written.push_back(out_dir / clean_rel);
        clean.entries.push_back({i, clean_rel, depth_rel, s, split});
        write_pgm(out_dir / image_rel,
                  apply_texture(pair.image, mix64(s ^ hash_tag("texture")), config.texture_strength,
                                config.texture));
      } else {
        write_pgm(out_dir / image_rel, pair.image);
      }
      written.push_back(out_dir / image_rel);
      manifest.entries.push_back({i, image_rel, depth_rel, s, split});
    }
    write_manifest(out_dir / kManifestName, manifest);
    written.push_back(out_dir / kManifestName);
    if (config.textured) {
      write_manifest(out_dir / kCleanManifestName, clean);
      written.push_back(out_dir / kCleanManifestName);
    }
    return manifest;
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
}

}  // namespace endo
