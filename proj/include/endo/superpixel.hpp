#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "endo/image.hpp"

namespace endo {

struct Centroid {
  double x = 0.0, y = 0.0, intensity = 0.0;
};

// Over-segmentation: labels[y * width + x] in [0, count), each label's pixel
// set 4-connected and nonempty.
struct SuperpixelMap {
  std::size_t width = 0, height = 0;
  std::vector<int> labels;
  int count = 0;
  std::vector<Centroid> centroids;
};

struct SlicParams {
  int p_target = 64;
  // Weight of spatial distance (in grid-spacing units) against intensity
  // difference (in [0,1] units).
  double compactness = 0.2;
  int iterations = 10;

  void validate() const;
};

// SLIC-style k-means in (x, y, intensity) from a regular grid of seeds,
// followed by a connectivity pass that splits disconnected fragments and
// folds fragments below a quarter of the nominal area into an earlier
// neighbor.
SuperpixelMap slic_segment(const Image& image, const SlicParams& params);

inline constexpr int kSimilarityChannels = 2;

struct GraphEdge {
  int i = 0, j = 0;  // i < j
  std::array<double, kSimilarityChannels> s{};
};

struct SimilarityGraph {
  int nodes = 0;
  std::vector<GraphEdge> edges;  // sorted by (i, j), each unordered pair once
};

struct GraphParams {
  double gamma1 = 10.0;  // intensity-difference channel
  double gamma2 = 5.0;   // histogram channel
  int histogram_bins = 16;

  void validate() const;
};

// Edges between labels that share at least one 4-neighbor pixel pair;
// S1 = exp(-gamma1 |mu_i - mu_j|), S2 = exp(-gamma2 ||hist_i - hist_j||_2)
// with L1-normalized intensity histograms over [0,1].
SimilarityGraph build_graph(const Image& image, const SuperpixelMap& spmap, const GraphParams& params = {});

bool is_connected(const SimilarityGraph& graph);

// Subgraph on the nodes with keep[i] set, renumbered in order. old_to_new
// (if given) maps dropped nodes to -1.
SimilarityGraph induced_subgraph(const SimilarityGraph& graph, const std::vector<bool>& keep,
                                 std::vector<int>* old_to_new = nullptr);

struct SuperpixelDepth {
  std::vector<double> y;     // mean finite depth per label, 0 where dropped
  std::vector<bool> valid;   // false for labels with no finite depth pixel
};

SuperpixelDepth pool_depth(const DepthMap& depth, const SuperpixelMap& spmap);

// Paints per-label values back onto the raster; invalid labels become +inf.
DepthMap broadcast_depth(const std::vector<double>& y, const std::vector<bool>& valid,
                         const SuperpixelMap& spmap);

// Debug dumps: 16-bit label PGM and `i<TAB>j<TAB>S1<TAB>S2` lines.
void write_label_pgm(const std::filesystem::path& path, const SuperpixelMap& spmap);
void write_graph_text(const std::filesystem::path& path, const SimilarityGraph& graph);

}  // namespace endo
