#include "endo/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

namespace endo {

void SlicParams::validate() const {
  if (p_target < 2) throw std::invalid_argument("p_target must be >= 2");
  if (!(compactness > 0.0)) throw std::invalid_argument("compactness must be > 0");
  if (iterations < 1) throw std::invalid_argument("slic iterations must be >= 1");
}

void GraphParams::validate() const {
  if (!(gamma1 > 0.0)) throw std::invalid_argument("gamma1 must be > 0");
  if (!(gamma2 > 0.0)) throw std::invalid_argument("gamma2 must be > 0");
  if (histogram_bins < 1) throw std::invalid_argument("histogram_bins must be >= 1");
}

namespace {

void compute_centroids(const Image& image, SuperpixelMap& m) {
  m.centroids.assign(static_cast<std::size_t>(m.count), {});
  std::vector<double> n(static_cast<std::size_t>(m.count), 0.0);
  for (std::size_t y = 0; y < m.height; ++y)
    for (std::size_t x = 0; x < m.width; ++x) {
      const std::size_t idx = y * m.width + x;
      auto& c = m.centroids[static_cast<std::size_t>(m.labels[idx])];
      c.x += static_cast<double>(x);
      c.y += static_cast<double>(y);
      c.intensity += image.pixels[idx];
      n[static_cast<std::size_t>(m.labels[idx])] += 1.0;
    }
  for (std::size_t k = 0; k < n.size(); ++k) {
    m.centroids[k].x /= n[k];
    m.centroids[k].y /= n[k];
    m.centroids[k].intensity /= n[k];
  }
}

// Relabels 4-connected components in scan order; components smaller than
// min_size join the label of an already-visited neighbor of their first pixel.
void enforce_connectivity(SuperpixelMap& m, std::size_t min_size) {
  const long W = static_cast<long>(m.width), H = static_cast<long>(m.height);
  std::vector<int> fresh(m.labels.size(), -1);
  std::vector<long> stack, component;
  int next = 0;
  const long dx[4] = {-1, 0, 1, 0}, dy[4] = {0, -1, 0, 1};
  for (long start = 0; start < W * H; ++start) {
    if (fresh[static_cast<std::size_t>(start)] >= 0) continue;
    const long sx = start % W, sy = start / W;
    int adjacent = -1;
    for (int k = 0; k < 4; ++k) {
      const long nx = sx + dx[k], ny = sy + dy[k];
      if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
      if (fresh[static_cast<std::size_t>(ny * W + nx)] >= 0) adjacent = fresh[static_cast<std::size_t>(ny * W + nx)];
    }
    const int old = m.labels[static_cast<std::size_t>(start)];
    component.clear();
    stack.assign(1, start);
    fresh[static_cast<std::size_t>(start)] = next;
    while (!stack.empty()) {
      const long p = stack.back();
      stack.pop_back();
      component.push_back(p);
      for (int k = 0; k < 4; ++k) {
        const long nx = p % W + dx[k], ny = p / W + dy[k];
        if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
        const auto q = static_cast<std::size_t>(ny * W + nx);
        if (fresh[q] >= 0 || m.labels[q] != old) continue;
        fresh[q] = next;
        stack.push_back(ny * W + nx);
      }
    }
    if (component.size() < min_size && adjacent >= 0) {
      for (long p : component) fresh[static_cast<std::size_t>(p)] = adjacent;
    } else {
      ++next;
    }
  }
  m.labels = std::move(fresh);
  m.count = next;
}

}  // namespace

SuperpixelMap slic_segment(const Image& image, const SlicParams& params) {
  params.validate();
  const std::size_t W = image.width, H = image.height, N = W * H;
  if (N == 0) throw std::invalid_argument("slic_segment: empty image");
  if (static_cast<std::size_t>(params.p_target) > N) {
    throw std::invalid_argument("p_target " + std::to_string(params.p_target) + " exceeds pixel count " +
                                std::to_string(N));
  }
  const double p = params.p_target;
  const int ny = std::max(1, static_cast<int>(std::lround(std::sqrt(p * H / W))));
  const int nx = std::max(1, static_cast<int>(std::lround(p / ny)));
  const double S = std::sqrt(static_cast<double>(N) / p);
  const double sw = static_cast<double>(W) / nx, sh = static_cast<double>(H) / ny;

  std::vector<Centroid> centers;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double cx = (i + 0.5) * sw, cy = (j + 0.5) * sh;
      const auto px = std::min(W - 1, static_cast<std::size_t>(cx));
      const auto py = std::min(H - 1, static_cast<std::size_t>(cy));
      centers.push_back({cx - 0.5, cy - 0.5, image.pixels[py * W + px]});
    }

  SuperpixelMap m;
  m.width = W;
  m.height = H;
  m.labels.assign(N, 0);
  std::vector<double> best(N);
  const double spatial = params.compactness / S;
  const long reach = static_cast<long>(std::ceil(std::max({S, sw, sh})));
  for (int it = 0; it < params.iterations; ++it) {
    std::fill(best.begin(), best.end(), INFINITY);
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const Centroid& c = centers[k];
      const long x0 = std::max(0L, static_cast<long>(c.x) - reach);
      const long x1 = std::min(static_cast<long>(W) - 1, static_cast<long>(c.x) + reach);
      const long y0 = std::max(0L, static_cast<long>(c.y) - reach);
      const long y1 = std::min(static_cast<long>(H) - 1, static_cast<long>(c.y) + reach);
      for (long y = y0; y <= y1; ++y)
        for (long x = x0; x <= x1; ++x) {
          const std::size_t idx = static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x);
          const double di = image.pixels[idx] - c.intensity;
          const double ddx = x - c.x, ddy = y - c.y;
          const double d = di * di + spatial * spatial * (ddx * ddx + ddy * ddy);
          if (d < best[idx]) {
            best[idx] = d;
            m.labels[idx] = static_cast<int>(k);
          }
        }
    }
    std::vector<Centroid> sum(centers.size());
    std::vector<double> n(centers.size(), 0.0);
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const std::size_t idx = y * W + x;
        const auto k = static_cast<std::size_t>(m.labels[idx]);
        sum[k].x += static_cast<double>(x);
        sum[k].y += static_cast<double>(y);
        sum[k].intensity += image.pixels[idx];
        n[k] += 1.0;
      }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (n[k] == 0.0) continue;  // empty cluster keeps its position
      centers[k] = {sum[k].x / n[k], sum[k].y / n[k], sum[k].intensity / n[k]};
    }
  }

  enforce_connectivity(m, std::max<std::size_t>(1, static_cast<std::size_t>(static_cast<double>(N) / p / 4.0)));
  compute_centroids(image, m);
  return m;
}

SimilarityGraph build_graph(const Image& image, const SuperpixelMap& spmap, const GraphParams& params) {
  params.validate();
  if (image.width != spmap.width || image.height != spmap.height) {
    throw std::invalid_argument("build_graph: superpixel map is " + std::to_string(spmap.width) + "x" +
                                std::to_string(spmap.height) + " but image is " + std::to_string(image.width) +
                                "x" + std::to_string(image.height));
  }
  const auto P = static_cast<std::size_t>(spmap.count);
  const auto B = static_cast<std::size_t>(params.histogram_bins);
  std::vector<double> mean(P, 0.0), count(P, 0.0), hist(P * B, 0.0);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const auto l = static_cast<std::size_t>(spmap.labels[i]);
    const double v = std::clamp(image.pixels[i], 0.0, 1.0);
    mean[l] += v;
    count[l] += 1.0;
    hist[l * B + std::min(B - 1, static_cast<std::size_t>(v * static_cast<double>(B)))] += 1.0;
  }
  for (std::size_t l = 0; l < P; ++l) {
    if (count[l] == 0.0) continue;
    mean[l] /= count[l];
    for (std::size_t b = 0; b < B; ++b) hist[l * B + b] /= count[l];
  }

  std::set<std::pair<int, int>> pairs;
  const std::size_t W = spmap.width, H = spmap.height;
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const int a = spmap.labels[y * W + x];
      if (x + 1 < W && spmap.labels[y * W + x + 1] != a) {
        pairs.emplace(std::minmax(a, spmap.labels[y * W + x + 1]));
      }
      if (y + 1 < H && spmap.labels[(y + 1) * W + x] != a) {
        pairs.emplace(std::minmax(a, spmap.labels[(y + 1) * W + x]));
      }
    }

  SimilarityGraph g;
  g.nodes = spmap.count;
  for (const auto& [i, j] : pairs) {
    double h2 = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double d = hist[static_cast<std::size_t>(i) * B + b] - hist[static_cast<std::size_t>(j) * B + b];
      h2 += d * d;
    }
    GraphEdge e;
    e.i = i;
    e.j = j;
    e.s[0] = std::exp(-params.gamma1 * std::abs(mean[static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(j)]));
    e.s[1] = std::exp(-params.gamma2 * std::sqrt(h2));
    g.edges.push_back(e);
  }
  return g;
}

bool is_connected(const SimilarityGraph& graph) {
  if (graph.nodes <= 1) return true;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(graph.nodes));
  for (const auto& e : graph.edges) {
    adj[static_cast<std::size_t>(e.i)].push_back(e.j);
    adj[static_cast<std::size_t>(e.j)].push_back(e.i);
  }
  std::vector<bool> seen(adj.size(), false);
  std::vector<int> stack{0};
  seen[0] = true;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const int a = stack.back();
    stack.pop_back();
    for (int b : adj[static_cast<std::size_t>(a)]) {
      if (seen[static_cast<std::size_t>(b)]) continue;
      seen[static_cast<std::size_t>(b)] = true;
      ++reached;
      stack.push_back(b);
    }
  }
  return reached == adj.size();
}

SimilarityGraph induced_subgraph(const SimilarityGraph& graph, const std::vector<bool>& keep,
                                 std::vector<int>* old_to_new) {
  if (keep.size() != static_cast<std::size_t>(graph.nodes)) {
    throw std::invalid_argument("induced_subgraph: mask size does not match node count");
  }
  std::vector<int> map(keep.size(), -1);
  SimilarityGraph out;
  for (std::size_t i = 0; i < keep.size(); ++i)
    if (keep[i]) map[i] = out.nodes++;
  for (const auto& e : graph.edges) {
    const int a = map[static_cast<std::size_t>(e.i)], b = map[static_cast<std::size_t>(e.j)];
    if (a >= 0 && b >= 0) out.edges.push_back({a, b, e.s});
  }
  if (old_to_new) *old_to_new = std::move(map);
  return out;
}

SuperpixelDepth pool_depth(const DepthMap& depth, const SuperpixelMap& spmap) {
  if (depth.width != spmap.width || depth.height != spmap.height) {
    throw std::invalid_argument("pool_depth: depth and superpixel map dimensions differ");
  }
  const auto P = static_cast<std::size_t>(spmap.count);
  std::vector<double> sum(P, 0.0), n(P, 0.0);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double v = depth.values[i];
    if (!std::isfinite(v)) continue;
    if (v < 0.0) throw std::invalid_argument("pool_depth: negative depth");
    sum[static_cast<std::size_t>(spmap.labels[i])] += v;
    n[static_cast<std::size_t>(spmap.labels[i])] += 1.0;
  }
  SuperpixelDepth out;
  out.y.assign(P, 0.0);
  out.valid.assign(P, false);
  bool any = false;
  for (std::size_t l = 0; l < P; ++l) {
    if (n[l] == 0.0) continue;
    out.y[l] = sum[l] / n[l];
    out.valid[l] = true;
    any = true;
  }
  if (!any) throw std::invalid_argument("pool_depth: frame has no finite depth");
  return out;
}

DepthMap broadcast_depth(const std::vector<double>& y, const std::vector<bool>& valid, const SuperpixelMap& spmap) {
  if (y.size() != static_cast<std::size_t>(spmap.count) || valid.size() != y.size()) {
    throw std::invalid_argument("broadcast_depth: expected " + std::to_string(spmap.count) + " values, got " +
                                std::to_string(y.size()));
  }
  DepthMap d(spmap.width, spmap.height);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto l = static_cast<std::size_t>(spmap.labels[i]);
    d.values[i] = valid[l] ? y[l] : kMissDepth;
  }
  return d;
}

void write_label_pgm(const std::filesystem::path& path, const SuperpixelMap& spmap) {
  write_pgm16(path, spmap.width, spmap.height, spmap.labels);
}

void write_graph_text(const std::filesystem::path& path, const SimilarityGraph& graph) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  char buf[96];
  for (const auto& e : graph.edges) {
    std::snprintf(buf, sizeof buf, "%d\t%d\t%.17g\t%.17g\n", e.i, e.j, e.s[0], e.s[1]);
    os << buf;
  }
}

}  // namespace endo
