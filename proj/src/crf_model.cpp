#include "endo/crf_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "endo/checkpoint.hpp"
#include "endo/layers.hpp"

namespace endo {

namespace {

constexpr double kSlope = nn::kResidualSlope;

enum Block : std::size_t { kC1W, kC1B, kC2W, kC2B, kC3W, kC3B, kF1W, kF1B, kF2W, kF2B, kF3W, kF3B, kBeta };

template <class Leaf>
Var unary_forward(Graph& g, const Tensor& image, const SuperpixelMap& spmap, Leaf leaf) {
  if (image.rank() != 3 || image.dim(0) != spmap.height || image.dim(1) != spmap.width || image.dim(2) != 1) {
    throw ShapeError("unary: image " + shape_str(image.shape()) + " does not match a " + std::to_string(spmap.height) +
                     "x" + std::to_string(spmap.width) + " superpixel map");
  }
  Var x = g.constant(image);
  x = nn::leaky_relu(nn::bias_add(nn::conv2d(x, leaf(kC1W), 1, 1), leaf(kC1B)), kSlope);
  x = nn::leaky_relu(nn::bias_add(nn::conv2d(x, leaf(kC2W), 1, 1), leaf(kC2B)), kSlope);
  x = nn::leaky_relu(nn::bias_add(nn::conv2d(x, leaf(kC3W), 1, 1), leaf(kC3B)), kSlope);
  Var f = nn::superpixel_pool(x, spmap.labels, static_cast<std::size_t>(spmap.count));
  f = nn::leaky_relu(nn::bias_add(nn::fully_connected(f, leaf(kF1W)), leaf(kF1B)), kSlope);
  f = nn::leaky_relu(nn::bias_add(nn::fully_connected(f, leaf(kF2W)), leaf(kF2B)), kSlope);
  return nn::bias_add(nn::fully_connected(f, leaf(kF3W)), leaf(kF3B));
}

}  // namespace

void CrfConfig::validate() const {
  for (std::size_t n : {net.conv1, net.conv2, net.conv3, net.fc1, net.fc2}) {
    if (n == 0) throw std::invalid_argument("unary network widths must be positive");
  }
  slic.validate();
  graph.validate();
  if (!(lambda_beta >= 0.0)) throw std::invalid_argument("lambda_beta must be >= 0");
}

void CrfTrainConfig::validate() const {
  sgd.validate();
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
}

CrfModel CrfModel::create(const CrfConfig& config, std::uint64_t seed) {
  config.validate();
  CrfModel m;
  m.config = config;
  const auto& n = config.net;
  auto& P = m.params;
  P.add("unary.conv1.w", {3, 3, 1, n.conv1});
  P.add("unary.conv1.b", {n.conv1});
  P.add("unary.conv2.w", {3, 3, n.conv1, n.conv2});
  P.add("unary.conv2.b", {n.conv2});
  P.add("unary.conv3.w", {3, 3, n.conv2, n.conv3});
  P.add("unary.conv3.b", {n.conv3});
  P.add("unary.fc1.w", {n.conv3, n.fc1});
  P.add("unary.fc1.b", {n.fc1});
  P.add("unary.fc2.w", {n.fc1, n.fc2});
  P.add("unary.fc2.b", {n.fc2});
  P.add("unary.fc3.w", {n.fc2, 1});
  P.add("unary.fc3.b", {1});
  P.add(kBetaBlock, {static_cast<std::size_t>(kSimilarityChannels)});

  Rng rng = Rng(seed).split("crf");
  for (std::size_t b : {kC1W, kC2W, kC3W}) {
    const auto& s = P[b].value.shape();
    he_uniform(P[b].value, s[0] * s[1] * s[2], rng);
  }
  for (std::size_t b : {kF1W, kF2W, kF3W}) he_uniform(P[b].value, P[b].value.dim(0), rng);
  P[kBeta].value.fill(1.0);
  // The NLL adds its own (lambda_beta/2)|beta|^2 term.
  P[kBeta].weight_decay = false;
  return m;
}

std::vector<double> CrfModel::beta() const {
  const auto d = params[kBeta].value.data();
  return {d.begin(), d.end()};
}

void CrfModel::clamp_beta() {
  for (auto& b : params[kBeta].value.data()) b = std::max(0.0, b);
}

void CrfModel::make_constant(double b) {
  for (std::size_t i = 0; i < kBeta; ++i) params[i].value.fill(0.0);
  params[kF3B].value.fill(b);
}

Var CrfModel::unary(Graph& g, const Tensor& image, const SuperpixelMap& spmap) {
  return unary_forward(g, image, spmap, [&](std::size_t i) { return g.param(params[i]); });
}

Var CrfModel::unary(Graph& g, const Tensor& image, const SuperpixelMap& spmap) const {
  return unary_forward(g, image, spmap, [&](std::size_t i) { return g.frozen(params[i]); });
}

std::vector<double> CrfModel::unary_values(const Image& image, const SuperpixelMap& spmap) const {
  Graph g;
  const auto d = unary(g, to_tensor(image), spmap).value().data();
  return {d.begin(), d.end()};
}

CrfSample prepare_sample(const Image& image, const DepthMap& depth, const CrfConfig& config) {
  if (image.width != depth.width || image.height != depth.height) {
    throw std::invalid_argument("prepare_sample: image and depth dimensions differ");
  }
  CrfSample s;
  s.image = to_tensor(image);
  s.spmap = slic_segment(image, config.slic);
  const SuperpixelDepth pooled = pool_depth(depth, s.spmap);
  s.valid = pooled.valid;
  s.graph = induced_subgraph(build_graph(image, s.spmap, config.graph), s.valid);
  for (std::size_t i = 0; i < pooled.y.size(); ++i)
    if (pooled.valid[i]) s.y.push_back(pooled.y[i]);
  return s;
}

std::vector<CrfSample> prepare_split(const Manifest& manifest, Split split, const CrfConfig& config) {
  std::vector<CrfSample> out;
  for (const auto& e : manifest.with_split(split)) {
    out.push_back(prepare_sample(read_pgm(manifest.image_path(e)), read_depth(manifest.depth_path(e)), config));
  }
  return out;
}

namespace {

std::vector<double> valid_only(const std::vector<double>& all, const std::vector<bool>& valid) {
  std::vector<double> out;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (valid[i]) out.push_back(all[i]);
  return out;
}

}  // namespace

double log10_error(const CrfModel& model, const CrfSample& sample) {
  Graph g;
  const auto hv = model.unary(g, sample.image, sample.spmap).value().data();
  CrfInstance inst{sample.graph, valid_only({hv.begin(), hv.end()}, sample.valid), {}};
  const auto pred = map_inference(inst, model.beta());
  double err = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    err += std::abs(std::log10(std::max(pred[i], 1e-6)) - std::log10(std::max(sample.y[i], 1e-6)));
  }
  return err / static_cast<double>(std::max<std::size_t>(pred.size(), 1));
}

CrfTrainResult train_crf(const std::vector<CrfSample>& train, const std::vector<CrfSample>& val, CrfModel model,
                         const CrfTrainConfig& config) {
  config.validate();
  if (train.empty()) throw std::invalid_argument("train_crf: empty training split");
  if (config.init_head_bias) {
    double sum = 0.0, n = 0.0;
    for (const auto& s : train) {
      sum += std::accumulate(s.y.begin(), s.y.end(), 0.0);
      n += static_cast<double>(s.y.size());
    }
    model.params[kF3B].value.fill(sum / n);
  }

  CrfTrainResult result;
  result.model = model;
  double best = INFINITY;
  Rng rng = Rng(config.seed).split("crf-train");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double total = 0.0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const CrfSample& s = train[order[step]];
      model.params.zero_grad();
      Graph g;
      const Var h = model.unary(g, s.image, s.spmap);
      const auto hv = h.value().data();
      const CrfInstance inst{s.graph, valid_only({hv.begin(), hv.end()}, s.valid), s.y};
      const NllResult r = nll(inst, model.beta(), model.config.lambda_beta);
      if (!std::isfinite(r.loss)) {
        throw NonFiniteError("train_crf: non-finite loss at epoch " + std::to_string(epoch) + " step " +
                             std::to_string(step));
      }
      total += r.loss;
      Tensor seed(h.shape());
      for (std::size_t l = 0, k = 0; l < s.valid.size(); ++l)
        if (s.valid[l]) seed[l] = r.grad_h[k++];
      g.backward(h, seed);
      auto gb = model.params[kBeta].gradient.data();
      for (std::size_t c = 0; c < gb.size(); ++c) gb[c] += r.grad_beta[c];
      try {
        sgd_step(model.params, config.sgd, epoch);
      } catch (const NonFiniteError& e) {
        throw NonFiniteError("train_crf: epoch " + std::to_string(epoch) + " step " + std::to_string(step) + ": " +
                             e.what());
      }
      model.clamp_beta();
    }

    CrfEpochStats st;
    st.epoch = epoch;
    st.train_nll = total / static_cast<double>(order.size());
    st.beta = model.beta();
    if (val.empty()) {
      st.val_log10 = NAN;
      result.model = model;
      result.best_epoch = epoch;
    } else {
      double err = 0.0;
      for (const auto& s : val) err += log10_error(model, s);
      st.val_log10 = err / static_cast<double>(val.size());
      if (st.val_log10 < best) {
        best = st.val_log10;
        result.model = model;
        result.best_epoch = epoch;
      }
    }
    result.history.push_back(std::move(st));
  }
  return result;
}

DepthMap predict_depth(const Image& image, const CrfModel& model) {
  const SuperpixelMap spmap = slic_segment(image, model.config.slic);
  CrfInstance inst{build_graph(image, spmap, model.config.graph), model.unary_values(image, spmap), {}};
  const auto y = map_inference(inst, model.beta());
  return broadcast_depth(y, std::vector<bool>(y.size(), true), spmap);
}

namespace {

std::filesystem::path sidecar(const std::filesystem::path& path) {
  auto p = path;
  p += ".crf";
  return p;
}

}  // namespace

void save_crf(const std::filesystem::path& path, const CrfModel& model) {
  save_checkpoint(path, model.params);
  std::ofstream os(sidecar(path), std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + sidecar(path).string());
  const auto& c = model.config;
  const auto beta = model.beta();
  char buf[64];
  for (std::size_t k = 0; k < beta.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", beta[k]);
    os << "beta" << k + 1 << '=' << buf << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.17g", c.lambda_beta);
  os << "lambda_beta=" << buf << '\n';
  os << "unary_conv1=" << c.net.conv1 << "\nunary_conv2=" << c.net.conv2 << "\nunary_conv3=" << c.net.conv3
     << "\nunary_fc1=" << c.net.fc1 << "\nunary_fc2=" << c.net.fc2 << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", c.slic.compactness);
  os << "p_target=" << c.slic.p_target << "\ncompactness=" << buf << "\nslic_iterations=" << c.slic.iterations
     << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", c.graph.gamma1);
  os << "gamma1=" << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", c.graph.gamma2);
  os << "gamma2=" << buf << "\nhistogram_bins=" << c.graph.histogram_bins << '\n';
  if (!os) throw std::runtime_error("write failed: " + sidecar(path).string());
}

CrfModel load_crf(const std::filesystem::path& path) {
  std::ifstream is(sidecar(path));
  if (!is) throw std::runtime_error("cannot read " + sidecar(path).string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& k) -> const std::string& {
    const auto it = kv.find(k);
    if (it == kv.end()) throw std::runtime_error(sidecar(path).string() + ": missing key " + k);
    return it->second;
  };
  CrfConfig c;
  c.net = {std::stoul(get("unary_conv1")), std::stoul(get("unary_conv2")), std::stoul(get("unary_conv3")),
           std::stoul(get("unary_fc1")), std::stoul(get("unary_fc2"))};
  c.slic.p_target = std::stoi(get("p_target"));
  c.slic.compactness = std::stod(get("compactness"));
  c.slic.iterations = std::stoi(get("slic_iterations"));
  c.graph.gamma1 = std::stod(get("gamma1"));
  c.graph.gamma2 = std::stod(get("gamma2"));
  c.graph.histogram_bins = std::stoi(get("histogram_bins"));
  c.lambda_beta = std::stod(get("lambda_beta"));
  CrfModel m = CrfModel::create(c, 0);
  load_checkpoint(path, m.params);
  return m;
}

}  // namespace endo
