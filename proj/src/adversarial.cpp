#include "endo/adversarial.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "endo/checkpoint.hpp"
#include "endo/layers.hpp"

namespace endo {

namespace {

constexpr double kSlope = nn::kResidualSlope;

// Transformer block layout: in.w, in.b, then two kernels per residual block,
// then out.w, out.b.
template <class Leaf>
Var transformer_forward(Var image, const TransformerShape& s, Leaf leaf) {
  const Tensor& v = image.value();
  if (v.rank() != 3 || v.dim(2) != 1) {
    throw std::invalid_argument("transformer: input must be HxWx1, got " + shape_str(v.shape()));
  }
  Var x = nn::leaky_relu(nn::bias_add(nn::conv2d(image, leaf(0), 1, 3), leaf(1)), kSlope);
  for (std::size_t b = 0; b < s.blocks; ++b) x = nn::residual_block(x, leaf(2 + 2 * b), leaf(3 + 2 * b));
  const std::size_t out = 2 + 2 * s.blocks;
  return nn::soft_clip(nn::bias_add(nn::conv2d(x, leaf(out), 1, 0), leaf(out + 1)), s.sharpness);
}

template <class Leaf>
Var discriminator_forward(Var image, Leaf leaf) {
  const Tensor& v = image.value();
  if (v.rank() != 3 || v.dim(2) != 1 || v.dim(0) < 4 || v.dim(1) < 4) {
    throw std::invalid_argument("discriminator: input must be HxWx1 with H, W >= 4, got " + shape_str(v.shape()));
  }
  auto conv = [&](Var x, std::size_t i, int pad) { return nn::bias_add(nn::conv2d(x, leaf(2 * i), 1, pad), leaf(2 * i + 1)); };
  Var x = nn::leaky_relu(conv(image, 0, 1), kSlope);
  x = nn::max_pool_2x2(x);
  x = nn::leaky_relu(conv(x, 1, 1), kSlope);
  x = nn::leaky_relu(conv(x, 2, 1), kSlope);
  x = nn::max_pool_2x2(x);
  x = nn::leaky_relu(conv(x, 3, 1), kSlope);
  return nn::softmax_2class(conv(x, 4, 0));
}

Tensor transform_tensor(const TransformerNet& t, const Tensor& x) {
  Graph g;
  return t.forward(g, g.constant(x)).value();
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::filesystem::path sidecar(const std::filesystem::path& p) { return p.string() + ".net"; }

std::map<std::string, std::string> read_sidecar(const std::filesystem::path& path) {
  std::ifstream is(sidecar(path));
  if (!is) throw std::runtime_error("cannot read " + sidecar(path).string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

const std::string& need(const std::map<std::string, std::string>& kv, const std::string& key,
                        const std::filesystem::path& path) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error(sidecar(path).string() + ": missing key " + key);
  return it->second;
}

struct DiscriminatorEval {
  Var loss;
  double accuracy = 0.0;
};

DiscriminatorEval discriminator_eval(Graph& g, DiscriminatorNet& d, const std::vector<Tensor>& transformed,
                                     const std::vector<Tensor>& synthetic) {
  if (transformed.empty() || synthetic.empty()) throw std::invalid_argument("discriminator_loss: empty batch");
  std::size_t correct = 0, patches = 0;
  auto part = [&](const std::vector<Tensor>& batch, int cls) {
    Var acc;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Var probs = d.forward(g, g.constant(batch[i]));
      const Tensor& p = probs.value();
      for (std::size_t r = 0; r < p.size(); r += 2) correct += ((p[r] > 0.5) == (cls == 0));
      patches += p.size() / 2;
      Var l = nn::class_nll(probs, cls, kProbabilityFloor);
      acc = i == 0 ? l : nn::add(acc, l);
    }
    return nn::scale(acc, 1.0 / static_cast<double>(batch.size()));
  };
  Var lt = part(transformed, 0);
  Var ls = part(synthetic, 1);
  return {nn::add(lt, ls), static_cast<double>(correct) / static_cast<double>(patches)};
}

}  // namespace

void TransformerShape::validate() const {
  if (width == 0 || height == 0) throw std::invalid_argument("transformer dims must be positive");
  if (channels == 0) throw std::invalid_argument("transformer channels must be positive");
  if (!(sharpness > 0.0)) throw std::invalid_argument("transformer sharpness must be > 0");
}

TransformerNet TransformerNet::create(const TransformerShape& shape, std::uint64_t seed) {
  shape.validate();
  TransformerNet t;
  t.shape = shape;
  const std::size_t C = shape.channels;
  auto& P = t.params;
  Rng rng = Rng(seed).split("transformer");

  P.add("t.in.w", {7, 7, 1, C});
  P.add("t.in.b", {C});
  he_uniform(P[0].value, 49, rng);
  for (std::size_t ky = 0; ky < 7; ++ky)
    for (std::size_t kx = 0; kx < 7; ++kx) P[0].value[(ky * 7 + kx) * C] = (ky == 3 && kx == 3) ? 1.0 : 0.0;

  for (std::size_t b = 0; b < shape.blocks; ++b) {
    const std::size_t first = P.add("t.res" + std::to_string(b) + ".a", {3, 3, C, C});
    P.add("t.res" + std::to_string(b) + ".b", {3, 3, C, C});  // zero: the block starts as identity
    he_uniform(P[first].value, 9 * C, rng);
  }
  const std::size_t out = P.add("t.out.w", {1, 1, C, 1});
  P.add("t.out.b", {1});
  P[out].value[0] = 1.0;
  return t;
}

Var TransformerNet::forward(Graph& g, Var image) {
  return transformer_forward(image, shape, [&](std::size_t i) { return g.param(params[i]); });
}

Var TransformerNet::forward(Graph& g, Var image) const {
  return transformer_forward(image, shape, [&](std::size_t i) { return g.frozen(params[i]); });
}

Image TransformerNet::transform(const Image& image) const {
  if (image.width != shape.width || image.height != shape.height) {
    throw std::invalid_argument("transform: image is " + std::to_string(image.width) + "x" +
                                std::to_string(image.height) + ", transformer expects " +
                                std::to_string(shape.width) + "x" + std::to_string(shape.height));
  }
  return from_tensor(transform_tensor(*this, to_tensor(image)));
}

void DiscriminatorShape::validate() const {
  for (std::size_t c : {conv1, conv2, conv3, conv4}) {
    if (c == 0) throw std::invalid_argument("discriminator channels must be positive");
  }
}

DiscriminatorNet DiscriminatorNet::create(const DiscriminatorShape& shape, std::uint64_t seed) {
  shape.validate();
  DiscriminatorNet d;
  d.shape = shape;
  Rng rng = Rng(seed).split("discriminator");
  const std::size_t widths[] = {1, shape.conv1, shape.conv2, shape.conv3, shape.conv4, 2};
  for (std::size_t i = 0; i < 5; ++i) {
    const std::size_t k = i == 4 ? 1 : 3;
    const std::size_t w = d.params.add("d.conv" + std::to_string(i + 1) + ".w", {k, k, widths[i], widths[i + 1]});
    d.params.add("d.conv" + std::to_string(i + 1) + ".b", {widths[i + 1]});
    he_uniform(d.params[w].value, k * k * widths[i], rng);
  }
  return d;
}

Var DiscriminatorNet::forward(Graph& g, Var image) {
  return discriminator_forward(image, [&](std::size_t i) { return g.param(params[i]); });
}

Var DiscriminatorNet::forward(Graph& g, Var image) const {
  return discriminator_forward(image, [&](std::size_t i) { return g.frozen(params[i]); });
}

Tensor DiscriminatorNet::probabilities(const Image& image) const {
  Graph g;
  return forward(g, g.constant(to_tensor(image))).value();
}

Var discriminator_loss(Graph& g, DiscriminatorNet& d, const std::vector<Tensor>& transformed,
                       const std::vector<Tensor>& synthetic) {
  return discriminator_eval(g, d, transformed, synthetic).loss;
}

TransformerLoss transformer_loss(Graph& g, TransformerNet& t, const DiscriminatorNet& d,
                                 const std::vector<Tensor>& batch, double lambda) {
  if (batch.empty()) throw std::invalid_argument("transformer_loss: empty batch");
  if (!(lambda >= 0.0)) throw std::invalid_argument("transformer_loss: lambda must be >= 0");
  Var adv, reg;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Var y = t.forward(g, g.constant(batch[i]));
    Var a = nn::class_nll(d.forward(g, y), 1, kProbabilityFloor);
    Var r = nn::l1_mean(y, batch[i]);
    adv = i == 0 ? a : nn::add(adv, a);
    reg = i == 0 ? r : nn::add(reg, r);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  adv = nn::scale(adv, inv);
  reg = nn::scale(reg, inv);
  return {nn::add(adv, nn::scale(reg, lambda)), adv, reg};
}

double patch_accuracy(const DiscriminatorNet& d, const std::vector<Image>& transformed,
                      const std::vector<Image>& synthetic) {
  std::size_t correct = 0, patches = 0;
  for (int cls = 0; cls < 2; ++cls) {
    for (const auto& img : cls == 0 ? transformed : synthetic) {
      const Tensor p = d.probabilities(img);
      for (std::size_t r = 0; r < p.size(); r += 2) correct += ((p[r] > 0.5) == (cls == 0));
      patches += p.size() / 2;
    }
  }
  if (patches == 0) throw std::invalid_argument("patch_accuracy: no images");
  return static_cast<double>(correct) / static_cast<double>(patches);
}

HistoryBuffer::HistoryBuffer(std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(Rng(seed).split("history")) {
  if (capacity == 0) throw std::invalid_argument("history buffer capacity must be positive");
}

std::size_t HistoryBuffer::sample_slot() {
  if (items_.empty()) throw std::logic_error("sample from an empty history buffer");
  return static_cast<std::size_t>(rng_.below(items_.size()));
}

std::vector<Tensor> HistoryBuffer::push_sample(const std::vector<Tensor>& new_batch, std::size_t k) {
  if (k == 0 || k % 2 != 0) throw std::invalid_argument("history buffer: k must be even and positive");
  if (new_batch.size() < k) throw std::invalid_argument("history buffer: new batch smaller than k");
  std::vector<Tensor> mixed;
  if (items_.size() < k / 2) {
    mixed.assign(new_batch.begin(), new_batch.begin() + static_cast<long>(k));
  } else {
    mixed.assign(new_batch.begin(), new_batch.begin() + static_cast<long>(k / 2));
    for (std::size_t i = 0; i < k / 2; ++i) mixed.push_back(items_[sample_slot()]);
  }
  for (const auto& item : new_batch) {
    if (items_.size() < capacity_) {
      items_.push_back(item);
    } else {
      items_[rng_.below(capacity_)] = item;
    }
  }
  return mixed;
}

void DaConfig::validate() const {
  transformer.validate();
  discriminator.validate();
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  if (buffer_capacity == 0) throw std::invalid_argument("buffer_capacity must be positive");
  if (batch == 0 || batch % 2 != 0) throw std::invalid_argument("batch must be even and positive");
  if (n_t < 1 || n_d < 1) throw std::invalid_argument("n_t and n_d must be >= 1");
  if (steps < 0 || pretrain_t < 0 || pretrain_d < 0) throw std::invalid_argument("step counts must be >= 0");
  if (!(lr_t > 0.0) || !(lr_d > 0.0)) throw std::invalid_argument("lr_t and lr_d must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
  if (crop != 0 && (crop < 8 || crop > transformer.width || crop > transformer.height)) {
    throw std::invalid_argument("crop must be 0 or in [8, image size]");
  }
}

DaResult train_da(const std::vector<Image>& synthetic, const std::vector<Image>& real, const DaConfig& config) {
  config.validate();
  if (synthetic.empty() || real.empty()) throw std::invalid_argument("train_da: both image sets must be nonempty");
  const auto& ts = config.transformer;
  for (const auto* set : {&synthetic, &real})
    for (const auto& img : *set)
      if (img.width != ts.width || img.height != ts.height) {
        throw std::invalid_argument("train_da: image is " + std::to_string(img.width) + "x" +
                                    std::to_string(img.height) + ", expected " + std::to_string(ts.width) + "x" +
                                    std::to_string(ts.height));
      }

  const Rng root = Rng(config.seed).split("da");
  DaResult r{TransformerNet::create(ts, root.split("t").seed()),
             DiscriminatorNet::create(config.discriminator, root.split("d").seed()), {}};
  HistoryBuffer buffer(config.buffer_capacity, root.split("buffer").seed());
  Rng pick = root.split("minibatch");

  std::vector<Tensor> syn_t, real_t;
  for (const auto& img : synthetic) syn_t.push_back(to_tensor(img));
  for (const auto& img : real) real_t.push_back(to_tensor(img));

  const std::size_t k = config.batch;
  const std::size_t cw = config.crop ? config.crop : ts.width, ch = config.crop ? config.crop : ts.height;
  auto draw = [&](const std::vector<Tensor>& pool) {
    std::vector<Tensor> b;
    for (std::size_t i = 0; i < k; ++i) {
      const Tensor& src = pool[pick.below(pool.size())];
      if (!config.crop) {
        b.push_back(src);
        continue;
      }
      const std::size_t y0 = pick.below(ts.height - ch + 1), x0 = pick.below(ts.width - cw + 1);
      Tensor c({ch, cw, 1});
      for (std::size_t y = 0; y < ch; ++y)
        for (std::size_t x = 0; x < cw; ++x) c.at(y, x, 0) = src.at(y0 + y, x0 + x, 0);
      b.push_back(std::move(c));
    }
    return b;
  };
  SgdConfig sgd_t{config.lr_t, config.momentum, 0.0, 1.0, 1};
  SgdConfig sgd_d{config.lr_d, config.momentum, 0.0, 1.0, 1};
  const double nan = std::nan("");
  int step = 0;

  auto fail = [&](const std::string& what) {
    throw NonFiniteError("train_da step " + std::to_string(step) + ": " + what);
  };
  auto update = [&](ParamStore& p, const SgdConfig& c) {
    try {
      sgd_step(p, c, 0);
    } catch (const NonFiniteError& e) {
      fail(e.what());
    }
  };

  // Per-image graphs keep memory flat; gradients of the batch mean accumulate.
  auto t_update = [&](bool adversarial) {
    const auto batch = draw(real_t);
    const double lambda = config.lambda;
    const Tensor seed({1}, 1.0 / static_cast<double>(k));
    double adv = 0.0, reg = 0.0;
    r.transformer.params.zero_grad();
    for (const auto& x : batch) {
      Graph g;
      const TransformerLoss L = transformer_loss(g, r.transformer, r.discriminator, {x}, lambda);
      adv += L.adversarial.value()[0];
      reg += L.selfreg.value()[0];
      g.backward(adversarial ? L.total : nn::scale(L.selfreg, lambda), seed);
    }
    adv /= static_cast<double>(k);
    reg /= static_cast<double>(k);
    if (!std::isfinite(adv) || !std::isfinite(reg)) fail("non-finite transformer loss");
    update(r.transformer.params, sgd_t);
    return std::array<double, 2>{adv, reg};
  };
  auto d_update = [&]() {
    std::vector<Tensor> fresh;
    for (const auto& x : draw(real_t)) fresh.push_back(transform_tensor(r.transformer, x));
    const auto mixed = buffer.push_sample(fresh, k);
    const auto syn = draw(syn_t);
    r.discriminator.params.zero_grad();
    Graph g;
    const DiscriminatorEval e = discriminator_eval(g, r.discriminator, mixed, syn);
    const double loss = e.loss.value()[0];
    if (!std::isfinite(loss)) fail("non-finite discriminator loss");
    g.backward(e.loss);
    update(r.discriminator.params, sgd_d);
    return std::array<double, 2>{loss, e.accuracy};
  };

  for (int i = 0; i < config.pretrain_t; ++i) {
    ++step;
    const auto [adv, reg] = t_update(false);
    (void)adv;
    r.log.push_back({step, config.lambda * reg, nan, reg, nan, nan});
  }
  for (int i = 0; i < config.pretrain_d; ++i) {
    ++step;
    const auto [loss, acc] = d_update();
    r.log.push_back({step, nan, nan, nan, loss, acc});
  }
  for (int s = 0; s < config.steps; ++s) {
    ++step;
    std::array<double, 2> t{}, d{};
    for (int i = 0; i < config.n_t; ++i) t = t_update(true);
    for (int i = 0; i < config.n_d; ++i) d = d_update();
    r.log.push_back({step, t[0] + config.lambda * t[1], t[0], t[1], d[0], d[1]});
  }
  return r;
}

void write_da_log(const std::filesystem::path& path, const std::vector<DaLogRow>& log) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << kDaLogHeader << '\n';
  auto field = [&](double v) {
    os << ',';
    if (!std::isnan(v)) os << num(v);
  };
  for (const auto& row : log) {
    os << row.step;
    for (double v : {row.loss_t, row.loss_t_adv, row.loss_t_selfreg, row.loss_d, row.disc_patch_acc}) field(v);
    os << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void save_transformer(const std::filesystem::path& path, const TransformerNet& t) {
  save_checkpoint(path, t.params);
  std::ofstream os(sidecar(path), std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + sidecar(path).string());
  const auto& s = t.shape;
  os << "net=transformer\nwidth=" << s.width << "\nheight=" << s.height << "\nchannels=" << s.channels
     << "\nblocks=" << s.blocks << "\nsharpness=" << num(s.sharpness) << '\n';
  if (!os) throw std::runtime_error("write failed: " + sidecar(path).string());
}

TransformerNet load_transformer(const std::filesystem::path& path) {
  const auto kv = read_sidecar(path);
  if (need(kv, "net", path) != "transformer") throw std::runtime_error(sidecar(path).string() + ": not a transformer");
  TransformerShape s;
  s.width = std::stoul(need(kv, "width", path));
  s.height = std::stoul(need(kv, "height", path));
  s.channels = std::stoul(need(kv, "channels", path));
  s.blocks = std::stoul(need(kv, "blocks", path));
  s.sharpness = std::stod(need(kv, "sharpness", path));
  TransformerNet t = TransformerNet::create(s, 0);
  load_checkpoint(path, t.params);
  return t;
}

void save_discriminator(const std::filesystem::path& path, const DiscriminatorNet& d) {
  save_checkpoint(path, d.params);
  std::ofstream os(sidecar(path), std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + sidecar(path).string());
  const auto& s = d.shape;
  os << "net=discriminator\nconv1=" << s.conv1 << "\nconv2=" << s.conv2 << "\nconv3=" << s.conv3
     << "\nconv4=" << s.conv4 << '\n';
  if (!os) throw std::runtime_error("write failed: " + sidecar(path).string());
}

DiscriminatorNet load_discriminator(const std::filesystem::path& path) {
  const auto kv = read_sidecar(path);
  if (need(kv, "net", path) != "discriminator") {
    throw std::runtime_error(sidecar(path).string() + ": not a discriminator");
  }
  DiscriminatorShape s{std::stoul(need(kv, "conv1", path)), std::stoul(need(kv, "conv2", path)),
                       std::stoul(need(kv, "conv3", path)), std::stoul(need(kv, "conv4", path))};
  DiscriminatorNet d = DiscriminatorNet::create(s, 0);
  load_checkpoint(path, d.params);
  return d;
}

}  // namespace endo
