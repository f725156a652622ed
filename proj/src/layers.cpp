#include "endo/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace endo::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

void require(bool ok, const std::string& what, const Shape& a, const Shape& b) {
  if (!ok) throw ShapeError(what + ": " + shape_str(a) + " vs " + shape_str(b));
}

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct ConvGeometry {
  std::size_t h, w, c, kh, kw, f, ho, wo;
  int stride, pad;
};

// Rows are output pixels, columns are (ky, kx, c) in kernel memory order.
void im2col(const Tensor& x, const ConvGeometry& g, std::vector<double>& cols) {
  const std::size_t patch = g.kh * g.kw * g.c;
  cols.assign(g.ho * g.wo * patch, 0.0);
  for (std::size_t oy = 0; oy < g.ho; ++oy) {
    for (std::size_t ox = 0; ox < g.wo; ++ox) {
      double* row = cols.data() + (oy * g.wo + ox) * patch;
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        const long iy = static_cast<long>(oy) * g.stride + static_cast<long>(ky) - g.pad;
        if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const long ix = static_cast<long>(ox) * g.stride + static_cast<long>(kx) - g.pad;
          if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
          const double* src = x.data().data() + (iy * g.w + ix) * g.c;
          double* dst = row + (ky * g.kw + kx) * g.c;
          for (std::size_t c = 0; c < g.c; ++c) dst[c] = src[c];
        }
      }
    }
  }
}

void col2im_add(const RowMat& dcols, const ConvGeometry& g, Tensor& dx) {
  const std::size_t patch = g.kh * g.kw * g.c;
  for (std::size_t oy = 0; oy < g.ho; ++oy) {
    for (std::size_t ox = 0; ox < g.wo; ++ox) {
      const double* row = dcols.data() + (oy * g.wo + ox) * patch;
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        const long iy = static_cast<long>(oy) * g.stride + static_cast<long>(ky) - g.pad;
        if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const long ix = static_cast<long>(ox) * g.stride + static_cast<long>(kx) - g.pad;
          if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
          double* dst = dx.data().data() + (iy * g.w + ix) * g.c;
          const double* src = row + (ky * g.kw + kx) * g.c;
          for (std::size_t c = 0; c < g.c; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Var input, Var kernel, int stride, int pad) {
  Graph& gr = *input.graph;
  const Tensor& x = input.value();
  const Tensor& k = kernel.value();
  require(x.rank() == 3 && k.rank() == 4, "conv2d expects HxWxC input and khxkwxCxF kernel",
          x.shape(), k.shape());
  require(x.dim(2) == k.dim(2), "conv2d channel mismatch", x.shape(), k.shape());
  require(k.dim(0) % 2 == 1 && k.dim(1) % 2 == 1, "conv2d kernel must be odd-sized",
          x.shape(), k.shape());
  if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: stride >= 1, pad >= 0");
  const long hp = static_cast<long>(x.dim(0)) + 2 * pad - static_cast<long>(k.dim(0));
  const long wp = static_cast<long>(x.dim(1)) + 2 * pad - static_cast<long>(k.dim(1));
  require(hp >= 0 && wp >= 0, "conv2d kernel larger than padded input", x.shape(), k.shape());

  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), k.dim(0), k.dim(1), k.dim(3),
                 static_cast<std::size_t>(hp / stride + 1),
                 static_cast<std::size_t>(wp / stride + 1), stride, pad};
  const std::size_t patch = g.kh * g.kw * g.c;
  auto cols = std::make_shared<std::vector<double>>();
  im2col(x, g, *cols);

  Tensor out({g.ho, g.wo, g.f});
  Map(out.data().data(), g.ho * g.wo, g.f).noalias() =
      MapC(cols->data(), g.ho * g.wo, patch) * MapC(k.data().data(), patch, g.f);

  const std::size_t xi = input.id, ki = kernel.id;
  return gr.record(std::move(out), {input, kernel},
                   [g, cols, xi, ki, patch](Graph& graph, std::size_t self) {
                     const Tensor& dy = graph.grad(self);
                     MapC dY(dy.data().data(), g.ho * g.wo, g.f);
                     if (graph.requires_grad(ki)) {
                       Tensor& dk = graph.grad(ki);
                       Map(dk.data().data(), patch, g.f).noalias() +=
                           MapC(cols->data(), g.ho * g.wo, patch).transpose() * dY;
                     }
                     if (graph.requires_grad(xi)) {
                       const Tensor& k = graph.value(ki);
                       RowMat dcols = dY * MapC(k.data().data(), patch, g.f).transpose();
                       col2im_add(dcols, g, graph.grad(xi));
                     }
                   });
}

Var bias_add(Var x, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  require(xv.rank() >= 1 && bv.rank() == 1 && xv.shape().back() == bv.dim(0),
          "bias_add last-dimension mismatch", xv.shape(), bv.shape());
  const std::size_t c = bv.dim(0);
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % c];
  const std::size_t xi = x.id, bi = bias.id;
  return x.graph->record(std::move(out), {x, bias}, [xi, bi, c](Graph& g, std::size_t self) {
    const Tensor& dy = g.grad(self);
    if (g.requires_grad(xi)) {
      Tensor& dx = g.grad(xi);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
    }
    if (g.requires_grad(bi)) {
      Tensor& db = g.grad(bi);
      for (std::size_t i = 0; i < dy.size(); ++i) db[i % c] += dy[i];
    }
  });
}

Var leaky_relu(Var x, double slope) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : slope * v;
  const std::size_t xi = x.id;
  return x.graph->record(std::move(out), {x}, [xi, slope](Graph& g, std::size_t self) {
    const Tensor& dy = g.grad(self);
    const Tensor& xv = g.value(xi);
    Tensor& dx = g.grad(xi);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += xv[i] > 0.0 ? dy[i] : slope * dy[i];
  });
}

Var residual_block(Var x, Var first, Var second) {
  const Shape& xs = x.shape();
  const Shape& a = first.shape();
  const Shape& b = second.shape();
  require(xs.size() == 3 && a.size() == 4 && b.size() == 4, "residual_block ranks", xs, a);
  require(a[2] == xs[2] && a[3] == xs[2], "residual_block channel mismatch", xs, a);
  require(b[2] == xs[2] && b[3] == xs[2], "residual_block channel mismatch", xs, b);
  const int pad1 = static_cast<int>(a[0] / 2);
  const int pad2 = static_cast<int>(b[0] / 2);
  Var inner = leaky_relu(conv2d(x, first, 1, pad1), kResidualSlope);
  return add(x, conv2d(inner, second, 1, pad2));
}

Var add(Var a, Var b) {
  require(a.value().same_shape(b.value()), "add shape mismatch", a.shape(), b.shape());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ai = a.id, bi = b.id;
  return a.graph->record(std::move(out), {a, b}, [ai, bi](Graph& g, std::size_t self) {
    const Tensor& dy = g.grad(self);
    for (std::size_t id : {ai, bi}) {
      if (!g.requires_grad(id)) continue;
      Tensor& d = g.grad(id);
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
    }
  });
}

Var scale(Var x, double factor) {
  Tensor out = x.value();
  for (auto& v : out.data()) v *= factor;
  const std::size_t xi = x.id;
  return x.graph->record(std::move(out), {x}, [xi, factor](Graph& g, std::size_t self) {
    const Tensor& dy = g.grad(self);
    Tensor& dx = g.grad(xi);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += factor * dy[i];
  });
}

Var max_pool_2x2(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3 || xv.dim(0) < 2 || xv.dim(1) < 2) {
    throw ShapeError("max_pool_2x2 needs HxWxC with H, W >= 2, got " + shape_str(xv.shape()));
  }
  const std::size_t h = xv.dim(0) / 2, w = xv.dim(1) / 2, c = xv.dim(2);
  const std::size_t in_w = xv.dim(1);
  Tensor out({h, w, c});
  auto argmax = std::make_shared<std::vector<std::size_t>>(h * w * c);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x0 = 0; x0 < w; ++x0) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = ((2 * y) * in_w + 2 * x0) * c + ch;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ((2 * y + dy) * in_w + 2 * x0 + dx) * c + ch;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        const std::size_t o = (y * w + x0) * c + ch;
        out[o] = xv[best];
        (*argmax)[o] = best;
      }
    }
  }
  const std::size_t xi = x.id;
  return x.graph->record(std::move(out), {x}, [xi, argmax](Graph& g, std::size_t self) {
    const Tensor& dy = g.grad(self);
    Tensor& dx = g.grad(xi);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[(*argmax)[i]] += dy[i];
  });
}

Var fully_connected(Var x, Var weight) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  require(xv.rank() == 2 && wv.rank() == 2 && xv.dim(1) == wv.dim(0),
          "fully_connected shape mismatch", xv.shape(), wv.shape());
  const std::size_t n = xv.dim(0), in = xv.dim(1), outd = wv.dim(1);
  Tensor out({n, outd});
  Map(out.data().data(), n, outd).noalias() =
      MapC(xv.data().data(), n, in) * MapC(wv.data().data(), in, outd);
  const std::size_t xi = x.id, wi = weight.id;
  return x.graph->record(std::move(out), {x, weight},
                         [xi, wi, n, in, outd](Graph& g, std::size_t self) {
                           MapC dY(g.grad(self).data().data(), n, outd);
                           if (g.requires_grad(wi)) {
                             MapC X(g.value(xi).data().data(), n, in);
                             Map(g.grad(wi).data().data(), in, outd).noalias() +=
                                 X.transpose() * dY;
                           }
                           if (g.requires_grad(xi)) {
                             MapC W(g.value(wi).data().data(), in, outd);
                             Map(g.grad(xi).data().data(), n, in).noalias() +=
                                 dY * W.transpose();
                           }
                         });
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = logistic(v);
  const std::size_t xi = x.id;
  return x.graph->record(std::move(out), {x}, [xi](Graph& g, std::size_t self) {
    const Tensor& dy = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& dx = g.grad(xi);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
  });
}

Var softmax_2class(Var logits) {
  const Tensor& lv = logits.value();
  if (lv.rank() < 1 || lv.shape().back() != 2) {
    throw ShapeError("softmax_2class needs a trailing dimension of 2, got " +
                     shape_str(lv.shape()));
  }
  Tensor out(lv.shape());
  for (std::size_t i = 0; i < lv.size(); i += 2) {
    const double p0 = logistic(lv[i] - lv[i + 1]);
    out[i] = p0;
    out[i + 1] = 1.0 - p0;
  }
  const std::size_t li = logits.id;
  return logits.graph->record(std::move(out), {logits}, [li](Graph& g, std::size_t self) {
    const Tensor& dy = g.grad(self);
    const Tensor& p = g.value(self);
    Tensor& dl = g.grad(li);
    for (std::size_t i = 0; i < dy.size(); i += 2) {
      const double dot = dy[i] * p[i] + dy[i + 1] * p[i + 1];
      dl[i] += p[i] * (dy[i] - dot);
      dl[i + 1] += p[i + 1] * (dy[i + 1] - dot);
    }
  });
}

Var soft_clip(Var x, double sharpness) {
  const double k = sharpness;
  Tensor out = x.value();
  for (auto& v : out.data()) v = (softplus(k * v) - softplus(k * (v - 1.0))) / k;
  const std::size_t xi = x.id;
  return x.graph->record(std::move(out), {x}, [xi, k](Graph& g, std::size_t self) {
    const Tensor& dy = g.grad(self);
    const Tensor& xv = g.value(xi);
    Tensor& dx = g.grad(xi);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      dx[i] += dy[i] * (logistic(k * xv[i]) - logistic(k * (xv[i] - 1.0)));
    }
  });
}

Var mean(Var x) {
  const Tensor& xv = x.value();
  if (xv.empty()) throw ShapeError("mean of empty tensor " + shape_str(xv.shape()));
  double s = 0.0;
  for (double v : xv.data()) s += v;
  const double n = static_cast<double>(xv.size());
  const std::size_t xi = x.id;
  return x.graph->record(Tensor({1}, s / n), {x}, [xi, n](Graph& g, std::size_t self) {
    const double d = g.grad(self)[0] / n;
    Tensor& dx = g.grad(xi);
    for (auto& v : dx.data()) v += d;
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const std::size_t xi = x.id;
  return x.graph->record(Tensor({1}, s), {x}, [xi](Graph& g, std::size_t self) {
    const double d = g.grad(self)[0];
    Tensor& dx = g.grad(xi);
    for (auto& v : dx.data()) v += d;
  });
}

Var superpixel_pool(Var x, std::span<const int> labels, std::size_t count) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3 || labels.size() != xv.dim(0) * xv.dim(1)) {
    throw ShapeError("superpixel_pool label raster of " + std::to_string(labels.size()) +
                     " pixels vs features " + shape_str(xv.shape()));
  }
  const std::size_t c = xv.dim(2);
  auto lab = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  auto inv = std::make_shared<std::vector<double>>(count, 0.0);
  for (int l : *lab) {
    if (l < 0 || static_cast<std::size_t>(l) >= count) {
      throw std::out_of_range("superpixel label " + std::to_string(l) + " outside [0, " +
                              std::to_string(count) + ")");
    }
    (*inv)[l] += 1.0;
  }
  for (auto& v : *inv) v = v > 0.0 ? 1.0 / v : 0.0;
  Tensor out({count, c});
  for (std::size_t i = 0; i < lab->size(); ++i) {
    const std::size_t l = (*lab)[i];
    for (std::size_t ch = 0; ch < c; ++ch) out[l * c + ch] += xv[i * c + ch];
  }
  for (std::size_t l = 0; l < count; ++l)
    for (std::size_t ch = 0; ch < c; ++ch) out[l * c + ch] *= (*inv)[l];
  const std::size_t xi = x.id;
  return x.graph->record(std::move(out), {x}, [xi, lab, inv, c](Graph& g, std::size_t self) {
    const Tensor& dy = g.grad(self);
    Tensor& dx = g.grad(xi);
    for (std::size_t i = 0; i < lab->size(); ++i) {
      const std::size_t l = (*lab)[i];
      for (std::size_t ch = 0; ch < c; ++ch) dx[i * c + ch] += dy[l * c + ch] * (*inv)[l];
    }
  });
}

Var class_nll(Var probs, int cls, double floor) {
  const Tensor& p = probs.value();
  if (p.rank() < 1 || p.shape().back() != 2 || (cls != 0 && cls != 1)) {
    throw ShapeError("class_nll needs [..., 2] probabilities, got " + shape_str(p.shape()));
  }
  const std::size_t rows = p.size() / 2;
  double s = 0.0;
  for (std::size_t r = 0; r < rows; ++r) s -= std::log(std::max(p[2 * r + cls], floor));
  const std::size_t pi = probs.id;
  return probs.graph->record(
      Tensor({1}, s / static_cast<double>(rows)), {probs},
      [pi, rows, cls, floor](Graph& g, std::size_t self) {
        const double d = g.grad(self)[0] / static_cast<double>(rows);
        const Tensor& pv = g.value(pi);
        Tensor& dp = g.grad(pi);
        for (std::size_t r = 0; r < rows; ++r) {
          const double v = pv[2 * r + cls];
          if (v > floor) dp[2 * r + cls] -= d / v;
        }
      });
}

Var dot_const(Var x, const Tensor& weights) {
  require(x.value().same_shape(weights), "dot_const shape mismatch", x.shape(), weights.shape());
  const Tensor& xv = x.value();
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += xv[i] * weights[i];
  auto w = std::make_shared<Tensor>(weights);
  const std::size_t xi = x.id;
  return x.graph->record(Tensor({1}, s), {x}, [xi, w](Graph& g, std::size_t self) {
    const double d = g.grad(self)[0];
    Tensor& dx = g.grad(xi);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += d * (*w)[i];
  });
}

Var l1_mean(Var x, const Tensor& target) {
  require(x.value().same_shape(target), "l1_mean shape mismatch", x.shape(), target.shape());
  const Tensor& xv = x.value();
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += std::abs(xv[i] - target[i]);
  const double n = static_cast<double>(xv.size());
  auto t = std::make_shared<Tensor>(target);
  const std::size_t xi = x.id;
  return x.graph->record(Tensor({1}, s / n), {x}, [xi, t, n](Graph& g, std::size_t self) {
    const double d = g.grad(self)[0] / n;
    const Tensor& xv = g.value(xi);
    Tensor& dx = g.grad(xi);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double diff = xv[i] - (*t)[i];
      dx[i] += diff > 0.0 ? d : (diff < 0.0 ? -d : 0.0);
    }
  });
}

}  // namespace endo::nn
