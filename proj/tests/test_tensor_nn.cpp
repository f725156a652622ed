#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "endo/checkpoint.hpp"
#include "endo/layers.hpp"
#include "endo/optim.hpp"

using namespace endo;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Six nested loops, zero padding, no im2col.
Tensor naive_conv(const Tensor& x, const Tensor& k, int stride, int pad) {
  const long H = x.dim(0), W = x.dim(1), C = x.dim(2);
  const long KH = k.dim(0), KW = k.dim(1), F = k.dim(3);
  const long HO = (H + 2 * pad - KH) / stride + 1;
  const long WO = (W + 2 * pad - KW) / stride + 1;
  Tensor out({static_cast<std::size_t>(HO), static_cast<std::size_t>(WO), static_cast<std::size_t>(F)});
  for (long oy = 0; oy < HO; ++oy)
    for (long ox = 0; ox < WO; ++ox)
      for (long f = 0; f < F; ++f) {
        double acc = 0.0;
        for (long ky = 0; ky < KH; ++ky)
          for (long kx = 0; kx < KW; ++kx)
            for (long c = 0; c < C; ++c) {
              const long iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              acc += x[(iy * W + ix) * C + c] * k[((ky * KW + kx) * C + c) * F + f];
            }
        out[(oy * WO + ox) * F + f] = acc;
      }
  return out;
}

}  // namespace

TEST_CASE("conv2d scalar multiply") {
  Graph g;
  Var x = g.constant(Tensor({1, 1, 1}, 2.0));
  Var k = g.constant(Tensor({1, 1, 1, 1}, 3.0));
  Var y = nn::conv2d(x, k, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 1});
  CHECK(y.value()[0] == 6.0);
}

TEST_CASE("conv2d zero kernel gives zero output") {
  Rng rng(3);
  Graph g;
  Var x = g.constant(random_tensor({6, 5, 2}, rng));
  Var k = g.constant(Tensor({3, 3, 2, 4}));
  Var y = nn::conv2d(x, k, 1, 1);
  for (double v : y.value().data()) CHECK(v == 0.0);
}

TEST_CASE("conv2d matches the direct convolution oracle") {
  Rng rng(11);
  struct Case { std::size_t h, w, c, kh, f; int stride, pad; };
  const Case cases[] = {{5, 5, 1, 3, 1, 1, 0},  {5, 5, 1, 3, 2, 1, 1},   {16, 16, 3, 3, 4, 1, 1},
                        {16, 13, 2, 5, 3, 2, 2}, {9, 16, 4, 7, 2, 1, 3},  {8, 8, 3, 1, 5, 1, 0},
                        {12, 12, 2, 3, 2, 3, 0}, {16, 16, 1, 7, 8, 1, 3}};
  for (const auto& cs : cases) {
    Tensor x = random_tensor({cs.h, cs.w, cs.c}, rng);
    Tensor k = random_tensor({cs.kh, cs.kh, cs.c, cs.f}, rng);
    Graph g;
    Var y = nn::conv2d(g.constant(x), g.constant(k), cs.stride, cs.pad);
    Tensor ref = naive_conv(x, k, cs.stride, cs.pad);
    REQUIRE(y.value().same_shape(ref));
    double worst = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - y.value()[i]));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("conv2d rejects mismatched shapes naming both") {
  Graph g;
  Var x = g.constant(Tensor({4, 4, 2}));
  Var k = g.constant(Tensor({3, 3, 3, 1}));
  try {
    nn::conv2d(x, k, 1, 1);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[4x4x2]") != std::string::npos);
    CHECK(msg.find("[3x3x3x1]") != std::string::npos);
  }
  CHECK_THROWS_AS(nn::conv2d(x, g.constant(Tensor({2, 2, 2, 1})), 1, 0), ShapeError);
}

TEST_CASE("residual block with zero weights is the identity, bit for bit") {
  Rng rng(5);
  Tensor x = random_tensor({7, 6, 3}, rng);
  Graph g;
  Var y = nn::residual_block(g.constant(x), g.constant(Tensor({3, 3, 3, 3})),
                             g.constant(Tensor({3, 3, 3, 3})));
  CHECK(y.value().storage() == x.storage());
  CHECK_THROWS_AS(nn::residual_block(g.constant(x), g.constant(Tensor({3, 3, 2, 2})),
                                     g.constant(Tensor({3, 3, 2, 2}))),
                  ShapeError);
}

TEST_CASE("ten residual blocks preserve 64x64x64 shape") {
  Rng rng(1);
  Graph g;
  Var h = g.constant(random_tensor({64, 64, 64}, rng));
  Tensor k({3, 3, 64, 64});
  for (auto& v : k.data()) v = rng.uniform(-0.01, 0.01);
  for (int i = 0; i < 10; ++i) h = nn::residual_block(h, g.constant(k), g.constant(k));
  CHECK(h.shape() == Shape{64, 64, 64});
}

TEST_CASE("misc layers: hand-evaluated values") {
  Graph g;
  Var r = nn::relu(g.constant(Tensor({2}, std::vector<double>{-1.0, 2.0})));
  CHECK(r.value()[0] == 0.0);
  CHECK(r.value()[1] == 2.0);

  Var s = nn::softmax_2class(g.constant(Tensor({1, 2}, 0.0)));
  CHECK(s.value()[0] == 0.5);
  CHECK(s.value()[1] == 0.5);

  ParamBlock pb("x", {2, 2, 1});
  pb.value = Tensor({2, 2, 1}, std::vector<double>{1, 2, 3, 4});
  Graph g2;
  Var p = nn::max_pool_2x2(g2.param(pb));
  CHECK(p.shape() == Shape{1, 1, 1});
  CHECK(p.value()[0] == 4.0);
  g2.backward(p);
  CHECK(pb.gradient.storage() == std::vector<double>{0, 0, 0, 1});

  CHECK_THROWS_AS(nn::softmax_2class(g.constant(Tensor({3}))), ShapeError);
  CHECK_THROWS_AS(nn::fully_connected(g.constant(Tensor({2, 3})), g.constant(Tensor({2, 3}))),
                  ShapeError);
}

TEST_CASE("softmax pairs sum to one") {
  Rng rng(9);
  Graph g;
  Var s = nn::softmax_2class(g.constant(random_tensor({50, 2}, rng, -30.0, 30.0)));
  for (std::size_t i = 0; i < 50; ++i) CHECK(std::abs(s.value()[2 * i] + s.value()[2 * i + 1] - 1.0) < 1e-12);
}

TEST_CASE("grad_check on an exactly linear model") {
  ParamStore ps;
  const auto w = ps.add("w", {3});
  ps[w].value = Tensor({3}, std::vector<double>{0.5, -1.0, 2.0});
  Tensor x({3}, std::vector<double>{1.0, 2.0, 3.0});
  const double err = grad_check([&](Graph& g) { return nn::dot_const(g.param(ps[w]), x); }, ps, 1e-5);
  CHECK(err < 1e-10);
}

TEST_CASE("every differentiable op passes grad_check over ten seeds") {
  const double eps = 1e-5;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    const std::size_t h = 2 + 2 * rng.below(3), w = 2 + 2 * rng.below(3), c = 1 + rng.below(3);
    const std::size_t f = 1 + rng.below(3);
    ParamStore ps;
    const auto xi = ps.add("x", {h, w, c});
    const auto ki = ps.add("k", {3, 3, c, f});
    const auto bi = ps.add("b", {f});
    const auto ri1 = ps.add("r1", {3, 3, c, c});
    const auto ri2 = ps.add("r2", {3, 3, c, c});
    for (auto& b : ps.blocks()) b.value = random_tensor(b.value.shape(), rng);
    Tensor wconv = random_tensor({h, w, f}, rng);
    Tensor wpool = random_tensor({h / 2, w / 2, c}, rng);
    Tensor wsp = random_tensor({2, c}, rng);
    Tensor wsig = random_tensor({h, w, c}, rng);
    Tensor wfc = random_tensor({c, 2}, rng);
    std::vector<int> labels(h * w);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);

    CAPTURE(seed);
    CHECK(grad_check([&](Graph& g) {
            Var y = nn::bias_add(nn::conv2d(g.param(ps[xi]), g.param(ps[ki]), 1, 1), g.param(ps[bi]));
            return nn::dot_const(nn::leaky_relu(y, 0.01), wconv);
          }, ps, eps) < 1e-4);
    CHECK(grad_check([&](Graph& g) {
            Var y = nn::residual_block(g.param(ps[xi]), g.param(ps[ri1]), g.param(ps[ri2]));
            return nn::dot_const(y, wsig);
          }, ps, eps) < 1e-6);
    CHECK(grad_check([&](Graph& g) {
            return nn::dot_const(nn::max_pool_2x2(g.param(ps[xi])), wpool);
          }, ps, eps) < 1e-4);
    CHECK(grad_check([&](Graph& g) {
            Var y = nn::soft_clip(nn::sigmoid(g.param(ps[xi])), 20.0);
            return nn::mean(nn::scale(nn::add(y, nn::relu(g.param(ps[xi]))), 1.5));
          }, ps, eps) < 1e-4);
    CHECK(grad_check([&](Graph& g) {
            Var pooled = nn::superpixel_pool(g.param(ps[xi]), labels, 2);
            return nn::dot_const(pooled, wsp);
          }, ps, eps) < 1e-4);
    CHECK(grad_check([&](Graph& g) {
            Var pooled = nn::superpixel_pool(g.param(ps[xi]), labels, 2);  // [2, c]
            Var fc = nn::fully_connected(pooled, g.constant(wfc));
            Var probs = nn::softmax_2class(fc);
            return nn::add(nn::class_nll(probs, 0, 1e-7), nn::sum(probs));
          }, ps, eps) < 1e-4);
    Tensor target = random_tensor({h, w, c}, rng);
    CHECK(grad_check([&](Graph& g) { return nn::l1_mean(g.param(ps[xi]), target); }, ps, eps) < 1e-4);
  }
}

TEST_CASE("sgd_step update rule") {
  ParamStore ps;
  const auto i = ps.add("p", {3});
  ps[i].value = Tensor({3}, std::vector<double>{1.0, -2.0, 0.5});
  ps[i].gradient = Tensor({3}, std::vector<double>{0.25, 1.0, -3.0});
  SgdConfig plain{1.0, 0.0, 0.0, 1.0, 1};
  sgd_step(ps, plain, 0);
  CHECK(ps[i].value.storage() == std::vector<double>{0.75, -3.0, 3.5});

  ps[i].zero_grad();
  ps[i].momentum.fill(0.0);
  const auto before = ps[i].value.storage();
  sgd_step(ps, plain, 0);
  CHECK(ps[i].value.storage() == before);

  SgdConfig defaults;
  CHECK(defaults.momentum == 0.9);
  CHECK(defaults.weight_decay == 0.0007);
  CHECK(defaults.rate_at(19) == doctest::Approx(1e-5));
  CHECK(defaults.rate_at(20) == doctest::Approx(0.8e-5).epsilon(1e-14));
  CHECK(defaults.rate_at(40) == doctest::Approx(0.64e-5).epsilon(1e-14));
}

TEST_CASE("sgd_step reproduces value - lr*grad to 1e-15") {
  Rng rng(2);
  ParamStore ps;
  const auto i = ps.add("p", {50});
  ps[i].value = random_tensor({50}, rng);
  ps[i].gradient = random_tensor({50}, rng);
  const auto v0 = ps[i].value.storage();
  const auto g0 = ps[i].gradient.storage();
  SgdConfig cfg{0.037, 0.0, 0.0, 1.0, 1};
  sgd_step(ps, cfg, 0);
  for (std::size_t k = 0; k < 50; ++k) CHECK(std::abs(ps[i].value[k] - (v0[k] - 0.037 * g0[k])) <= 1e-15);
}

TEST_CASE("sgd_step aborts on non-finite gradient") {
  ParamStore ps;
  ps.add("good", {1});
  const auto bad = ps.add("bad", {2});
  ps[bad].gradient[1] = std::nan("");
  ps[0].gradient[0] = 1.0;
  try {
    sgd_step(ps, SgdConfig{}, 0);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("bad") != std::string::npos);
  }
  CHECK(ps[0].value[0] == 0.0);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(8);
  ParamStore ps;
  ps.add("conv/w", {3, 3, 1, 4});
  ps.add("bias", {4});
  ps.add("scalar", {1});
  for (auto& b : ps.blocks()) b.value = random_tensor(b.value.shape(), rng, -1e3, 1e3);
  ps[2].value[0] = -0.0;
  const auto path = std::filesystem::temp_directory_path() / "endo_ckpt_test.bin";
  save_checkpoint(path, ps);

  std::ifstream is(path, std::ios::binary);
  std::string head(8, '\0');
  is.read(head.data(), 8);
  CHECK(head == "NNCKPT1\n");

  ParamStore copy;
  copy.add("conv/w", {3, 3, 1, 4});
  copy.add("bias", {4});
  copy.add("scalar", {1});
  load_checkpoint(path, copy);
  for (std::size_t b = 0; b < 3; ++b) {
    CHECK(std::memcmp(copy[b].value.data().data(), ps[b].value.data().data(),
                      ps[b].value.size() * sizeof(double)) == 0);
  }
  ParamStore wrong;
  wrong.add("bias", {5});
  CHECK_THROWS_AS(load_checkpoint(path, wrong), ShapeError);
  std::filesystem::remove(path);
}
