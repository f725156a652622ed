#include "endo/optim.hpp"

#include <algorithm>
#include <cmath>

namespace endo {

double SgdConfig::rate_at(int epoch) const {
  const int steps = epoch < 0 ? 0 : epoch / lr_decay_every;
  return learning_rate * std::pow(lr_decay_factor, steps);
}

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0,1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
    throw std::invalid_argument("lr_decay_factor must be in (0,1]");
  }
  if (lr_decay_every < 1) throw std::invalid_argument("lr_decay_every must be >= 1");
}

void sgd_step(ParamStore& params, const SgdConfig& config, int epoch) {
  for (const auto& b : params.blocks()) {
    if (!b.gradient.all_finite()) {
      throw NonFiniteError("non-finite gradient in parameter block '" + b.name + "'");
    }
  }
  const double lr = config.rate_at(epoch);
  for (auto& b : params.blocks()) {
    const double wd = b.weight_decay ? config.weight_decay : 0.0;
    auto& value = b.value;
    auto& grad = b.gradient;
    auto& vel = b.momentum;
    for (std::size_t i = 0; i < value.size(); ++i) {
      vel[i] = config.momentum * vel[i] - lr * (grad[i] + wd * value[i]);
      value[i] += vel[i];
    }
  }
}

void he_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
}

double grad_check(const std::function<Var(Graph&)>& network, ParamStore& params, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-4)) throw std::invalid_argument("grad_check eps must be in [1e-7, 1e-4]");

  auto evaluate = [&]() {
    Graph g;
    const double v = network(g).value()[0];
    if (!std::isfinite(v)) throw NonFiniteError("grad_check: non-finite loss");
    return v;
  };

  params.zero_grad();
  {
    Graph g;
    Var out = network(g);
    if (out.value().size() != 1) throw ShapeError("grad_check needs a scalar network output");
    if (!std::isfinite(out.value()[0])) throw NonFiniteError("grad_check: non-finite loss");
    g.backward(out);
  }

  double worst = 0.0;
  for (auto& block : params.blocks()) {
    for (std::size_t i = 0; i < block.value.size(); ++i) {
      const double saved = block.value[i];
      block.value[i] = saved + eps;
      const double plus = evaluate();
      block.value[i] = saved - eps;
      const double minus = evaluate();
      block.value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double analytic = block.gradient[i];
      worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)));
    }
  }
  return worst;
}

}  // namespace endo
