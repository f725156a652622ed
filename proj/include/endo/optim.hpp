#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include "endo/autodiff.hpp"
#include "endo/rng.hpp"
#include "endo/tensor.hpp"

namespace endo {

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SgdConfig {
  double learning_rate = 1e-5;
  double momentum = 0.9;
  double weight_decay = 0.0007;
  double lr_decay_factor = 0.8;
  int lr_decay_every = 20;

  // lr * decay^floor(epoch / every)
  double rate_at(int epoch) const;
  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// v <- momentum*v - lr(epoch)*(grad + wd*value); value <- value + v.
// Blocks with weight_decay == false skip the decay term. If any gradient is
// non-finite nothing is modified and NonFiniteError names the block.
void sgd_step(ParamStore& params, const SgdConfig& config, int epoch);

// He-uniform: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
void he_uniform(Tensor& t, std::size_t fan_in, Rng& rng);

// Builds the scalar objective on a fresh graph from the current parameter
// values. Returns max |analytic - central difference| / max(1, |analytic|)
// over every parameter entry. Parameter values are restored on exit.
double grad_check(const std::function<Var(Graph&)>& network, ParamStore& params, double eps);

}  // namespace endo
