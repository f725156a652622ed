#pragma once

#include <vector>

#include "endo/superpixel.hpp"

namespace endo {

// One Gaussian CRF problem over a superpixel graph.
struct CrfInstance {
  SimilarityGraph graph;
  std::vector<double> h;       // unary regressions, one per node
  std::vector<double> y_true;  // training targets; empty at prediction time
};

// Per-edge weight w_ij = sum_k beta_k S^k_ij.
std::vector<double> edge_weights(const SimilarityGraph& graph, const std::vector<double>& beta);

// E(y) = -sum_i (y_i - h_i)^2 - 1/2 sum_{(i,j)} w_ij (y_i - y_j)^2, each
// unordered edge once.
double energy(const std::vector<double>& y, const CrfInstance& instance, const std::vector<double>& beta);

// argmax of E: solves (I + L/2) y = h with L = D - W.
std::vector<double> map_inference(const CrfInstance& instance, const std::vector<double>& beta);

struct NllResult {
  double loss = 0.0;
  std::vector<double> grad_h;
  std::vector<double> grad_beta;
};

// -log Pr(y_true | h) for the normalized Gaussian exp(E)/Z plus
// (lambda_beta/2)|beta|^2:
//   C(y) - (h'h - h'A^-1 h) - 1/2 log det A + (p/2) log pi,  A = I + L/2,
// with C = -E. Gradients are exact.
NllResult nll(const CrfInstance& instance, const std::vector<double>& beta, double lambda_beta = 0.0);

}  // namespace endo
