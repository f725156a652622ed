#include "endo/crf.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace endo {
namespace {

void check_instance(const CrfInstance& inst, const std::vector<double>& beta) {
  if (inst.h.size() != static_cast<std::size_t>(inst.graph.nodes)) {
    throw std::invalid_argument("crf: h has " + std::to_string(inst.h.size()) + " entries for " +
                                std::to_string(inst.graph.nodes) + " nodes");
  }
  if (beta.size() != static_cast<std::size_t>(kSimilarityChannels)) {
    throw std::invalid_argument("crf: beta must have " + std::to_string(kSimilarityChannels) + " entries");
  }
  for (double b : beta) {
    if (!(b >= 0.0)) throw std::invalid_argument("crf: beta must be nonnegative");
  }
  for (const auto& e : inst.graph.edges) {
    if (e.i < 0 || e.j < 0 || e.i >= inst.graph.nodes || e.j >= inst.graph.nodes || e.i == e.j) {
      throw std::invalid_argument("crf: malformed edge");
    }
  }
}

Eigen::MatrixXd system_matrix(const CrfInstance& inst, const std::vector<double>& w) {
  const Eigen::Index p = inst.graph.nodes;
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(p, p);
  for (std::size_t k = 0; k < inst.graph.edges.size(); ++k) {
    const auto& e = inst.graph.edges[k];
    const double half = 0.5 * w[k];
    A(e.i, e.i) += half;
    A(e.j, e.j) += half;
    A(e.i, e.j) -= half;
    A(e.j, e.i) -= half;
  }
  return A;
}

Eigen::LLT<Eigen::MatrixXd> factor(const Eigen::MatrixXd& A) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) throw std::runtime_error("crf: system matrix is not positive definite");
  return llt;
}

Eigen::Map<const Eigen::VectorXd> view(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace

std::vector<double> edge_weights(const SimilarityGraph& graph, const std::vector<double>& beta) {
  std::vector<double> w(graph.edges.size(), 0.0);
  for (std::size_t k = 0; k < w.size(); ++k)
    for (int c = 0; c < kSimilarityChannels; ++c) w[k] += beta[static_cast<std::size_t>(c)] * graph.edges[k].s[static_cast<std::size_t>(c)];
  return w;
}

double energy(const std::vector<double>& y, const CrfInstance& inst, const std::vector<double>& beta) {
  check_instance(inst, beta);
  if (y.size() != inst.h.size()) throw std::invalid_argument("energy: y and h differ in length");
  double unary = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) unary += (y[i] - inst.h[i]) * (y[i] - inst.h[i]);
  const auto w = edge_weights(inst.graph, beta);
  double pair = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double d = y[static_cast<std::size_t>(inst.graph.edges[k].i)] - y[static_cast<std::size_t>(inst.graph.edges[k].j)];
    pair += w[k] * d * d;
  }
  return -unary - 0.5 * pair;
}

std::vector<double> map_inference(const CrfInstance& inst, const std::vector<double>& beta) {
  check_instance(inst, beta);
  const auto llt = factor(system_matrix(inst, edge_weights(inst.graph, beta)));
  const Eigen::VectorXd y = llt.solve(view(inst.h));
  return {y.data(), y.data() + y.size()};
}

NllResult nll(const CrfInstance& inst, const std::vector<double>& beta, double lambda_beta) {
  check_instance(inst, beta);
  if (inst.y_true.size() != inst.h.size()) throw std::invalid_argument("nll: y_true and h differ in length");
  const Eigen::Index p = inst.graph.nodes;
  const auto w = edge_weights(inst.graph, beta);
  const Eigen::MatrixXd A = system_matrix(inst, w);
  const auto llt = factor(A);
  const auto h = view(inst.h);
  const auto y = view(inst.y_true);
  const Eigen::VectorXd mu = llt.solve(h);
  const Eigen::MatrixXd Ainv = llt.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd Lfac = llt.matrixL();
  const double logdet = 2.0 * Lfac.diagonal().array().log().sum();

  const double C = -energy(inst.y_true, inst, beta);
  double reg = 0.0;
  for (double b : beta) reg += b * b;

  NllResult out;
  out.loss = C - (h.squaredNorm() - h.dot(mu)) - 0.5 * logdet + 0.5 * static_cast<double>(p) * std::log(std::numbers::pi) +
             0.5 * lambda_beta * reg;
  out.grad_h.resize(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) out.grad_h[static_cast<std::size_t>(i)] = 2.0 * (mu(i) - y(i));

  // dA/dbeta_k = L_k / 2, where y'L_k y = sum_edges S^k (y_i - y_j)^2 and
  // tr(A^-1 L_k) = sum_edges S^k (Ainv_ii + Ainv_jj - 2 Ainv_ij).
  out.grad_beta.assign(static_cast<std::size_t>(kSimilarityChannels), 0.0);
  for (const auto& e : inst.graph.edges) {
    const double dy = y(e.i) - y(e.j), dm = mu(e.i) - mu(e.j);
    const double tr = Ainv(e.i, e.i) + Ainv(e.j, e.j) - 2.0 * Ainv(e.i, e.j);
    for (int c = 0; c < kSimilarityChannels; ++c) {
      const double s = e.s[static_cast<std::size_t>(c)];
      out.grad_beta[static_cast<std::size_t>(c)] += 0.5 * s * (dy * dy - dm * dm) - 0.25 * s * tr;
    }
  }
  for (std::size_t c = 0; c < beta.size(); ++c) out.grad_beta[c] += lambda_beta * beta[c];
  return out;
}

}  // namespace endo
