#pragma once

#include "dualdg/model.hpp"
#include "dualdg/oracles.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace dualdg {

inline constexpr double kPowerTolerance = 1e-10;
inline constexpr int kPowerMaxIterations = 10000;
inline constexpr Index kDenseEigenFallbackDim = 512;

namespace detail {

// Power iteration on M'M. Stops when ||M'Mv - rho v|| <= tol * rho.
template <typename Scalar>
std::optional<Scalar> power_iteration(const Mat<Scalar>& M, Vec<Scalar> v) {
  v.normalize();
  for (int it = 0; it < kPowerMaxIterations; ++it) {
    const Vec<Scalar> y = M.transpose() * (M * v);
    const Scalar rho = v.dot(y);
    const Scalar ynorm = y.norm();
    if (!(ynorm > 0)) return std::nullopt;
    if ((y - rho * v).norm() <= Scalar(kPowerTolerance) * rho) return rho;
    v = y / ynorm;
  }
  return std::nullopt;
}

}  // namespace detail

/**
 * ||M||^2 (largest eigenvalue of M'M) by power iteration.
 *
 * Deterministic: the start vector is the normalized all-ones vector, and a
 * second run starts from all-ones with 1e-3 added to the first coordinate.
 * The larger Rayleigh quotient wins, which covers starts that are orthogonal
 * to the top eigenvector. If neither run converges within the cap, small
 * matrices fall back to a dense symmetric eigensolver.
 */
template <typename Scalar>
Scalar spectral_norm_sq(const Mat<Scalar>& M) {
  if (M.size() == 0 || M.cwiseAbs().maxCoeff() == Scalar(0)) return Scalar(0);
  const Index n = M.cols();
  Vec<Scalar> start = Vec<Scalar>::Ones(n);
  auto first = detail::power_iteration(M, start);
  start(0) += Scalar(1e-3);
  auto second = detail::power_iteration(M, start);
  if (first && second) return std::max(*first, *second);
  if (first || second) {
    // One start hit the null space or stalled; fall through to the dense path when cheap.
    if (std::max(M.rows(), M.cols()) > kDenseEigenFallbackDim) return first ? *first : *second;
  }
  if (std::max(M.rows(), M.cols()) <= kDenseEigenFallbackDim) {
    const Mat<Scalar> gram = M.rows() < M.cols() ? Mat<Scalar>(M * M.transpose()) : Mat<Scalar>(M.transpose() * M);
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(gram, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().maxCoeff();
  }
  throw NumericError("spectral_norm_sq: power iteration did not converge");
}

/// [A_ji; C_ji] stacked over j in N_bar_i, j ascending, equality rows first per j.
template <typename Scalar>
Mat<Scalar> stacked_columns(const BlockProblem<Scalar>& problem, Index i) {
  const BipartiteGraph& gr = problem.graph();
  Index rows = 0;
  for (const auto& nb : gr.primal_neighbors(i)) rows += gr.p(nb.node) + gr.q(nb.node);
  Mat<Scalar> S(rows, gr.n(i));
  Index r = 0;
  for (const auto& nb : gr.primal_neighbors(i)) {
    const auto& blk = problem.block(nb.edge);
    S.middleRows(r, blk.A.rows()) = blk.A;
    r += blk.A.rows();
    S.middleRows(r, blk.C.rows()) = blk.C;
    r += blk.C.rows();
  }
  return S;
}

/// L_{d_i} = ||[A_ji; C_ji]_{j in N_bar_i}||^2 / sigma_i.
template <typename Scalar>
Scalar block_dual_lipschitz(const BlockProblem<Scalar>& problem, Index i) {
  if (problem.graph().primal_neighbors(i).empty()) {
    throw StructuralError("block_dual_lipschitz: primal block " + std::to_string(i) + " has no constraint neighbors");
  }
  return spectral_norm_sq(stacked_columns(problem, i)) / problem.objective(i).constants().sigma;
}

template <typename Scalar>
std::vector<Scalar> block_dual_lipschitz_all(const BlockProblem<Scalar>& problem) {
  std::vector<Scalar> out(problem.num_blocks());
  for (Index i = 0; i < problem.num_blocks(); ++i) out[i] = block_dual_lipschitz(problem, i);
  return out;
}

/// L_d = ||G||^2 / sigma_f. Materializes G; desk scale only.
template <typename Scalar>
Scalar global_dual_lipschitz(const BlockProblem<Scalar>& problem) {
  const auto dense = assemble_dense(problem);
  return spectral_norm_sq(dense.G) / conjugate_strong_convexity(problem).sigma_f;
}

/**
 * Diagonal step-size matrix W. Constraint block j gets the weight
 * sum_{i in N_j} L_{d_i} on all of its equality and inequality rows.
 */
template <typename Scalar>
class Weights {
 public:
  Weights() = default;
  Weights(std::vector<Scalar> per_block, Vec<Scalar> diagonal)
      : per_block_(std::move(per_block)), diag_(std::move(diagonal)) {
    if (diag_.size() > 0) {
      min_ = diag_.minCoeff();
      max_ = diag_.maxCoeff();
    }
  }

  /// Uniform weights L * I, the centralized step.
  static Weights uniform(const BipartiteGraph& graph, Scalar value) {
    return Weights(std::vector<Scalar>(graph.num_dual(), value), Vec<Scalar>::Constant(graph.total_rows(), value));
  }

  Scalar block(Index j) const { return per_block_[j]; }
  const std::vector<Scalar>& per_block() const { return per_block_; }
  const Vec<Scalar>& diagonal() const { return diag_; }
  Scalar min() const { return min_; }  // lambda_min(W)
  Scalar max() const { return max_; }  // lambda_max(W)

  template <typename Derived>
  Scalar sq_norm(const Eigen::MatrixBase<Derived>& v) const {
    return (diag_.array() * v.array().square()).sum();
  }
  template <typename Derived>
  Scalar norm(const Eigen::MatrixBase<Derived>& v) const {
    return std::sqrt(sq_norm(v));
  }
  /// ||v||_{W^{-1}}.
  template <typename Derived>
  Scalar inv_norm(const Eigen::MatrixBase<Derived>& v) const {
    return std::sqrt((v.array().square() / diag_.array()).sum());
  }

 private:
  std::vector<Scalar> per_block_;
  Vec<Scalar> diag_;
  Scalar min_ = 0;
  Scalar max_ = 0;
};

template <typename Scalar>
Weights<Scalar> assemble_weights(const BlockProblem<Scalar>& problem, const std::vector<Scalar>& block_lipschitz) {
  const BipartiteGraph& gr = problem.graph();
  if (static_cast<Index>(block_lipschitz.size()) != gr.num_primal()) {
    throw StructuralError("assemble_weights: need one constant per primal block");
  }
  std::vector<Scalar> per_block(gr.num_dual(), Scalar(0));
  Vec<Scalar> diag(gr.total_rows());
  for (Index j = 0; j < gr.num_dual(); ++j) {
    Scalar w = 0;
    for (const auto& nb : gr.dual_neighbors(j)) w += block_lipschitz[nb.node];
    if (!(w > 0) && gr.p(j) + gr.q(j) > 0) {
      throw DegenerateWeights("assemble_weights: constraint block " + std::to_string(j) + " has zero weight");
    }
    per_block[j] = w;
    diag.segment(gr.nu_offset(j), gr.p(j)).setConstant(w);
    diag.segment(gr.mu_offset(j), gr.q(j)).setConstant(w);
  }
  return Weights<Scalar>(std::move(per_block), std::move(diag));
}

template <typename Scalar>
Weights<Scalar> compute_weights(const BlockProblem<Scalar>& problem) {
  return assemble_weights(problem, block_dual_lipschitz_all(problem));
}

template <typename Scalar>
struct TightnessInstance {
  BlockProblem<Scalar> problem;
  Vec<Scalar> direction;  // all-ones
};

/**
 * f_i = (sigma_i/2) z_i^2 with scalar blocks and an m x m equality matrix whose
 * pattern is circulant with omega ones per row and column; column i carries
 * the value sqrt(sigma_i). For h = ones the descent-lemma curvature
 * h' G Q^{-1} G' h equals ||h||_W^2.
 */
template <typename Scalar>
TightnessInstance<Scalar> tightness_instance(Index omega, Index m, const std::vector<Scalar>& sigmas = {}) {
  if (omega < 1 || omega > m) throw StructuralError("tightness_instance: need 1 <= omega <= m");
  std::vector<Scalar> sig = sigmas.empty() ? std::vector<Scalar>(m, Scalar(1)) : sigmas;
  if (static_cast<Index>(sig.size()) != m) throw StructuralError("tightness_instance: need m sigmas");

  std::vector<Edge> edges;
  typename BlockProblem<Scalar>::BlockMap blocks;
  for (Index r = 0; r < m; ++r) {
    for (Index s = 0; s < omega; ++s) {
      const Index i = (r + s) % m;
      edges.push_back({r, i});
      CouplingBlock<Scalar> blk;
      blk.A = Mat<Scalar>::Constant(1, 1, std::sqrt(sig[i]));
      blk.C = Mat<Scalar>(0, 1);
      blocks[{r, i}] = blk;
    }
  }
  BipartiteGraph graph(m, m, edges, std::vector<Index>(m, 1), std::vector<Index>(m, 1), std::vector<Index>(m, 0));
  std::vector<BlockObjective<Scalar>> objectives;
  for (Index i = 0; i < m; ++i) {
    objectives.emplace_back(Mat<Scalar>::Constant(1, 1, sig[i]), Vec<Scalar>::Zero(1));
  }
  auto problem = BlockProblem<Scalar>::from_blocks(std::move(graph), std::move(objectives), blocks,
                                                   Vec<Scalar>::Zero(m), Vec<Scalar>(0), Vec<Scalar>::Zero(m));
  return {std::move(problem), Vec<Scalar>::Ones(m)};
}

}  // namespace dualdg
