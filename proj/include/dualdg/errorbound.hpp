#pragma once

#include "dualdg/dual.hpp"
#include "dualdg/model.hpp"
#include "dualdg/random.hpp"
#include "dualdg/stepsize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace dualdg {

/// RHS - LHS of an inequality LHS <= RHS, with the magnitude used for the
/// relative slack.
template <typename Scalar>
struct Margin {
  Scalar margin = 0;
  Scalar scale = 1;
  bool violated(Scalar relative_slack) const { return margin < -relative_slack * scale; }
  Scalar relative() const { return margin / scale; }
};

/// A dual point with everything the inequality checks need.
template <typename Scalar>
struct DualSample {
  Vec<Scalar> lambda;
  DualEvaluation<Scalar> eval;
  Vec<Scalar> prox;  // prox residual
};

template <typename Scalar>
DualSample<Scalar> sample_at(const BlockProblem<Scalar>& problem, const Weights<Scalar>& W,
                             const VecView<Scalar>& lambda) {
  DualSample<Scalar> s{lambda, evaluate_dual(problem, lambda), Vec<Scalar>()};
  s.prox = prox_residual_from_gradient<Scalar>(problem, W, lambda, s.eval.grad).residual;
  return s;
}

/// <grad d(w) - grad d(l), l - w> <= 2 ||prox(l) - prox(w)||_W ||l - w||_W.
template <typename Scalar>
Margin<Scalar> gradient_residual_margin(const Weights<Scalar>& W, const DualSample<Scalar>& l, const DualSample<Scalar>& w) {
  const Vec<Scalar> diff = l.lambda - w.lambda;
  const Scalar lhs = (w.eval.grad - l.eval.grad).dot(diff);
  const Scalar rhs = Scalar(2) * W.norm(l.prox - w.prox) * W.norm(diff);
  return {rhs - lhs, std::max({Scalar(1), std::abs(lhs), std::abs(rhs)})};
}

template <typename Scalar>
Margin<Scalar> check_gradient_residual(const BlockProblem<Scalar>& problem, const Weights<Scalar>& W,
                            const VecView<Scalar>& lambda, const VecView<Scalar>& omega) {
  return gradient_residual_margin(W, sample_at(problem, W, lambda), sample_at(problem, W, omega));
}

/// ||prox(l) - prox(m)||_W <= 3 ||l - m||_W.
template <typename Scalar>
Margin<Scalar> lipschitz3_margin(const Weights<Scalar>& W, const DualSample<Scalar>& l, const DualSample<Scalar>& m) {
  const Scalar lhs = W.norm(l.prox - m.prox);
  const Scalar rhs = Scalar(3) * W.norm(l.lambda - m.lambda);
  return {rhs - lhs, std::max({Scalar(1), lhs, rhs})};
}

template <typename Scalar>
Margin<Scalar> check_prox_lipschitz3(const BlockProblem<Scalar>& problem, const Weights<Scalar>& W,
                                     const VecView<Scalar>& lambda,
                                     const VecView<Scalar>& other) {
  return lipschitz3_margin(W, sample_at(problem, W, lambda), sample_at(problem, W, other));
}

/// d(l) >= d(lb) + <grad d(lb), l - lb> - 1/2 ||l - lb||_W^2.
template <typename Scalar>
Margin<Scalar> descent_margin(const Weights<Scalar>& W, const DualSample<Scalar>& l, const DualSample<Scalar>& lb) {
  const Vec<Scalar> diff = l.lambda - lb.lambda;
  const Scalar quad = Scalar(0.5) * W.sq_norm(diff);
  const Scalar lin = lb.eval.grad.dot(diff);
  const Scalar model = lb.eval.value + lin - quad;
  const Scalar scale = std::max({Scalar(1), std::abs(l.eval.value), std::abs(lb.eval.value), std::abs(lin), quad});
  return {l.eval.value - model, scale};
}

template <typename Scalar>
Margin<Scalar> check_descent_lemma(const BlockProblem<Scalar>& problem, const Weights<Scalar>& W,
                                   const VecView<Scalar>& lambda,
                                   const VecView<Scalar>& lambda_bar) {
  return descent_margin(W, sample_at(problem, W, lambda), sample_at(problem, W, lambda_bar));
}

template <typename Scalar>
struct CampaignReport {
  Index pairs = 0;
  Index descent_violations = 0;
  Index gradient_residual_violations = 0;
  Index lipschitz3_violations = 0;
  Scalar worst_descent = std::numeric_limits<Scalar>::infinity();  // smallest relative margin
  Scalar worst_gradient_residual = std::numeric_limits<Scalar>::infinity();
  Scalar worst_lipschitz3 = std::numeric_limits<Scalar>::infinity();

  Index violations() const { return descent_violations + gradient_residual_violations + lipschitz3_violations; }
};

inline constexpr std::array<double, 3> kProbeRadii{0.1, 1.0, 10.0};
inline constexpr double kInequalitySlack = 1e-8;

/// Uniform sample from the Euclidean ball of the given radius.
inline Vec<double> ball_sample(Rng& rng, Index dim, double radius) {
  Vec<double> u(dim);
  for (Index k = 0; k < dim; ++k) u(k) = rng.normal();
  const double norm = u.norm();
  if (norm > 0) u /= norm;
  return u * (radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim)));
}

/**
 * Evaluates the descent lemma, the gradient/residual inequality and the
 * 3-Lipschitz property of the prox residual on `pairs` point pairs. Pair s
 * uses radius kProbeRadii[s % 3]; both points are center + ball sample,
 * projected onto the dual domain. Results are reduced in sample order.
 */
inline CampaignReport<double> inequality_campaign(const BlockProblem<double>& problem, const Weights<double>& W,
                                                  const Vec<double>& center, Index pairs, std::uint64_t seed,
                                                  double relative_slack = kInequalitySlack) {
  Rng rng(seed);
  CampaignReport<double> rep;
  rep.pairs = pairs;
  const Index dim = center.size();
  for (Index s = 0; s < pairs; ++s) {
    const double radius = kProbeRadii[static_cast<std::size_t>(s) % kProbeRadii.size()];
    const Vec<double> a = project_onto_domain<double>(problem, center + ball_sample(rng, dim, radius));
    const Vec<double> b = project_onto_domain<double>(problem, center + ball_sample(rng, dim, radius));
    const auto sa = sample_at(problem, W, a);
    const auto sb = sample_at(problem, W, b);

    const auto d = descent_margin(W, sa, sb);
    const auto gres = gradient_residual_margin(W, sa, sb);
    const auto l3 = lipschitz3_margin(W, sa, sb);
    rep.descent_violations += d.violated(relative_slack);
    rep.gradient_residual_violations += gres.violated(relative_slack);
    rep.lipschitz3_violations += l3.violated(relative_slack);
    rep.worst_descent = std::min(rep.worst_descent, d.relative());
    rep.worst_gradient_residual = std::min(rep.worst_gradient_residual, gres.relative());
    rep.worst_lipschitz3 = std::min(rep.worst_lipschitz3, l3.relative());
  }
  return rep;
}

/// Symmetric G Q^{-1} G' for quadratic problems, built block by block.
template <typename Scalar>
Mat<Scalar> dual_hessian(const BlockProblem<Scalar>& problem) {
  if (!problem.all_quadratic()) throw UnsupportedInstance("dual_hessian: objectives must be quadratic");
  const BipartiteGraph& gr = problem.graph();
  const auto dense = assemble_dense(problem);
  Mat<Scalar> QinvGt(gr.total_n(), gr.total_rows());
  for (Index i = 0; i < gr.num_primal(); ++i) {
    const auto rows = dense.G.middleCols(gr.col_offset(i), gr.n(i)).transpose();
    for (Index r = 0; r < gr.total_rows(); ++r) {
      QinvGt.block(gr.col_offset(i), r, gr.n(i), 1) = problem.objective(i).apply_inverse(rows.col(r));
    }
  }
  Mat<Scalar> H = dense.G * QinvGt;
  return Scalar(0.5) * (H + H.transpose());
}

/// lambda_min(W^{-1/2} G Q^{-1} G' W^{-1/2}): the strong concavity modulus of d
/// in the W-norm for quadratic problems.
template <typename Scalar>
Scalar strong_concavity_modulus(const BlockProblem<Scalar>& problem, const Weights<Scalar>& W) {
  const Mat<Scalar> H = dual_hessian(problem);
  const Vec<Scalar> s = W.diagonal().cwiseSqrt().cwiseInverse();
  const Mat<Scalar> scaled = s.asDiagonal() * H * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(scaled, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

template <typename Scalar>
struct ProbeReport {
  std::vector<Index> k;         // iterate index of each ratio
  std::vector<Scalar> ratios;   // ||l^k - l*||_W / ||prox(l^k)||_W
  Index excluded = 0;           // denominator <= 1e-9
  Index nonfinite = 0;
  Scalar kappa_hat = 0;         // max ratio
  Scalar median = 0;
  std::optional<Scalar> kappa_bound;  // 2 / sigma_{d,W}, quadratic problems only

  bool bounded() const {
    return nonfinite == 0 && (ratios.empty() || median <= 0 || kappa_hat / median <= Scalar(1e3));
  }
  bool within_bound(Scalar tolerance = Scalar(0.01)) const {
    return kappa_bound && kappa_hat <= (Scalar(1) + tolerance) * *kappa_bound;
  }
};

inline constexpr double kProbeMinDenominator = 1e-9;

/**
 * Measures the error-bound constant along dual iterates. Needs G of full row
 * rank so that the optimal multiplier is unique and lambda_ref is it.
 */
template <typename Scalar>
ProbeReport<Scalar> probe_error_bound(const BlockProblem<Scalar>& problem, const Weights<Scalar>& W,
                                      const std::vector<Vec<Scalar>>& iterates, const RefSolution<Scalar>& reference) {
  const auto dense = assemble_dense(problem);
  if (dense.G.rows() > dense.G.cols()) throw UnsupportedInstance("probe_error_bound: G has more rows than columns");
  Eigen::BDCSVD<Mat<Scalar>> svd(dense.G);
  const auto& sv = svd.singularValues();
  const Index rank = (sv.array() > Scalar(kRankTolerance) * sv(0)).count();
  if (rank < dense.G.rows()) throw UnsupportedInstance("probe_error_bound: G is not of full row rank");

  ProbeReport<Scalar> rep;
  for (std::size_t k = 0; k < iterates.size(); ++k) {
    const Scalar denom = prox_residual<Scalar>(problem, iterates[k], W).norm_w;
    if (!(denom > Scalar(kProbeMinDenominator))) {
      ++rep.excluded;
      continue;
    }
    const Scalar ratio = W.norm(iterates[k] - reference.lambda_ref) / denom;
    if (!std::isfinite(static_cast<double>(ratio))) {
      ++rep.nonfinite;
      continue;
    }
    rep.k.push_back(static_cast<Index>(k));
    rep.ratios.push_back(ratio);
  }
  if (!rep.ratios.empty()) {
    rep.kappa_hat = *std::max_element(rep.ratios.begin(), rep.ratios.end());
    std::vector<Scalar> sorted = rep.ratios;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    rep.median = m % 2 ? sorted[m / 2] : Scalar(0.5) * (sorted[m / 2 - 1] + sorted[m / 2]);
  }
  if (problem.all_quadratic()) rep.kappa_bound = Scalar(2) / strong_concavity_modulus(problem, W);
  return rep;
}

}  // namespace dualdg
