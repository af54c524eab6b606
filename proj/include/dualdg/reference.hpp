#pragma once

#include "dualdg/dual.hpp"
#include "dualdg/model.hpp"
#include "dualdg/stepsize.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace dualdg {

enum class ReferenceMethod {
  Accelerated,  // extrapolated W-step with gradient restart
  Plain,        // the weighted dual gradient iteration itself
};

struct ReferenceOptions {
  double prox_tolerance = 1e-10;
  double infeas_tolerance = 1e-8;
  Index max_iterations = 10000000;
  ReferenceMethod method = ReferenceMethod::Accelerated;
  Index check_every = 20;  // accelerated method: exact residual test interval
  int jobs = 1;
};

namespace detail {

template <typename Scalar>
RefSolution<Scalar> finish_reference(const BlockProblem<Scalar>& problem, Vec<Scalar> lambda,
                                     DualEvaluation<Scalar> ev, Scalar prox, Index iterations,
                                     const ReferenceOptions& options) {
  RefSolution<Scalar> ref;
  ref.quality.prox_w = prox;
  ref.quality.iterations = iterations;
  ref.quality.infeas = project_onto_domain<Scalar>(problem, ev.grad).norm();
  ref.z_star = std::move(ev.z);
  ref.lambda_ref = std::move(lambda);
  if (ref.quality.infeas <= Scalar(options.infeas_tolerance)) {
    ref.f_star = eval_objective<Scalar>(problem, ref.z_star);
  } else {
    ref.f_star = ev.value;
    ref.quality.f_from_dual = true;
  }
  ref.quality.low_quality = prox > Scalar(options.prox_tolerance) || ref.quality.f_from_dual;
  return ref;
}

}  // namespace detail

/**
 * Ground truth for metrics and stopping rules. Both methods start from zero
 * and stop once ||prox residual||_W <= 1e-10 at the returned multiplier.
 * f_star is f(z(lambda)) when the primal point is feasible to 1e-8 and
 * d(lambda) otherwise; either shortfall sets quality.low_quality rather than
 * throwing.
 *
 * The accelerated method takes the W-step from the extrapolated point
 * lambda^k + (t_k - 1)/t_{k+1} (lambda^k - lambda^{k-1}) and resets the
 * momentum whenever the step points against the last displacement.
 */
template <typename Scalar>
RefSolution<Scalar> solve_reference(const BlockProblem<Scalar>& problem, const Weights<Scalar>& W,
                                    const ReferenceOptions& options = {}) {
  const BipartiteGraph& gr = problem.graph();
  const Scalar tol = Scalar(options.prox_tolerance);
  Vec<Scalar> lambda = Vec<Scalar>::Zero(gr.total_rows());

  if (options.method == ReferenceMethod::Plain) {
    for (Index k = 0;; ++k) {
      DualEvaluation<Scalar> ev = evaluate_dual(problem, lambda, options.jobs);
      Vec<Scalar> next = projected_step<Scalar>(problem, lambda, ev.grad, W.diagonal());
      const Scalar prox = W.norm(next - lambda);
      if (prox <= tol || k >= options.max_iterations) {
        return detail::finish_reference(problem, std::move(lambda), std::move(ev), prox, k, options);
      }
      lambda = std::move(next);
    }
  }

  Vec<Scalar> previous = lambda;
  Scalar t = 1;
  const Index every = std::max<Index>(options.check_every, 1);
  for (Index k = 0;; ++k) {
    if (k % every == 0 || k >= options.max_iterations) {
      DualEvaluation<Scalar> ev = evaluate_dual(problem, lambda, options.jobs);
      const Scalar prox = W.norm(projected_step<Scalar>(problem, lambda, ev.grad, W.diagonal()) - lambda);
      if (prox <= tol || k >= options.max_iterations) {
        return detail::finish_reference(problem, std::move(lambda), std::move(ev), prox, k, options);
      }
    }
    Scalar t_next = Scalar(0.5) * (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * t * t));
    const Vec<Scalar> y = lambda + ((t - Scalar(1)) / t_next) * (lambda - previous);
    const DualEvaluation<Scalar> ey = evaluate_dual(problem, y, options.jobs);
    Vec<Scalar> next = projected_step<Scalar>(problem, y, ey.grad, W.diagonal());
    if ((W.diagonal().array() * (y - next).array() * (next - lambda).array()).sum() > Scalar(0)) t_next = 1;
    previous = std::move(lambda);
    lambda = std::move(next);
    t = t_next;
  }
}

template <typename Scalar>
RefSolution<Scalar> solve_reference(const BlockProblem<Scalar>& problem, const ReferenceOptions& options = {}) {
  return solve_reference(problem, compute_weights(problem), options);
}

template <typename Scalar>
struct KktSolution {
  Vec<Scalar> z;
  Vec<Scalar> nu;
};

/// Solves [Q A'; A 0][z; nu] = [-q; b] densely. Quadratic, equality-only problems.
template <typename Scalar>
KktSolution<Scalar> kkt_solve_equality(const BlockProblem<Scalar>& problem) {
  const BipartiteGraph& gr = problem.graph();
  if (!problem.all_quadratic()) throw UnsupportedInstance("kkt_solve_equality: objectives must be quadratic");
  if (gr.total_q() != 0) throw UnsupportedInstance("kkt_solve_equality: inequality rows present");
  const Index n = gr.total_n();
  const Index p = gr.total_p();
  Mat<Scalar> K = Mat<Scalar>::Zero(n + p, n + p);
  Vec<Scalar> rhs(n + p);
  for (Index i = 0; i < gr.num_primal(); ++i) {
    K.block(gr.col_offset(i), gr.col_offset(i), gr.n(i), gr.n(i)) = problem.objective(i).Q();
    rhs.segment(gr.col_offset(i), gr.n(i)) = -problem.objective(i).q();
  }
  const Mat<Scalar> A = assemble_equality(problem);
  K.block(n, 0, p, n) = A;
  K.block(0, n, n, p) = A.transpose();
  rhs.tail(p) = problem.b();
  Eigen::FullPivLU<Mat<Scalar>> lu(K);
  lu.setThreshold(Scalar(1e-12));
  if (!lu.isInvertible()) throw RankError("kkt_solve_equality: KKT system is singular");
  const Vec<Scalar> sol = lu.solve(rhs);
  return {sol.head(n), sol.tail(p)};
}

}  // namespace dualdg
