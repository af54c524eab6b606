#pragma once

#include "dualdg/model.hpp"
#include "dualdg/objective.hpp"

#include <algorithm>
#include <limits>

namespace dualdg {

template <typename Scalar>
struct ConvexityConstants {
  Scalar sigma_conjugate;  // sum_i 1/L_i, strong convexity of the conjugate of f
  Scalar sigma_f;          // min_i sigma_i
};

template <typename Scalar>
ConvexityConstants<Scalar> conjugate_strong_convexity(const BlockProblem<Scalar>& problem) {
  ConvexityConstants<Scalar> out{0, std::numeric_limits<Scalar>::infinity()};
  for (const auto& obj : problem.objectives()) {
    out.sigma_conjugate += Scalar(1) / obj.constants().lipschitz;
    out.sigma_f = std::min(out.sigma_f, obj.constants().sigma);
  }
  return out;
}

/// f(z) = sum_i f_i(z_i).
template <typename Scalar>
Scalar eval_objective(const BlockProblem<Scalar>& problem, const VecView<Scalar>& z) {
  const BipartiteGraph& gr = problem.graph();
  Scalar f = 0;
  for (Index i = 0; i < gr.num_primal(); ++i) {
    f += problem.objective(i).value(z.segment(gr.col_offset(i), gr.n(i)));
  }
  return f;
}

/// f(z) + <nu, Az - b> + <mu, Cz - c>, accumulated per constraint block.
template <typename Scalar>
Scalar eval_lagrangian(const BlockProblem<Scalar>& problem, const VecView<Scalar>& z,
                       const VecView<Scalar>& lambda) {
  const BipartiteGraph& gr = problem.graph();
  Scalar value = eval_objective(problem, z);
  for (Index j = 0; j < gr.num_dual(); ++j) {
    Vec<Scalar> eq = -problem.b_block(j);
    Vec<Scalar> in = -problem.c_block(j);
    for (const auto& nb : gr.dual_neighbors(j)) {
      const auto zi = z.segment(gr.col_offset(nb.node), gr.n(nb.node));
      eq += problem.block(nb.edge).A * zi;
      in += problem.block(nb.edge).C * zi;
    }
    value += lambda.segment(gr.nu_offset(j), gr.p(j)).dot(eq);
    value += lambda.segment(gr.mu_offset(j), gr.q(j)).dot(in);
  }
  return value;
}

}  // namespace dualdg
