#pragma once

#include "dualdg/model.hpp"
#include "dualdg/oracles.hpp"
#include "dualdg/parallel.hpp"
#include "dualdg/stepsize.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualdg {

namespace detail {

// The accumulation helpers below are shared by the monolithic driver and the
// message-passing simulator; both must perform the same floating-point
// operations in the same order.

// acc += A' nu + C' mu
template <typename Scalar>
void accumulate_transposed(Vec<Scalar>& acc, const Mat<Scalar>& A, const Mat<Scalar>& C,
                           const VecView<Scalar>& nu, const VecView<Scalar>& mu) {
  const Vec<Scalar> from_eq = A.transpose() * nu;
  acc += from_eq;
  const Vec<Scalar> from_in = C.transpose() * mu;
  acc += from_in;
}

template <typename Scalar>
Vec<Scalar> block_product(const Mat<Scalar>& B, const VecView<Scalar>& z) {
  Vec<Scalar> out = B * z;
  return out;
}

// One projected weighted step on a single coordinate range.
template <typename Scalar>
void weighted_update(Eigen::Ref<Vec<Scalar>> out, const VecView<Scalar>& lambda,
                     const VecView<Scalar>& grad, const VecView<Scalar>& weight,
                     bool nonnegative) {
  for (Index k = 0; k < out.size(); ++k) {
    Scalar v = lambda(k) + grad(k) / weight(k);
    if (nonnegative && v < Scalar(0)) v = Scalar(0);
    out(k) = v;
  }
}

}  // namespace detail

template <typename Scalar>
struct DualEvaluation {
  Scalar value;        // d(lambda)
  Vec<Scalar> grad;    // G z(lambda) - g
  Vec<Scalar> z;       // z(lambda), stacked blocks
};

/// w_i = sum_{j in N_bar_i} A_ji' nu_j + C_ji' mu_j, j ascending.
template <typename Scalar>
Vec<Scalar> coupling_input(const BlockProblem<Scalar>& problem, Index i, const VecView<Scalar>& lambda) {
  const BipartiteGraph& gr = problem.graph();
  Vec<Scalar> w = Vec<Scalar>::Zero(gr.n(i));
  for (const auto& nb : gr.primal_neighbors(i)) {
    const auto& blk = problem.block(nb.edge);
    detail::accumulate_transposed<Scalar>(w, blk.A, blk.C, lambda.segment(gr.nu_offset(nb.node), gr.p(nb.node)),
                                          lambda.segment(gr.mu_offset(nb.node), gr.q(nb.node)));
  }
  return w;
}

/**
 * Solves every block subproblem at lambda and returns d(lambda), its gradient
 * G z - g and the minimizer z. Block solves may run on `jobs` threads; the
 * per-constraint-block reductions always run i-ascending, so the result does
 * not depend on the thread count.
 *
 * The value uses the separable form sum_i d_i - <nu, b> - <mu, c>.
 */
template <typename Scalar>
DualEvaluation<Scalar> evaluate_dual(const BlockProblem<Scalar>& problem, const VecView<Scalar>& lambda,
                                     int jobs = 1) {
  const BipartiteGraph& gr = problem.graph();
  DualEvaluation<Scalar> out;
  out.z.resize(gr.total_n());
  std::vector<Scalar> local(gr.num_primal());
  parallel_for(gr.num_primal(), jobs, [&](std::ptrdiff_t i) {
    const Vec<Scalar> w = coupling_input(problem, i, lambda);
    const Vec<Scalar> zi = solve_block(problem.objective(i), w);
    local[i] = problem.objective(i).value(zi) + w.dot(zi);
    out.z.segment(gr.col_offset(i), gr.n(i)) = zi;
  });

  out.value = 0;
  for (Index i = 0; i < gr.num_primal(); ++i) out.value += local[i];
  out.value -= lambda.head(gr.total_p()).dot(problem.b());
  out.value -= lambda.tail(gr.total_q()).dot(problem.c());

  out.grad.resize(gr.total_rows());
  for (Index j = 0; j < gr.num_dual(); ++j) {
    Vec<Scalar> eq = Vec<Scalar>::Zero(gr.p(j));
    Vec<Scalar> in = Vec<Scalar>::Zero(gr.q(j));
    for (const auto& nb : gr.dual_neighbors(j)) {
      const auto zi = out.z.segment(gr.col_offset(nb.node), gr.n(nb.node));
      eq += detail::block_product<Scalar>(problem.block(nb.edge).A, zi);
      in += detail::block_product<Scalar>(problem.block(nb.edge).C, zi);
    }
    eq -= problem.b_block(j);
    in -= problem.c_block(j);
    out.grad.segment(gr.nu_offset(j), gr.p(j)) = eq;
    out.grad.segment(gr.mu_offset(j), gr.q(j)) = in;
  }
  return out;
}

template <typename Scalar>
struct DualGradient {
  Vec<Scalar> grad;
  Vec<Scalar> z;
};

template <typename Scalar>
DualGradient<Scalar> dual_gradient(const BlockProblem<Scalar>& problem, const VecView<Scalar>& lambda) {
  auto ev = evaluate_dual(problem, lambda);
  return {std::move(ev.grad), std::move(ev.z)};
}

template <typename Scalar>
Scalar dual_value(const BlockProblem<Scalar>& problem, const VecView<Scalar>& lambda) {
  return evaluate_dual(problem, lambda).value;
}

/// d(lambda) as L(z(lambda), lambda); the second route to the dual value.
template <typename Scalar>
Scalar dual_value_lagrangian(const BlockProblem<Scalar>& problem, const VecView<Scalar>& lambda) {
  const auto ev = evaluate_dual(problem, lambda);
  return eval_lagrangian<Scalar>(problem, ev.z, lambda);
}

/// Projection onto R^p x R^q_+: nu unchanged, mu clamped at zero. For any
/// positive diagonal W this is also the W-weighted projection.
template <typename Scalar>
Vec<Scalar> project_onto_domain(const BlockProblem<Scalar>& problem, const VecView<Scalar>& raw) {
  Vec<Scalar> out = raw;
  const Index p = problem.graph().total_p();
  out.tail(out.size() - p) = out.tail(out.size() - p).cwiseMax(Scalar(0));
  return out;
}

/// [lambda + D^{-1} grad]_D for a positive diagonal D.
template <typename Scalar>
Vec<Scalar> projected_step(const BlockProblem<Scalar>& problem, const VecView<Scalar>& lambda,
                           const VecView<Scalar>& grad, const VecView<Scalar>& diag) {
  const Index p = problem.graph().total_p();
  const Index q = problem.graph().total_q();
  Vec<Scalar> out(lambda.size());
  detail::weighted_update<Scalar>(out.head(p), lambda.head(p), grad.head(p), diag.head(p), false);
  detail::weighted_update<Scalar>(out.tail(q), lambda.tail(q), grad.tail(q), diag.tail(q), true);
  return out;
}

template <typename Scalar>
struct ProxResidual {
  Vec<Scalar> residual;
  Scalar norm_w;
};

/// [lambda + W^{-1} grad]_D - lambda with a known gradient.
template <typename Scalar>
ProxResidual<Scalar> prox_residual_from_gradient(const BlockProblem<Scalar>& problem, const Weights<Scalar>& W,
                                                 const VecView<Scalar>& lambda,
                                                 const VecView<Scalar>& grad) {
  Vec<Scalar> res = projected_step<Scalar>(problem, lambda, grad, W.diagonal()) - lambda;
  const Scalar n = W.norm(res);
  return {std::move(res), n};
}

template <typename Scalar>
ProxResidual<Scalar> prox_residual(const BlockProblem<Scalar>& problem, const VecView<Scalar>& lambda,
                                   const Weights<Scalar>& W) {
  const auto ev = evaluate_dual(problem, lambda);
  return prox_residual_from_gradient<Scalar>(problem, W, lambda, ev.grad);
}

template <typename Scalar>
struct StepResult {
  Vec<Scalar> next;              // lambda^{k+1}
  DualEvaluation<Scalar> at;     // d, grad, z at lambda^k
};

/// lambda^{k+1} = [lambda^k + W^{-1} grad d(lambda^k)]_D.
template <typename Scalar>
StepResult<Scalar> dg_step(const BlockProblem<Scalar>& problem, const Weights<Scalar>& W,
                           const VecView<Scalar>& lambda, int jobs = 1) {
  StepResult<Scalar> out{Vec<Scalar>(), evaluate_dual(problem, lambda, jobs)};
  out.next = projected_step<Scalar>(problem, lambda, out.at.grad, W.diagonal());
  return out;
}

/// lambda^{k+1} = [lambda^k + grad d(lambda^k) / L_d]_D.
template <typename Scalar>
StepResult<Scalar> cg_step(const BlockProblem<Scalar>& problem, Scalar global_lipschitz,
                           const VecView<Scalar>& lambda, int jobs = 1) {
  StepResult<Scalar> out{Vec<Scalar>(), evaluate_dual(problem, lambda, jobs)};
  const Vec<Scalar> diag = Vec<Scalar>::Constant(lambda.size(), global_lipschitz);
  out.next = projected_step<Scalar>(problem, lambda, out.at.grad, diag);
  return out;
}

/// High-accuracy solution used as ground truth for metrics.
template <typename Scalar>
struct RefSolution {
  Vec<Scalar> z_star;
  Scalar f_star = 0;
  Vec<Scalar> lambda_ref;
  struct Quality {
    Scalar prox_w = 0;     // ||prox residual||_W at lambda_ref
    Scalar infeas = 0;     // ||[G z* - g]_D||
    Index iterations = 0;
    bool f_from_dual = false;  // f_star fell back to d(lambda_ref)
    bool low_quality = false;
  } quality;
};

template <typename Scalar>
struct MetricRow {
  Scalar dual_subopt;    // f* - d(lambda)
  Scalar primal_subopt;  // f(z) - f*, signed
  Scalar infeas_w;       // ||[Gz - g]_D||_{W^{-1}}
  Scalar dist_z;         // ||z - z*||
};

/// ||[r]_D||_{W^{-1}} for a constraint residual r = Gz - g.
template <typename Scalar>
Scalar weighted_infeasibility(const BlockProblem<Scalar>& problem, const Weights<Scalar>& W,
                              const VecView<Scalar>& residual) {
  return W.inv_norm(project_onto_domain<Scalar>(problem, residual));
}

template <typename Scalar>
MetricRow<Scalar> metrics(const BlockProblem<Scalar>& problem, const Weights<Scalar>& W,
                          const RefSolution<Scalar>& reference, const VecView<Scalar>& z,
                          const VecView<Scalar>& lambda) {
  Vec<Scalar> g(problem.graph().total_rows());
  g << problem.b(), problem.c();
  const Vec<Scalar> residual = apply_constraints<Scalar>(problem, z) - g;
  MetricRow<Scalar> row;
  row.dual_subopt = reference.f_star - dual_value<Scalar>(problem, lambda);
  row.primal_subopt = eval_objective<Scalar>(problem, z) - reference.f_star;
  row.infeas_w = weighted_infeasibility<Scalar>(problem, W, residual);
  row.dist_z = (z - reference.z_star).norm();
  return row;
}

enum class Algorithm { DG, CG };
enum class StopMode { RelativePrimal, ProxResidual, IterationCap };
enum class RunStatus { Converged, CapReached };

inline const char* to_string(Algorithm a) { return a == Algorithm::DG ? "dg" : "cg"; }
inline const char* to_string(RunStatus s) { return s == RunStatus::Converged ? "converged" : "cap_reached"; }
inline const char* to_string(StopMode m) {
  switch (m) {
    case StopMode::RelativePrimal: return "rel";
    case StopMode::ProxResidual: return "prox";
    case StopMode::IterationCap: return "cap";
  }
  return "?";
}

/// Stop when |f(z^k) - f*| / |f*| <= eps (rel), ||prox residual||_W <= eps
/// (prox), or only at the cap.
struct StopRule {
  StopMode mode = StopMode::ProxResidual;
  double eps = 1e-8;
  Index cap = 1000000;

  void check() const {
    if (!(eps > 0)) throw std::invalid_argument("stop rule: eps must be positive");
    if (cap < 1) throw std::invalid_argument("stop rule: cap must be at least 1");
  }
};

template <typename Scalar>
struct TraceRow {
  Index k;
  Scalar dual;
  Scalar f;
  Scalar dual_subopt;
  Scalar primal_subopt;
  Scalar infeas_w;
  Scalar dist_z;
  Scalar step_w;  // ||lambda^{k+1} - lambda^k||_W
  Scalar prox_w;  // ||prox residual at lambda^k||_W
};

template <typename Scalar>
struct RunTrace {
  std::vector<TraceRow<Scalar>> rows;
  RunStatus status = RunStatus::CapReached;
  Index iterations = 0;  // index k of the last row
  Algorithm algorithm = Algorithm::DG;
  StopRule stop;
  std::optional<std::uint64_t> seed;
  Index ascent_violations = 0;
  double seconds = 0;
  Vec<Scalar> final_lambda;
  Vec<Scalar> final_z;
  std::vector<Vec<Scalar>> iterates;  // lambda^0..lambda^K when requested
};

struct RunOptions {
  int jobs = 1;
  bool check_ascent = true;
  bool keep_iterates = false;
};

inline constexpr double kAscentSlack = 1e-9;

/**
 * Runs DG (weighted step W^{-1}) or CG (centralized step 1/L_d) from lambda0.
 *
 * Row k of the trace describes lambda^k and z^k = z(lambda^k). Reference-based
 * columns are NaN without a reference. When check_ascent is set, every
 * consecutive pair is tested against d(l+) >= d(l) + 1/2 ||l+ - l||^2_S with S
 * the step matrix (W or L_d I), counting violations in the trace.
 */
template <typename Scalar>
RunTrace<Scalar> run(const BlockProblem<Scalar>& problem, Algorithm algo, const Weights<Scalar>& W,
                     Scalar global_lipschitz, const VecView<Scalar>& lambda0, const StopRule& stop,
                     const RefSolution<Scalar>* reference = nullptr, const RunOptions& options = {}) {
  stop.check();
  if (!in_domain<Scalar>(problem, lambda0)) throw std::invalid_argument("run: lambda0 is not in the dual domain");
  if (stop.mode == StopMode::RelativePrimal && reference == nullptr) {
    throw std::invalid_argument("run: relative stopping rule needs a reference solution");
  }
  if (algo == Algorithm::CG && !(global_lipschitz > 0)) {
    throw std::invalid_argument("run: CG needs a positive global Lipschitz constant");
  }

  const auto t0 = std::chrono::steady_clock::now();
  const Scalar nan = std::numeric_limits<Scalar>::quiet_NaN();
  const Vec<Scalar> step_diag =
      algo == Algorithm::DG ? W.diagonal() : Vec<Scalar>::Constant(lambda0.size(), global_lipschitz);

  RunTrace<Scalar> trace;
  trace.algorithm = algo;
  trace.stop = stop;
  trace.seed = problem.seed;

  Vec<Scalar> lambda = lambda0;
  Scalar prev_value = 0;
  Scalar prev_step_sq = 0;
  for (Index k = 0;; ++k) {
    DualEvaluation<Scalar> ev = evaluate_dual(problem, lambda, options.jobs);
    Vec<Scalar> next = projected_step<Scalar>(problem, lambda, ev.grad, step_diag);
    const Vec<Scalar> step = next - lambda;

    if (options.check_ascent && k > 0) {
      const Scalar slack = Scalar(kAscentSlack) * std::max(Scalar(1), std::abs(prev_value));
      if (ev.value - prev_value < Scalar(0.5) * prev_step_sq - slack) ++trace.ascent_violations;
    }

    TraceRow<Scalar> row{k, ev.value, eval_objective<Scalar>(problem, ev.z), nan, nan, nan, nan, W.norm(step), nan};
    if (algo == Algorithm::DG) {
      row.prox_w = W.norm(step);
    } else {
      row.prox_w = prox_residual_from_gradient<Scalar>(problem, W, lambda, ev.grad).norm_w;
    }
    if (reference != nullptr) {
      row.dual_subopt = reference->f_star - ev.value;
      row.primal_subopt = row.f - reference->f_star;
      row.infeas_w = weighted_infeasibility<Scalar>(problem, W, ev.grad);
      row.dist_z = (ev.z - reference->z_star).norm();
    }
    trace.rows.push_back(row);
    if (options.keep_iterates) trace.iterates.push_back(lambda);

    bool converged = false;
    switch (stop.mode) {
      case StopMode::RelativePrimal: {
        const Scalar denom = reference->f_star != Scalar(0) ? std::abs(reference->f_star) : Scalar(1);
        converged = std::abs(row.primal_subopt) / denom <= Scalar(stop.eps);
        break;
      }
      case StopMode::ProxResidual:
        converged = row.prox_w <= Scalar(stop.eps);
        break;
      case StopMode::IterationCap:
        break;
    }
    if (converged || k >= stop.cap) {
      trace.status = converged ? RunStatus::Converged : RunStatus::CapReached;
      trace.iterations = k;
      trace.final_lambda = std::move(lambda);
      trace.final_z = std::move(ev.z);
      break;
    }

    prev_value = ev.value;
    prev_step_sq = (step.array().square() * step_diag.array()).sum();
    lambda = std::move(next);
  }
  trace.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return trace;
}

/// Least-squares line through (k, log10 value) and its coefficient of determination.
struct LogLinearFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  std::size_t points = 0;
};

/// Fits log10(values[k]) against k over [begin, end), skipping entries below
/// `floor` or non-finite.
inline LogLinearFit fit_log10(const std::vector<double>& values, std::size_t begin, std::size_t end,
                              double floor = 1e-12) {
  std::vector<double> xs, ys;
  for (std::size_t k = begin; k < end && k < values.size(); ++k) {
    const double v = values[k];
    if (!std::isfinite(v) || v < floor) continue;
    xs.push_back(static_cast<double>(k));
    ys.push_back(std::log10(v));
  }
  LogLinearFit fit;
  fit.points = xs.size();
  if (xs.size() < 2) return fit;
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    mx += xs[t];
    my += ys[t];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    sxx += (xs[t] - mx) * (xs[t] - mx);
    sxy += (xs[t] - mx) * (ys[t] - my);
    syy += (ys[t] - my) * (ys[t] - my);
  }
  fit.slope = sxx > 0 ? sxy / sxx : 0;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = (sxx > 0 && syy > 0) ? (sxy * sxy) / (sxx * syy) : (syy == 0 ? 1.0 : 0.0);
  return fit;
}

}  // namespace dualdg
