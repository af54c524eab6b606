#pragma once

// Dense reference computations used only by tests. They share no code with
// the blockwise library paths: G is placed from raw offsets, the inner
// problem is solved by a full-Hessian Newton method on the stacked variable,
// and spectral quantities come from dense decompositions.

#include "dualdg/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

using dualdg::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Dense {
  Mat G;
  Vec g;
  Mat Q;  // block diagonal
  Vec q;
  std::vector<double> gamma;  // per block
  std::vector<Vec> a;         // per block, embedded in R^n
  Index p = 0;                // equality rows
};

inline Dense build(const dualdg::BlockProblem<double>& problem) {
  const auto& gr = problem.graph();
  std::vector<Index> col(gr.num_primal() + 1, 0), eq(gr.num_dual() + 1, 0), in(gr.num_dual() + 1, 0);
  for (Index i = 0; i < gr.num_primal(); ++i) col[i + 1] = col[i] + gr.n(i);
  for (Index j = 0; j < gr.num_dual(); ++j) {
    eq[j + 1] = eq[j] + gr.p(j);
    in[j + 1] = in[j] + gr.q(j);
  }
  const Index n = col.back(), p = eq.back(), q = in.back();
  Dense d;
  d.p = p;
  d.G = Mat::Zero(p + q, n);
  d.g.resize(p + q);
  d.g << problem.b(), problem.c();
  for (Index e = 0; e < gr.num_edges(); ++e) {
    const auto [j, i] = gr.edges()[e];
    const auto& blk = problem.block(e);
    for (Index r = 0; r < blk.A.rows(); ++r)
      for (Index c = 0; c < blk.A.cols(); ++c) d.G(eq[j] + r, col[i] + c) = blk.A(r, c);
    for (Index r = 0; r < blk.C.rows(); ++r)
      for (Index c = 0; c < blk.C.cols(); ++c) d.G(p + in[j] + r, col[i] + c) = blk.C(r, c);
  }
  d.Q = Mat::Zero(n, n);
  d.q.resize(n);
  for (Index i = 0; i < gr.num_primal(); ++i) {
    const auto& obj = problem.objective(i);
    d.Q.block(col[i], col[i], gr.n(i), gr.n(i)) = obj.Q();
    d.q.segment(col[i], gr.n(i)) = obj.q();
    d.gamma.push_back(obj.gamma());
    Vec a = Vec::Zero(n);
    if (obj.a().size() == gr.n(i)) a.segment(col[i], gr.n(i)) = obj.a();
    d.a.push_back(a);
  }
  return d;
}

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double f(const Dense& d, const Vec& z) {
  double v = 0.5 * z.dot(d.Q * z) + d.q.dot(z);
  for (std::size_t i = 0; i < d.gamma.size(); ++i) v += d.gamma[i] * softplus(d.a[i].dot(z));
  return v;
}

inline Vec grad_f(const Dense& d, const Vec& z) {
  Vec g = d.Q * z + d.q;
  for (std::size_t i = 0; i < d.gamma.size(); ++i) g += d.gamma[i] * logistic(d.a[i].dot(z)) * d.a[i];
  return g;
}

inline Mat hess_f(const Dense& d, const Vec& z) {
  Mat H = d.Q;
  for (std::size_t i = 0; i < d.gamma.size(); ++i) {
    const double s = logistic(d.a[i].dot(z));
    H += d.gamma[i] * s * (1 - s) * d.a[i] * d.a[i].transpose();
  }
  return H;
}

/// argmin_z f(z) + lambda'(Gz - g) by Newton's method with a full Hessian.
inline Vec argmin_lagrangian(const Dense& d, const Vec& lambda) {
  const Vec shift = d.G.transpose() * lambda;
  Vec z = Vec::Zero(d.Q.rows());
  for (int it = 0; it < 200; ++it) {
    const Vec g = grad_f(d, z) + shift;
    if (g.norm() <= 1e-13 * (1 + shift.norm())) break;
    const Vec step = hess_f(d, z).ldlt().solve(-g);
    double t = 1;
    const double phi0 = f(d, z) + shift.dot(z);
    while (t > 1e-12 && f(d, z + t * step) + shift.dot(z + t * step) > phi0 + 1e-15 * std::abs(phi0)) t *= 0.5;
    z += t * step;
  }
  return z;
}

inline double lagrangian(const Dense& d, const Vec& z, const Vec& lambda) {
  return f(d, z) + lambda.dot(d.G * z - d.g);
}

inline double dual(const Dense& d, const Vec& lambda) { return lagrangian(d, argmin_lagrangian(d, lambda), lambda); }

inline Vec dual_grad(const Dense& d, const Vec& lambda) { return d.G * argmin_lagrangian(d, lambda) - d.g; }

/// Central differences of a scalar function.
inline Vec fd_gradient(const std::function<double(const Vec&)>& fn, const Vec& x, double h) {
  Vec g(x.size());
  for (Index k = 0; k < x.size(); ++k) {
    Vec xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    g(k) = (fn(xp) - fn(xm)) / (2 * h);
  }
  return g;
}

/// ||M||^2 from a dense SVD.
inline double spectral_sq(const Mat& M) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(M);
  const double s = svd.singularValues()(0);
  return s * s;
}

/// Per-coordinate minimizer of sum_k w_k (xi_k - r_k)^2 over xi_k >= 0 for
/// inequality rows, found by comparing the unconstrained and boundary candidates.
inline Vec weighted_projection(const Vec& raw, const Vec& w, Index p) {
  Vec out = raw;
  for (Index k = p; k < raw.size(); ++k) {
    const double cand[2] = {raw(k), 0.0};
    double best = 0, best_val = INFINITY;
    for (double c : cand) {
      if (c < 0) continue;
      const double v = w(k) * (c - raw(k)) * (c - raw(k));
      if (v < best_val) {
        best_val = v;
        best = c;
      }
    }
    out(k) = best;
  }
  return out;
}

/// Diagonal of W from dense stacked columns and dense eigenvalues.
inline Vec weights_diagonal(const dualdg::BlockProblem<double>& problem) {
  const Dense d = build(problem);
  const auto& gr = problem.graph();
  std::vector<double> Ld(gr.num_primal());
  Index c0 = 0;
  for (Index i = 0; i < gr.num_primal(); ++i) {
    const Mat cols = d.G.middleCols(c0, gr.n(i));
    Eigen::SelfAdjointEigenSolver<Mat> eq(problem.objective(i).Q());
    Ld[i] = spectral_sq(cols) / eq.eigenvalues()(0);
    c0 += gr.n(i);
  }
  Vec w(d.G.rows());
  Index r = 0;
  for (Index j = 0; j < gr.num_dual(); ++j) {
    double s = 0;
    for (Index i = 0; i < gr.num_primal(); ++i)
      if (gr.has_edge(j, i)) s += Ld[i];
    w.segment(r, gr.p(j)).setConstant(s);
    r += gr.p(j);
  }
  for (Index j = 0; j < gr.num_dual(); ++j) {
    double s = 0;
    for (Index i = 0; i < gr.num_primal(); ++i)
      if (gr.has_edge(j, i)) s += Ld[i];
    w.segment(r, gr.q(j)).setConstant(s);
    r += gr.q(j);
  }
  return w;
}

}  // namespace oracle
