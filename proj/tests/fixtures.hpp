#pragma once

#include "dualdg/model.hpp"
#include "dualdg/random.hpp"

#include <vector>

namespace fixtures {

using namespace dualdg;

/// min 1/2 z^2  s.t.  a z = b  (one block, one equality row).
inline BlockProblem<double> scalar_problem(double b = 1.0, double a = 1.0) {
  BipartiteGraph g(1, 1, {{0, 0}}, {1}, {1}, {0});
  std::vector<BlockObjective<double>> objs;
  objs.emplace_back(Mat<double>::Identity(1, 1), Vec<double>::Zero(1));
  BlockProblem<double>::BlockMap blocks;
  blocks[{0, 0}] = {Mat<double>::Constant(1, 1, a), Mat<double>(0, 1)};
  return BlockProblem<double>::from_blocks(std::move(g), std::move(objs), blocks, Vec<double>::Constant(1, b),
                                           Vec<double>(0));
}

inline Mat<double> random_matrix(Rng& rng, Index rows, Index cols) {
  Mat<double> m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

inline Vec<double> random_vector(Rng& rng, Index n, double lo = -1, double hi = 1) {
  Vec<double> v(n);
  for (Index k = 0; k < n; ++k) v(k) = rng.uniform(lo, hi);
  return v;
}

inline Mat<double> random_pd(Rng& rng, Index n, double shift = 1.0) {
  const Mat<double> R = random_matrix(rng, n, n);
  return R.transpose() * R + shift * Mat<double>::Identity(n, n);
}

/// A random point of the dual domain: equality part normal, inequality part |normal|.
inline Vec<double> random_dual_point(Rng& rng, const BlockProblem<double>& problem, double scale = 1.0) {
  const auto& g = problem.graph();
  Vec<double> lam(g.total_rows());
  for (Index k = 0; k < lam.size(); ++k) lam(k) = scale * rng.normal();
  lam.tail(g.total_q()) = lam.tail(g.total_q()).cwiseAbs();
  return lam;
}

/// Small hand-wired instance: two primal blocks, two constraint blocks,
/// edges (0,0), (0,1), (1,1); equality and inequality rows on both.
inline BlockProblem<double> two_block_problem(std::uint64_t seed, double gamma = 0.0) {
  Rng rng(seed);
  BipartiteGraph g(2, 2, {{0, 0}, {0, 1}, {1, 1}}, {3, 2}, {1, 1}, {2, 1});
  std::vector<BlockObjective<double>> objs;
  for (Index i = 0; i < 2; ++i) {
    const Index n = g.n(i);
    objs.emplace_back(random_pd(rng, n), random_vector(rng, n), gamma, random_vector(rng, n));
  }
  BlockProblem<double>::BlockMap blocks;
  for (const Edge& e : g.edges()) {
    blocks[{e.j, e.i}] = {random_matrix(rng, g.p(e.j), g.n(e.i)), random_matrix(rng, g.q(e.j), g.n(e.i))};
  }
  Vec<double> zt(5);
  for (Index k = 0; k < 5; ++k) zt(k) = rng.normal();
  auto tmp = BlockProblem<double>::from_blocks(g, objs, blocks, Vec<double>::Zero(2), Vec<double>::Zero(3));
  const Vec<double> Gz = apply_constraints<double>(tmp, zt);
  return BlockProblem<double>::from_blocks(std::move(g), std::move(objs), blocks, Gz.head(2),
                                           Gz.tail(3) + Vec<double>::Constant(3, 0.5), zt);
}

}  // namespace fixtures
