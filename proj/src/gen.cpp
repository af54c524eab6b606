#include "dualdg/gen.hpp"

#include "dualdg/random.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace dualdg {

namespace {

constexpr std::uint64_t kReseedStride = 0x9E3779B97F4A7C15ULL;

Index ceil_div(Index a, Index b) { return (a + b - 1) / b; }

Mat<double> normal_matrix(Rng& rng, Index rows, Index cols) {
  Mat<double> m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  }
  return m;
}

Vec<double> uniform_vector(Rng& rng, Index n, double lo, double hi) {
  Vec<double> v(n);
  for (Index k = 0; k < n; ++k) v(k) = rng.uniform(lo, hi);
  return v;
}

std::vector<Edge> circulant_from(Rng& rng, Index M, Index omega) {
  std::vector<Index> row_perm(M), col_perm(M);
  std::iota(row_perm.begin(), row_perm.end(), 0);
  std::iota(col_perm.begin(), col_perm.end(), 0);
  rng.shuffle(row_perm);
  rng.shuffle(col_perm);
  std::vector<Edge> edges;
  edges.reserve(M * omega);
  for (Index r = 0; r < M; ++r) {
    for (Index s = 0; s < omega; ++s) edges.push_back({row_perm[r], col_perm[(r + s) % M]});
  }
  return edges;
}

BlockProblem<double> draw(Index M, Index n_block, Index omega, bool gamma, std::uint64_t seed,
                          const GeneratorOptions& options) {
  Rng rng(seed);
  const Index p_j = ceil_div(3 * n_block, 4);
  const Index q_j = options.inequalities ? ceil_div(3 * n_block, 2) : 0;

  std::vector<Edge> edges = circulant_from(rng, M, omega);
  BipartiteGraph graph(M, M, edges, std::vector<Index>(M, n_block), std::vector<Index>(M, p_j),
                       std::vector<Index>(M, q_j));

  std::vector<BlockObjective<double>> objectives;
  objectives.reserve(M);
  for (Index i = 0; i < M; ++i) {
    const double sigma = rng.uniform(1.0, 10.0);
    const Mat<double> R = normal_matrix(rng, n_block, n_block);
    Mat<double> Q = R.transpose() * R;
    Q.diagonal().array() += sigma;
    Q = 0.5 * (Q + Q.transpose());
    Vec<double> q = uniform_vector(rng, n_block, -1.0, 1.0);
    Vec<double> a = uniform_vector(rng, n_block, -1.0, 1.0);
    objectives.emplace_back(std::move(Q), std::move(q), gamma ? 1.0 : 0.0, std::move(a));
  }

  std::vector<CouplingBlock<double>> blocks(graph.num_edges());
  for (Index e = 0; e < graph.num_edges(); ++e) {
    blocks[e].A = normal_matrix(rng, p_j, n_block);
    blocks[e].C = normal_matrix(rng, q_j, n_block);
  }

  Vec<double> witness(graph.total_n());
  for (Index k = 0; k < witness.size(); ++k) witness(k) = rng.normal();

  Vec<double> b = Vec<double>::Zero(graph.total_p());
  Vec<double> c = Vec<double>::Zero(graph.total_q());
  for (Index e = 0; e < graph.num_edges(); ++e) {
    const Edge& ed = graph.edges()[e];
    const auto zi = witness.segment(graph.col_offset(ed.i), n_block);
    b.segment(graph.eq_offset(ed.j), p_j) += blocks[e].A * zi;
    c.segment(graph.ineq_offset(ed.j), q_j) += blocks[e].C * zi;
  }
  for (Index k = 0; k < c.size(); ++k) c(k) += rng.uniform(0.1, 1.1);

  return BlockProblem<double>(std::move(graph), std::move(objectives), std::move(blocks), std::move(b), std::move(c),
                              std::move(witness));
}

}  // namespace

std::vector<Edge> shuffled_circulant(Index M, Index omega, std::uint64_t seed) {
  Rng rng(seed);
  return circulant_from(rng, M, omega);
}

BlockProblem<double> generate(Index M, Index n_block, Index omega, bool gamma, std::uint64_t seed,
                              const GeneratorOptions& options) {
  if (M < 1 || n_block < 1) throw std::invalid_argument("generate: need M >= 1 and n >= 1");
  if (omega < 1 || omega > M) throw std::invalid_argument("generate: need 1 <= omega <= M");
  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    auto problem = draw(M, n_block, omega, gamma, seed + static_cast<std::uint64_t>(attempt) * kReseedStride, options);
    if (validate(problem).full_row_rank) {
      problem.seed = seed;
      return problem;
    }
  }
  throw RankError("generate: equality matrix rank deficient after " + std::to_string(options.max_attempts) +
                  " attempts (seed " + std::to_string(seed) + ")");
}

}  // namespace dualdg
