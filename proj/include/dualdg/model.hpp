#pragma once

#include "dualdg/objective.hpp"
#include "dualdg/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dualdg {

/// Nonzero (j, i) of the incidence matrix: dual block j couples primal block i.
struct Edge {
  Index j;
  Index i;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Coupling between primal blocks V1 = {0..M-1} and constraint blocks
/// V2 = {0..M_bar-1}. Edges are kept sorted by (j, i).
class BipartiteGraph {
 public:
  struct Neighbor {
    Index node;
    Index edge;
  };

  BipartiteGraph() = default;

  BipartiteGraph(Index num_primal, Index num_dual, std::vector<Edge> edges, std::vector<Index> n,
                 std::vector<Index> p, std::vector<Index> q)
      : num_primal_(num_primal), num_dual_(num_dual), edges_(std::move(edges)), n_(std::move(n)),
        p_(std::move(p)), q_(std::move(q)) {
    if (num_primal_ < 1 || num_dual_ < 0) throw StructuralError("graph: need at least one primal block");
    if (static_cast<Index>(n_.size()) != num_primal_) throw StructuralError("graph: n has wrong length");
    if (static_cast<Index>(p_.size()) != num_dual_ || static_cast<Index>(q_.size()) != num_dual_) {
      throw StructuralError("graph: p/q have wrong length");
    }
    for (Index v : n_) {
      if (v < 1) throw StructuralError("graph: every primal block needs n_i >= 1");
    }
    for (Index j = 0; j < num_dual_; ++j) {
      if (p_[j] < 0 || q_[j] < 0) throw StructuralError("graph: negative row count");
    }
    std::sort(edges_.begin(), edges_.end());
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const Edge& ed = edges_[e];
      if (ed.j < 0 || ed.j >= num_dual_ || ed.i < 0 || ed.i >= num_primal_) {
        throw StructuralError("graph: edge (" + std::to_string(ed.j) + "," + std::to_string(ed.i) +
                              ") out of range");
      }
      if (e > 0 && edges_[e - 1] == ed) {
        throw StructuralError("graph: duplicate edge (" + std::to_string(ed.j) + "," +
                              std::to_string(ed.i) + ")");
      }
    }

    primal_nbrs_.assign(num_primal_, {});
    dual_nbrs_.assign(num_dual_, {});
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const Edge& ed = edges_[e];
      // Sorted (j, i) order makes both lists ascending.
      primal_nbrs_[ed.i].push_back({ed.j, static_cast<Index>(e)});
      dual_nbrs_[ed.j].push_back({ed.i, static_cast<Index>(e)});
    }

    col_offset_.resize(num_primal_ + 1, 0);
    std::partial_sum(n_.begin(), n_.end(), col_offset_.begin() + 1);
    eq_offset_.resize(num_dual_ + 1, 0);
    std::partial_sum(p_.begin(), p_.end(), eq_offset_.begin() + 1);
    ineq_offset_.resize(num_dual_ + 1, 0);
    std::partial_sum(q_.begin(), q_.end(), ineq_offset_.begin() + 1);
  }

  Index num_primal() const { return num_primal_; }
  Index num_dual() const { return num_dual_; }
  const std::vector<Edge>& edges() const { return edges_; }
  Index num_edges() const { return static_cast<Index>(edges_.size()); }

  /// Edge id of (j, i) or -1.
  Index edge_index(Index j, Index i) const {
    auto it = std::lower_bound(edges_.begin(), edges_.end(), Edge{j, i});
    if (it == edges_.end() || *it != Edge{j, i}) return -1;
    return static_cast<Index>(it - edges_.begin());
  }
  bool has_edge(Index j, Index i) const { return edge_index(j, i) >= 0; }

  /// Dual blocks j with E_ji = 1, ascending.
  std::span<const Neighbor> primal_neighbors(Index i) const { return primal_nbrs_[i]; }
  /// Primal blocks i with E_ji = 1, ascending.
  std::span<const Neighbor> dual_neighbors(Index j) const { return dual_nbrs_[j]; }

  Index n(Index i) const { return n_[i]; }
  Index p(Index j) const { return p_[j]; }
  Index q(Index j) const { return q_[j]; }
  const std::vector<Index>& n_sizes() const { return n_; }
  const std::vector<Index>& p_sizes() const { return p_; }
  const std::vector<Index>& q_sizes() const { return q_; }

  Index total_n() const { return col_offset_.back(); }
  Index total_p() const { return eq_offset_.back(); }
  Index total_q() const { return ineq_offset_.back(); }
  Index total_rows() const { return total_p() + total_q(); }

  Index col_offset(Index i) const { return col_offset_[i]; }
  /// Offset of nu_j inside the stacked multiplier [nu; mu].
  Index nu_offset(Index j) const { return eq_offset_[j]; }
  /// Offset of mu_j inside the stacked multiplier [nu; mu].
  Index mu_offset(Index j) const { return total_p() + ineq_offset_[j]; }
  Index eq_offset(Index j) const { return eq_offset_[j]; }
  Index ineq_offset(Index j) const { return ineq_offset_[j]; }

  /// Dense M_bar x M incidence matrix.
  Eigen::MatrixXi incidence() const {
    Eigen::MatrixXi E = Eigen::MatrixXi::Zero(num_dual_, num_primal_);
    for (const Edge& e : edges_) E(e.j, e.i) = 1;
    return E;
  }

 private:
  Index num_primal_ = 0;
  Index num_dual_ = 0;
  std::vector<Edge> edges_;
  std::vector<Index> n_, p_, q_;
  std::vector<std::vector<Neighbor>> primal_nbrs_;
  std::vector<std::vector<Neighbor>> dual_nbrs_;
  std::vector<Index> col_offset_, eq_offset_, ineq_offset_;
};

struct Neighborhoods {
  std::vector<std::vector<Index>> of_primal;  // N_bar_i
  std::vector<std::vector<Index>> of_dual;    // N_j
  Index omega = 0;                            // max cardinality over both sides
};

inline Neighborhoods neighborhoods(const BipartiteGraph& graph) {
  Neighborhoods out;
  out.of_primal.resize(graph.num_primal());
  out.of_dual.resize(graph.num_dual());
  for (Index i = 0; i < graph.num_primal(); ++i) {
    for (const auto& nb : graph.primal_neighbors(i)) out.of_primal[i].push_back(nb.node);
    out.omega = std::max<Index>(out.omega, static_cast<Index>(out.of_primal[i].size()));
  }
  for (Index j = 0; j < graph.num_dual(); ++j) {
    for (const auto& nb : graph.dual_neighbors(j)) out.of_dual[j].push_back(nb.node);
    out.omega = std::max<Index>(out.omega, static_cast<Index>(out.of_dual[j].size()));
  }
  return out;
}

/// A_ji (p_j x n_i) and C_ji (q_j x n_i) for one edge.
template <typename Scalar>
struct CouplingBlock {
  Mat<Scalar> A;
  Mat<Scalar> C;
};

/**
 * min sum_i f_i(z_i)  s.t.  Az = b, Cz <= c, with A and C stored as dense
 * blocks on the edges of the coupling graph only. Immutable.
 *
 * Multipliers and constraint rows use one global order: all equality rows by
 * j ascending, then all inequality rows by j ascending.
 */
template <typename Scalar>
class BlockProblem {
 public:
  using VectorType = Vec<Scalar>;
  using MatrixType = Mat<Scalar>;
  using BlockMap = std::map<std::pair<Index, Index>, CouplingBlock<Scalar>>;

  BlockProblem(BipartiteGraph graph, std::vector<BlockObjective<Scalar>> objectives,
               std::vector<CouplingBlock<Scalar>> blocks, VectorType b, VectorType c,
               std::optional<VectorType> strict_point = std::nullopt)
      : graph_(std::move(graph)), objectives_(std::move(objectives)), blocks_(std::move(blocks)),
        b_(std::move(b)), c_(std::move(c)), strict_point_(std::move(strict_point)) {
    check();
  }

  /// Builds from blocks keyed by (j, i). Edges without a stored block get zero
  /// blocks; a block on a non-edge is a structural error.
  static BlockProblem from_blocks(BipartiteGraph graph, std::vector<BlockObjective<Scalar>> objectives,
                                  const BlockMap& blocks, VectorType b, VectorType c,
                                  std::optional<VectorType> strict_point = std::nullopt) {
    std::vector<CouplingBlock<Scalar>> stored(graph.num_edges());
    for (const auto& [key, blk] : blocks) {
      const Index e = graph.edge_index(key.first, key.second);
      if (e < 0) {
        throw StructuralError("block (" + std::to_string(key.first) + "," + std::to_string(key.second) +
                              ") given but E_ji = 0");
      }
      stored[e] = blk;
    }
    for (Index e = 0; e < graph.num_edges(); ++e) {
      const Edge& ed = graph.edges()[e];
      if (stored[e].A.size() == 0) stored[e].A = MatrixType::Zero(graph.p(ed.j), graph.n(ed.i));
      if (stored[e].C.size() == 0) stored[e].C = MatrixType::Zero(graph.q(ed.j), graph.n(ed.i));
    }
    return BlockProblem(std::move(graph), std::move(objectives), std::move(stored), std::move(b),
                        std::move(c), std::move(strict_point));
  }

  const BipartiteGraph& graph() const { return graph_; }
  Index num_blocks() const { return graph_.num_primal(); }
  const BlockObjective<Scalar>& objective(Index i) const { return objectives_[i]; }
  const std::vector<BlockObjective<Scalar>>& objectives() const { return objectives_; }
  const CouplingBlock<Scalar>& block(Index edge) const { return blocks_[edge]; }
  const std::vector<CouplingBlock<Scalar>>& blocks() const { return blocks_; }
  const VectorType& b() const { return b_; }
  const VectorType& c() const { return c_; }
  auto b_block(Index j) const { return b_.segment(graph_.eq_offset(j), graph_.p(j)); }
  auto c_block(Index j) const { return c_.segment(graph_.ineq_offset(j), graph_.q(j)); }
  const std::optional<VectorType>& strict_point() const { return strict_point_; }

  std::optional<std::uint64_t> seed;

  bool all_quadratic() const {
    return std::all_of(objectives_.begin(), objectives_.end(), [](const auto& o) { return o.gamma() == 0; });
  }

 private:
  static std::string pair_name(const Edge& e) {
    return "(" + std::to_string(e.j) + "," + std::to_string(e.i) + ")";
  }

  void check() const {
    if (static_cast<Index>(objectives_.size()) != graph_.num_primal()) {
      throw StructuralError("problem: objective count differs from M");
    }
    for (Index i = 0; i < graph_.num_primal(); ++i) {
      if (objectives_[i].dim() != graph_.n(i)) {
        throw StructuralError("problem: objective " + std::to_string(i) + " has dimension " +
                              std::to_string(objectives_[i].dim()) + ", expected " + std::to_string(graph_.n(i)));
      }
    }
    if (static_cast<Index>(blocks_.size()) != graph_.num_edges()) {
      throw StructuralError("problem: block count differs from edge count");
    }
    for (Index e = 0; e < graph_.num_edges(); ++e) {
      const Edge& ed = graph_.edges()[e];
      const auto& blk = blocks_[e];
      if (blk.A.rows() != graph_.p(ed.j) || blk.A.cols() != graph_.n(ed.i)) {
        throw StructuralError("problem: block A" + pair_name(ed) + " is " + std::to_string(blk.A.rows()) + "x" +
                              std::to_string(blk.A.cols()) + ", expected " + std::to_string(graph_.p(ed.j)) + "x" +
                              std::to_string(graph_.n(ed.i)));
      }
      if (blk.C.rows() != graph_.q(ed.j) || blk.C.cols() != graph_.n(ed.i)) {
        throw StructuralError("problem: block C" + pair_name(ed) + " is " + std::to_string(blk.C.rows()) + "x" +
                              std::to_string(blk.C.cols()) + ", expected " + std::to_string(graph_.q(ed.j)) + "x" +
                              std::to_string(graph_.n(ed.i)));
      }
    }
    if (b_.size() != graph_.total_p()) throw StructuralError("problem: b has wrong length");
    if (c_.size() != graph_.total_q()) throw StructuralError("problem: c has wrong length");
    if (strict_point_ && strict_point_->size() != graph_.total_n()) {
      throw StructuralError("problem: strict_point has wrong length");
    }
  }

  BipartiteGraph graph_;
  std::vector<BlockObjective<Scalar>> objectives_;
  std::vector<CouplingBlock<Scalar>> blocks_;
  VectorType b_;
  VectorType c_;
  std::optional<VectorType> strict_point_;
};

template <typename Scalar>
struct DenseSystem {
  Mat<Scalar> G;  // [A; C]
  Vec<Scalar> g;  // [b; c]
};

/// Materializes G = [A; C] and g = [b; c]. Reference use only.
template <typename Scalar>
DenseSystem<Scalar> assemble_dense(const BlockProblem<Scalar>& problem) {
  const BipartiteGraph& gr = problem.graph();
  DenseSystem<Scalar> out;
  out.G = Mat<Scalar>::Zero(gr.total_rows(), gr.total_n());
  out.g.resize(gr.total_rows());
  out.g << problem.b(), problem.c();
  for (Index e = 0; e < gr.num_edges(); ++e) {
    const Edge& ed = gr.edges()[e];
    const auto& blk = problem.block(e);
    out.G.block(gr.nu_offset(ed.j), gr.col_offset(ed.i), gr.p(ed.j), gr.n(ed.i)) = blk.A;
    out.G.block(gr.mu_offset(ed.j), gr.col_offset(ed.i), gr.q(ed.j), gr.n(ed.i)) = blk.C;
  }
  return out;
}

/// Dense equality matrix A alone.
template <typename Scalar>
Mat<Scalar> assemble_equality(const BlockProblem<Scalar>& problem) {
  const BipartiteGraph& gr = problem.graph();
  Mat<Scalar> A = Mat<Scalar>::Zero(gr.total_p(), gr.total_n());
  for (Index e = 0; e < gr.num_edges(); ++e) {
    const Edge& ed = gr.edges()[e];
    A.block(gr.eq_offset(ed.j), gr.col_offset(ed.i), gr.p(ed.j), gr.n(ed.i)) = problem.block(e).A;
  }
  return A;
}

/// G z computed blockwise over the edges.
template <typename Scalar>
Vec<Scalar> apply_constraints(const BlockProblem<Scalar>& problem, const VecView<Scalar>& z) {
  const BipartiteGraph& gr = problem.graph();
  Vec<Scalar> out = Vec<Scalar>::Zero(gr.total_rows());
  for (Index e = 0; e < gr.num_edges(); ++e) {
    const Edge& ed = gr.edges()[e];
    const auto zi = z.segment(gr.col_offset(ed.i), gr.n(ed.i));
    out.segment(gr.nu_offset(ed.j), gr.p(ed.j)) += problem.block(e).A * zi;
    out.segment(gr.mu_offset(ed.j), gr.q(ed.j)) += problem.block(e).C * zi;
  }
  return out;
}

/// True when every inequality multiplier is nonnegative.
template <typename Scalar>
bool in_domain(const BlockProblem<Scalar>& problem, const VecView<Scalar>& lambda) {
  const Index p = problem.graph().total_p();
  if (lambda.size() != problem.graph().total_rows()) return false;
  return (lambda.tail(lambda.size() - p).array() >= Scalar(0)).all();
}

struct ValidationReport {
  bool full_row_rank = false;
  Index rank = 0;
  Index rows = 0;
  bool has_strict_point = false;
  bool strict_feasible = false;
  double equality_residual_inf = 0;  // ||A z~ - b||_inf
  double max_inequality_gap = 0;     // max_k (C z~ - c)_k
  bool sigma_positive = false;
  double min_sigma = 0;

  bool ok() const { return full_row_rank && sigma_positive && (!has_strict_point || strict_feasible); }
};

inline constexpr double kRankTolerance = 1e-10;
inline constexpr double kEqualityFeasTolerance = 1e-9;
inline constexpr double kStrictMargin = 1e-6;

/// Checks the standing assumptions: A full row rank, strict feasibility of the
/// stored witness, and strongly convex blocks. Pure.
template <typename Scalar>
ValidationReport validate(const BlockProblem<Scalar>& problem) {
  ValidationReport rep;
  const BipartiteGraph& gr = problem.graph();
  const Mat<Scalar> A = assemble_equality(problem);
  rep.rows = A.rows();
  if (A.rows() == 0) {
    rep.full_row_rank = true;
  } else {
    Eigen::BDCSVD<Mat<Scalar>> svd(A);
    const auto& sv = svd.singularValues();
    const Scalar threshold = Scalar(kRankTolerance) * (sv.size() > 0 ? sv(0) : Scalar(0));
    rep.rank = (sv.array() > threshold).count();
    rep.full_row_rank = sv.size() > 0 && sv(0) > 0 && rep.rank == A.rows();
  }

  if (problem.strict_point()) {
    rep.has_strict_point = true;
    const Vec<Scalar> Gz = apply_constraints(problem, *problem.strict_point());
    const Index p = gr.total_p();
    rep.equality_residual_inf =
        p > 0 ? static_cast<double>((Gz.head(p) - problem.b()).cwiseAbs().maxCoeff()) : 0.0;
    const Index q = gr.total_q();
    rep.max_inequality_gap =
        q > 0 ? static_cast<double>((Gz.tail(q) - problem.c()).maxCoeff()) : -std::numeric_limits<double>::infinity();
    rep.strict_feasible =
        rep.equality_residual_inf <= kEqualityFeasTolerance && rep.max_inequality_gap <= -kStrictMargin;
  }

  rep.min_sigma = std::numeric_limits<double>::infinity();
  for (const auto& obj : problem.objectives()) {
    rep.min_sigma = std::min(rep.min_sigma, static_cast<double>(obj.constants().sigma));
  }
  rep.sigma_positive = rep.min_sigma > 0;
  return rep;
}

}  // namespace dualdg
