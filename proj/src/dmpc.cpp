#include "dualdg/dmpc.hpp"

#include "dualdg/dual.hpp"
#include "dualdg/random.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace dualdg {

namespace {

std::string where(Index i, Index j, const char* what) {
  return "dmpc: subsystem " + std::to_string(i) + ", neighbor " + std::to_string(j) + ": " + what;
}

void require_shape(const Mat<double>& m, Index rows, Index cols, Index i, Index j, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw StructuralError(where(i, j, what) + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                          ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

// Coupling list with zero-filled blocks and the self entry guaranteed, sorted by j.
std::vector<Coupling> normalized_neighbors(const NetworkedSystem& sys, Index i) {
  const Subsystem& s = sys.subsystems[i];
  const Index M = static_cast<Index>(sys.subsystems.size());
  const Index rows = s.c.size();
  std::map<Index, Coupling> by_j;
  for (const Coupling& cp : s.neighbors) {
    if (cp.j < 0 || cp.j >= M) throw StructuralError(where(i, cp.j, "neighbor index out of range"));
    if (by_j.count(cp.j)) throw StructuralError(where(i, cp.j, "duplicate neighbor"));
    const Subsystem& o = sys.subsystems[cp.j];
    Coupling full = cp;
    if (full.A.size() == 0) full.A = Mat<double>::Zero(s.nx, o.nx);
    if (full.B.size() == 0) full.B = Mat<double>::Zero(s.nx, o.nu);
    if (full.Cx.size() == 0) full.Cx = Mat<double>::Zero(rows, o.nx);
    if (full.Cu.size() == 0) full.Cu = Mat<double>::Zero(rows, o.nu);
    require_shape(full.A, s.nx, o.nx, i, cp.j, "A");
    require_shape(full.B, s.nx, o.nu, i, cp.j, "B");
    require_shape(full.Cx, rows, o.nx, i, cp.j, "Cx");
    require_shape(full.Cu, rows, o.nu, i, cp.j, "Cu");
    by_j.emplace(cp.j, std::move(full));
  }
  if (!by_j.count(i)) {
    by_j.emplace(i, Coupling{i, Mat<double>::Zero(s.nx, s.nx), Mat<double>::Zero(s.nx, s.nu),
                             Mat<double>::Zero(rows, s.nx), Mat<double>::Zero(rows, s.nu)});
  }
  std::vector<Coupling> out;
  for (auto& [j, cp] : by_j) out.push_back(std::move(cp));
  return out;
}

Mat<double> stacked_weight(const Subsystem& s, Index N) {
  const Index stride = s.nu + s.nx;
  Mat<double> Q = Mat<double>::Zero(N * stride, N * stride);
  for (Index t = 0; t < N; ++t) {
    Q.block(t * stride, t * stride, s.nu, s.nu) = s.R;
    Q.block(t * stride + s.nu, t * stride + s.nu, s.nx, s.nx) = t + 1 < N ? s.Q : s.P;
  }
  return Q;
}

}  // namespace

BlockProblem<double> build_problem(const NetworkedSystem& sys) {
  const Index M = static_cast<Index>(sys.subsystems.size());
  const Index N = sys.horizon;
  if (M < 1) throw StructuralError("dmpc: no subsystems");
  if (N < 1) throw StructuralError("dmpc: horizon must be at least 1");

  std::vector<std::vector<Coupling>> nbrs(M);
  std::vector<Index> n(M), p(M), q(M);
  for (Index i = 0; i < M; ++i) {
    const Subsystem& s = sys.subsystems[i];
    if (s.nx < 1 || s.nu < 0) throw StructuralError(where(i, i, "need nx >= 1 and nu >= 0"));
    require_shape(s.Q, s.nx, s.nx, i, i, "Q");
    require_shape(s.R, s.nu, s.nu, i, i, "R");
    require_shape(s.P, s.nx, s.nx, i, i, "P");
    if (s.x0.size() != s.nx) throw StructuralError(where(i, i, "x0 has wrong length"));
    if (s.terminal && (s.terminal->lo.size() != s.nx || s.terminal->hi.size() != s.nx)) {
      throw StructuralError(where(i, i, "terminal box has wrong length"));
    }
    nbrs[i] = normalized_neighbors(sys, i);
    n[i] = N * (s.nu + s.nx);
    p[i] = N * s.nx;
    q[i] = N * s.c.size() + (s.terminal ? 2 * s.nx : 0);
  }

  // Dual block j couples primal block i when i is an in-neighbor of j.
  std::vector<Edge> edges;
  for (Index j = 0; j < M; ++j) {
    for (const Coupling& cp : nbrs[j]) edges.push_back({j, cp.j});
  }
  BipartiteGraph graph(M, M, edges, n, p, q);

  Vec<double> b = Vec<double>::Zero(graph.total_p());
  Vec<double> c = Vec<double>::Zero(graph.total_q());
  BlockProblem<double>::BlockMap blocks;
  for (Index j = 0; j < M; ++j) {
    const Subsystem& sj = sys.subsystems[j];
    const Index rows = sj.c.size();
    auto bj = b.segment(graph.eq_offset(j), p[j]);
    auto cj = c.segment(graph.ineq_offset(j), q[j]);
    for (Index t = 0; t < N; ++t) cj.segment(t * rows, rows) = sj.c;

    for (const Coupling& cp : nbrs[j]) {
      const Index i = cp.j;
      const Subsystem& si = sys.subsystems[i];
      const Index stride = si.nu + si.nx;
      CouplingBlock<double> blk{Mat<double>::Zero(p[j], n[i]), Mat<double>::Zero(q[j], n[i])};
      for (Index t = 0; t < N; ++t) {
        const Index row = t * sj.nx;
        const Index u_col = t * stride;
        if (i == j) blk.A.block(row, u_col + si.nu, sj.nx, sj.nx).setIdentity();
        blk.A.block(row, u_col, sj.nx, si.nu) -= cp.B;
        blk.C.block(t * rows, u_col, rows, si.nu) += cp.Cu;
        if (t == 0) {
          bj.segment(0, sj.nx) += cp.A * si.x0;
          cj.segment(0, rows) -= cp.Cx * si.x0;
        } else {
          const Index x_col = (t - 1) * stride + si.nu;
          blk.A.block(row, x_col, sj.nx, si.nx) -= cp.A;
          blk.C.block(t * rows, x_col, rows, si.nx) += cp.Cx;
        }
      }
      if (i == j && sj.terminal) {
        const Index r0 = N * rows;
        const Index x_col = (N - 1) * stride + si.nu;
        blk.C.block(r0, x_col, sj.nx, sj.nx).setIdentity();
        blk.C.block(r0 + sj.nx, x_col, sj.nx, sj.nx) = -Mat<double>::Identity(sj.nx, sj.nx);
        cj.segment(r0, sj.nx) = sj.terminal->hi;
        cj.segment(r0 + sj.nx, sj.nx) = -sj.terminal->lo;
      }
      blocks[{j, i}] = std::move(blk);
    }
  }

  std::vector<BlockObjective<double>> objectives;
  objectives.reserve(M);
  for (Index i = 0; i < M; ++i) {
    objectives.emplace_back(stacked_weight(sys.subsystems[i], N), Vec<double>::Zero(n[i]));
  }
  return BlockProblem<double>::from_blocks(std::move(graph), std::move(objectives), blocks, std::move(b),
                                           std::move(c));
}

Vec<double> closed_form_check(const BlockProblem<double>& problem, const Vec<double>& lambda) {
  if (!problem.all_quadratic()) throw UnsupportedInstance("closed_form_check: objectives must be quadratic");
  const BipartiteGraph& gr = problem.graph();
  Vec<double> z(gr.total_n());
  for (Index i = 0; i < gr.num_primal(); ++i) {
    z.segment(gr.col_offset(i), gr.n(i)) = problem.objective(i).closed_form_minimizer(coupling_input(problem, i, lambda));
  }
  return z;
}

NetworkedSystem ring_system(Index M, Index horizon, std::uint64_t seed) {
  Rng rng(seed);
  NetworkedSystem sys;
  sys.horizon = horizon;
  const Index nx = 2, nu = 1, rows = 2;
  for (Index i = 0; i < M; ++i) {
    Subsystem s;
    s.nx = nx;
    s.nu = nu;
    s.Q = Mat<double>::Identity(nx, nx);
    s.R = Mat<double>::Identity(nu, nu);
    s.P = Mat<double>::Identity(nx, nx);
    s.x0 = Vec<double>(nx);
    for (Index k = 0; k < nx; ++k) s.x0(k) = rng.uniform(-1.0, 1.0);
    s.c = Vec<double>::Constant(rows, 2.0);
    std::vector<Index> js{(i + M - 1) % M, i, (i + 1) % M};
    std::sort(js.begin(), js.end());
    js.erase(std::unique(js.begin(), js.end()), js.end());
    for (Index j : js) {
      Coupling cp;
      cp.j = j;
      cp.A = Mat<double>(nx, nx);
      cp.B = Mat<double>(nx, nu);
      cp.Cx = Mat<double>(rows, nx);
      cp.Cu = Mat<double>(rows, nu);
      for (Index r = 0; r < nx; ++r) {
        for (Index k = 0; k < nx; ++k) cp.A(r, k) = (j == i && r == k ? 0.8 : 0.0) + 0.1 * rng.normal();
        for (Index k = 0; k < nu; ++k) cp.B(r, k) = (j == i ? 1.0 : 0.2) * rng.normal();
      }
      for (Index r = 0; r < rows; ++r) {
        for (Index k = 0; k < nx; ++k) cp.Cx(r, k) = 0.3 * rng.normal();
        for (Index k = 0; k < nu; ++k) cp.Cu(r, k) = 0.3 * rng.normal();
      }
      s.neighbors.push_back(std::move(cp));
    }
    sys.subsystems.push_back(std::move(s));
  }
  return sys;
}

}  // namespace dualdg
