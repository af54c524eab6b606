#pragma once

#include "dualdg/model.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace dualdg {

/// How subsystem j enters the dynamics and constraints of the owning subsystem i.
struct Coupling {
  Index j;
  Mat<double> A;   // x_i(t+1) += A x_j(t)
  Mat<double> B;   // x_i(t+1) += B u_j(t)
  Mat<double> Cx;  // constraint rows: Cx x_j(t) + Cu u_j(t) summed over j <= c_i
  Mat<double> Cu;
};

struct Box {
  Vec<double> lo;
  Vec<double> hi;
};

struct Subsystem {
  Index nx = 0;
  Index nu = 0;
  std::vector<Coupling> neighbors;  // in-neighbors; i itself is added if absent
  Vec<double> c;                    // constraint bound, one entry per constraint row
  Mat<double> Q, R, P;              // stage state, stage input, terminal weights
  Vec<double> x0;
  std::optional<Box> terminal;      // x_i(N) in [lo, hi]
};

struct NetworkedSystem {
  std::vector<Subsystem> subsystems;
  Index horizon = 1;
};

/**
 * The finite-horizon MPC problem as a block problem with V1 = V2 = subsystems.
 *
 * z_i = [u_i(0); x_i(1); u_i(1); x_i(2); ...; u_i(N-1); x_i(N)] and
 * Q_i = diag(R, Q, R, Q, ..., R, P). Constraint block j holds the dynamics of
 * subsystem j for t = 0..N-1 (equalities), then its coupled constraints for
 * t = 0..N-1 and the terminal box (inequalities), all t-major. Terms in the
 * known initial state are moved to the right-hand side.
 */
BlockProblem<double> build_problem(const NetworkedSystem& system);

/// z_i = -Q_i^{-1}(q_i + sum_j A_ji' nu_j + C_ji' mu_j) for quadratic blocks.
Vec<double> closed_form_check(const BlockProblem<double>& problem, const Vec<double>& lambda);

/**
 * Ring of M subsystems, each driven by itself and both ring neighbors
 * (omega = 3 for M >= 3), with nx = 2, nu = 1 and two coupled constraint
 * rows. Identity weights. Used for scaling measurements.
 */
NetworkedSystem ring_system(Index M, Index horizon, std::uint64_t seed);

}  // namespace dualdg
