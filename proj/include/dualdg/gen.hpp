#pragma once

#include "dualdg/model.hpp"

#include <cstdint>

namespace dualdg {

struct GeneratorOptions {
  bool inequalities = true;  // false: equality-only instances (G = A)
  int max_attempts = 3;
};

/**
 * Seeded random instance with M primal and M constraint blocks.
 *
 * The incidence is a circulant band of width omega with rows and columns
 * shuffled, so every row and column has exactly omega ones. Per block:
 * Q_i = R'R + sigma_i I with R standard normal and sigma_i ~ U[1,10];
 * q_i, a_i ~ U[-1,1]; gamma_i = 1 if `gamma` else 0. Per edge: A_ji is
 * ceil(3n/4) x n and C_ji is ceil(3n/2) x n, standard normal. A witness
 * z~ ~ N(0, I) fixes b = A z~ and c = C z~ + s with s ~ U[0.1, 1.1], so z~
 * is strictly feasible and is stored as the strict point.
 *
 * If A is rank deficient the instance is redrawn from a derived seed, up to
 * max_attempts times.
 */
BlockProblem<double> generate(Index M, Index n_block, Index omega, bool gamma, std::uint64_t seed,
                              const GeneratorOptions& options = {});

/// Incidence used by generate(): exactly omega ones per row and column.
std::vector<Edge> shuffled_circulant(Index M, Index omega, std::uint64_t seed);

}  // namespace dualdg
