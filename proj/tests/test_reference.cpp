#include "fixtures.hpp"

#include "dualdg/gen.hpp"
#include "dualdg/reference.hpp"

#include <gtest/gtest.h>

using namespace dualdg;

namespace {

/// One block Q, q; equality rows A z = b.
BlockProblem<double> single_block(const Mat<double>& Q, const Mat<double>& A, const Vec<double>& b) {
  BipartiteGraph g(1, 1, {{0, 0}}, {Q.rows()}, {A.rows()}, {0});
  std::vector<BlockObjective<double>> objs{BlockObjective<double>(Q, Vec<double>::Zero(Q.rows()))};
  BlockProblem<double>::BlockMap blocks;
  blocks[{0, 0}] = {A, Mat<double>(0, Q.rows())};
  return BlockProblem<double>::from_blocks(g, objs, blocks, b, Vec<double>(0));
}

}  // namespace

TEST(Reference, ScalarHandKkt) {
  const auto ref = solve_reference(fixtures::scalar_problem(1.0));
  EXPECT_NEAR(ref.z_star(0), 1.0, 1e-12);
  EXPECT_NEAR(ref.f_star, 0.5, 1e-12);
  EXPECT_NEAR(ref.lambda_ref(0), -1.0, 1e-12);
  EXPECT_FALSE(ref.quality.low_quality);
}

TEST(Reference, MatchesKktOnEqualityQuadratics) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto p = generate(8, 4, 3, false, seed, GeneratorOptions{false});
    const auto ref = solve_reference(p);
    const auto kkt = kkt_solve_equality(p);
    EXPECT_LE((ref.z_star - kkt.z).norm(), 1e-7) << "seed " << seed;
    EXPECT_NEAR(ref.f_star, eval_objective<double>(p, kkt.z), 1e-7 * std::max(1.0, std::abs(ref.f_star)));
    EXPECT_LE(ref.quality.prox_w, 1e-10);
    EXPECT_LE(ref.quality.infeas, 1e-8);
  }
}

TEST(Reference, PlainAndAcceleratedAgree) {
  const auto p = generate(5, 3, 2, true, 2, GeneratorOptions{false});
  const auto W = compute_weights(p);
  ReferenceOptions plain;
  plain.method = ReferenceMethod::Plain;
  const auto a = solve_reference(p, W);
  const auto b = solve_reference(p, W, plain);
  EXPECT_FALSE(a.quality.low_quality);
  EXPECT_FALSE(b.quality.low_quality);
  EXPECT_NEAR(a.f_star, b.f_star, 1e-8 * std::max(1.0, std::abs(a.f_star)));
  EXPECT_LE((a.z_star - b.z_star).norm(), 1e-7);
}

TEST(Reference, WitnessIsNoBetterThanOptimum) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto p = generate(6, 3, 2, seed % 2 == 1, seed);
    const auto ref = solve_reference(p);
    EXPECT_GE(eval_objective<double>(p, *p.strict_point()), ref.f_star - 1e-7);
  }
}

TEST(Reference, QualityAndComplementarySlackness) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto p = generate(6, 3, 2, seed % 2 == 1, seed);
    const auto ref = solve_reference(p);
    EXPECT_FALSE(ref.quality.low_quality) << "seed " << seed;
    EXPECT_LE(ref.quality.prox_w, 1e-10);
    EXPECT_LE(ref.quality.infeas, 1e-8);
    const Index P = p.graph().total_p();
    const Vec<double> slack = apply_constraints<double>(p, ref.z_star).tail(p.graph().total_q()) - p.c();
    for (Index k = 0; k < slack.size(); ++k) {
      const double mu = ref.lambda_ref(P + k);
      EXPECT_GE(mu, 0.0);
      EXPECT_LE(std::abs(mu * slack(k)), 1e-6);
    }
  }
}

TEST(Reference, Deterministic) {
  const auto p = generate(6, 3, 2, true, 3);
  const auto a = solve_reference(p);
  const auto b = solve_reference(p);
  EXPECT_EQ(a.lambda_ref, b.lambda_ref);
  EXPECT_EQ(a.f_star, b.f_star);
}

TEST(Reference, IterationCapSetsLowQualityFlag) {
  const auto p = generate(6, 3, 2, false, 1);
  ReferenceOptions opts;
  opts.max_iterations = 3;
  const auto ref = solve_reference(p, opts);
  EXPECT_TRUE(ref.quality.low_quality);
  EXPECT_GT(ref.quality.prox_w, 1e-10);
}

TEST(Kkt, SymmetricSplit) {
  const auto p = single_block(Mat<double>::Identity(2, 2), Mat<double>::Ones(1, 2), Vec<double>::Constant(1, 2));
  const auto s = kkt_solve_equality(p);
  EXPECT_NEAR(s.z(0), 1.0, 1e-14);
  EXPECT_NEAR(s.z(1), 1.0, 1e-14);
  EXPECT_NEAR(s.nu(0), -1.0, 1e-14);
}

TEST(Kkt, Decoupled) {
  Mat<double> Q = Mat<double>::Zero(2, 2);
  Q.diagonal() << 1, 2;
  Mat<double> A(1, 2);
  A << 1, 0;
  const auto s = kkt_solve_equality(single_block(Q, A, Vec<double>::Constant(1, 3)));
  EXPECT_NEAR(s.z(0), 3.0, 1e-14);
  EXPECT_NEAR(s.z(1), 0.0, 1e-14);
  EXPECT_NEAR(s.nu(0), -3.0, 1e-14);
}

TEST(Kkt, RandomResidual) {
  Rng rng(50);
  for (int t = 0; t < 5; ++t) {
    const Mat<double> Q = fixtures::random_pd(rng, 6);
    const Mat<double> A = fixtures::random_matrix(rng, 3, 6);
    const Vec<double> b = fixtures::random_vector(rng, 3);
    const auto s = kkt_solve_equality(single_block(Q, A, b));
    EXPECT_LE((Q * s.z + A.transpose() * s.nu).norm(), 1e-10);
    EXPECT_LE((A * s.z - b).norm(), 1e-10);
  }
}

TEST(Kkt, Preconditions) {
  EXPECT_THROW(kkt_solve_equality(generate(4, 2, 2, false, 0)), UnsupportedInstance);
  EXPECT_THROW(kkt_solve_equality(generate(4, 2, 2, true, 0, GeneratorOptions{false})), UnsupportedInstance);
  Mat<double> A(2, 2);
  A << 1, 1, 2, 2;
  EXPECT_THROW(kkt_solve_equality(single_block(Mat<double>::Identity(2, 2), A, Vec<double>::Ones(2))), RankError);
}
