// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "dense_oracles.hpp"

#include "dualdg/dmpc.hpp"
#include "dualdg/dual.hpp"
#include "dualdg/errorbound.hpp"
#include "dualdg/gen.hpp"
#include "dualdg/random.hpp"
#include "dualdg/reference.hpp"
#include "dualdg/sim.hpp"
#include "dualdg/stepsize.hpp"

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace dualdg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const Outcome& o) {
  std::printf("%s  %2d  %-28s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

// Shared family: M = 20, n_i = 5, omega = 3, gamma alternating with the seed.
constexpr Index kM = 20;
constexpr Index kN = 5;
constexpr Index kOmega = 3;
constexpr int kSeeds = 10;

struct Instance {
  std::uint64_t seed;
  BlockProblem<double> problem;
  Weights<double> W;
  RefSolution<double> ref;
  RunTrace<double> trace;  // DG, relative stop 1e-4, cap 1e5
};

std::vector<Instance> family;
double family_run_seconds = 0;

void build_family() {
  for (int s = 0; s < kSeeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    auto problem = generate(kM, kN, kOmega, s % 2 == 1, seed);
    auto W = compute_weights(problem);
    auto ref = solve_reference(problem, W);
    family.push_back({seed, std::move(problem), std::move(W), std::move(ref), {}});
  }
  const auto t0 = Clock::now();
  for (auto& inst : family) {
    const Vec<double> zero = Vec<double>::Zero(inst.problem.graph().total_rows());
    inst.trace = run(inst.problem, Algorithm::DG, inst.W, 0.0, zero, StopRule{StopMode::RelativePrimal, 1e-4, 100000},
                     &inst.ref);
  }
  family_run_seconds = seconds_since(t0);
}

Outcome ascent() {
  Index violations = 0, steps = 0;
  for (const auto& inst : family) {
    violations += inst.trace.ascent_violations;
    steps += inst.trace.iterations;
  }
  const bool pass = violations == 0 && family_run_seconds < 60;
  return {pass, fmt("%ld violations over %ld steps, %.1f s", static_cast<long>(violations), static_cast<long>(steps),
                    family_run_seconds)};
}

// Replays each run step by step; checks criteria 2 and 4 together.
struct Replay {
  Index distance_violations = 0;
  double worst_identity = 0;
  Index steps = 0;
};

Replay replay_family() {
  Replay r;
  for (const auto& inst : family) {
    const auto& p = inst.problem;
    const Index P = p.graph().total_p();
    Vec<double> lam = Vec<double>::Zero(p.graph().total_rows());
    double dist = inst.W.norm(lam - inst.ref.lambda_ref);
    for (Index k = 0; k < inst.trace.iterations; ++k) {
      const auto step = dg_step<double>(p, inst.W, lam);
      // Residual from its definition: [lambda + W^{-1} grad]_D - lambda, clamped by hand.
      Vec<double> raw = lam + (step.at.grad.array() / inst.W.diagonal().array()).matrix();
      raw.tail(raw.size() - P) = raw.tail(raw.size() - P).cwiseMax(0.0);
      const double res = inst.W.norm(raw - lam);
      const double moved = inst.W.norm(step.next - lam);
      r.worst_identity = std::max(r.worst_identity, std::abs(res - moved) / std::max(1.0, moved));
      // The trace records the same quantity from the driver.
      r.worst_identity = std::max(r.worst_identity, std::abs(inst.trace.rows[k].prox_w - moved) / std::max(1.0, moved));
      const double next_dist = inst.W.norm(step.next - inst.ref.lambda_ref);
      if (next_dist > dist + 1e-9) ++r.distance_violations;
      dist = next_dist;
      lam = step.next;
      ++r.steps;
    }
    if (lam != inst.trace.final_lambda) r.distance_violations += 1000000;  // replay diverged from the run
  }
  return r;
}

Outcome gradient_fd() {
  Rng rng(2024);
  double worst = 0;
  Index points = 0;
  for (const auto& inst : family) {
    const auto& p = inst.problem;
    for (int s = 0; s < 20; ++s) {
      Vec<double> lam(p.graph().total_rows());
      for (Index k = 0; k < lam.size(); ++k) lam(k) = rng.normal();
      lam.tail(p.graph().total_q()) = lam.tail(p.graph().total_q()).cwiseAbs();
      const Vec<double> g = dual_gradient<double>(p, lam).grad;
      const Vec<double> fd =
          oracle::fd_gradient([&](const Vec<double>& x) { return dual_value<double>(p, x); }, lam, 1e-6);
      worst = std::max(worst, (g - fd).norm() / std::max(1.0, g.norm()));
      ++points;
    }
  }
  return {worst <= 1e-6, fmt("worst relative error %.2e at %ld points", worst, static_cast<long>(points))};
}

Outcome linear_rate() {
  int ok = 0;
  std::string worst;
  double worst_r2 = 2;
  for (const auto& inst : family) {
    const auto& rows = inst.trace.rows;
    const bool converged = inst.trace.status == RunStatus::Converged;
    std::vector<double> cols[3];
    for (const auto& row : rows) {
      cols[0].push_back(row.dual_subopt);
      cols[1].push_back(row.infeas_w);
      cols[2].push_back(row.dist_z);
    }
    const std::size_t half = rows.size() / 2;
    bool fits = true;
    double r2[3];
    for (int c = 0; c < 3; ++c) {
      const auto fit = fit_log10(cols[c], half, rows.size());
      r2[c] = fit.r_squared;
      fits = fits && fit.points >= 2 && fit.slope < 0 && fit.r_squared >= 0.95;
      if (fit.r_squared < worst_r2) {
        worst_r2 = fit.r_squared;
        worst = fmt("seed %lu", static_cast<unsigned long>(inst.seed));
      }
    }
    std::printf("      seed %lu: k=%ld %s R2 = %.3f %.3f %.3f\n", static_cast<unsigned long>(inst.seed),
                static_cast<long>(inst.trace.iterations), to_string(inst.trace.status), r2[0], r2[1], r2[2]);
    if (converged && fits) ++ok;
  }
  return {ok == kSeeds, fmt("%d/%d instances converged with R2 >= 0.95 on all three series (min R2 %.3f, %s)", ok,
                            kSeeds, worst_r2, worst.c_str())};
}

struct Comparison {
  Index k_dg, k_cg;
  bool converged;
};

Comparison compare(const BlockProblem<double>& p, double eps) {
  const auto W = compute_weights(p);
  const double Ld = global_dual_lipschitz(p);
  const auto ref = solve_reference(p, W);
  const Vec<double> zero = Vec<double>::Zero(p.graph().total_rows());
  const StopRule stop{StopMode::RelativePrimal, eps, 1000000};
  RunOptions opts;
  opts.check_ascent = false;
  const auto dg = run(p, Algorithm::DG, W, Ld, zero, stop, &ref, opts);
  const auto cg = run(p, Algorithm::CG, W, Ld, zero, stop, &ref, opts);
  return {dg.iterations, cg.iterations, dg.status == RunStatus::Converged && cg.status == RunStatus::Converged};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t s = 0; s < idx.size();) {
    std::size_t e = s;
    while (e + 1 < idx.size() && v[idx[e + 1]] == v[idx[s]]) ++e;
    for (std::size_t t = s; t <= e; ++t) r[idx[t]] = 0.5 * static_cast<double>(s + e);
    s = e + 1;
  }
  return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += rx[k] / n;
    my += ry[k] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (rx[k] - mx) * (ry[k] - my);
    sxx += (rx[k] - mx) * (rx[k] - mx);
    syy += (ry[k] - my) * (ry[k] - my);
  }
  return sxx > 0 && syy > 0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}

Outcome dg_vs_cg() {
  const Index omega = static_cast<Index>(std::ceil(0.15 * static_cast<double>(kM)));
  int wins = 0;
  bool all_converged = true;
  for (int s = 0; s < kSeeds; ++s) {
    const auto c = compare(generate(kM, kN, omega, s % 2 == 1, static_cast<std::uint64_t>(s)), 1e-2);
    all_converged = all_converged && c.converged;
    if (c.k_dg < c.k_cg) ++wins;
    std::printf("      omega %ld seed %d: k_dg=%ld k_cg=%ld\n", static_cast<long>(omega), s, static_cast<long>(c.k_dg),
                static_cast<long>(c.k_cg));
  }

  const std::vector<double> omegas{2, 4, 8, 12};
  std::vector<double> medians;
  for (double w : omegas) {
    std::vector<double> ratios;
    for (int s = 0; s < 5; ++s) {
      const auto c = compare(generate(kM, kN, static_cast<Index>(w), s % 2 == 1, static_cast<std::uint64_t>(100 + s)),
                             1e-2);
      all_converged = all_converged && c.converged;
      ratios.push_back(c.k_cg > 0 ? static_cast<double>(c.k_dg) / static_cast<double>(c.k_cg) : 1.0);
    }
    medians.push_back(median(ratios));
  }
  const double rho = spearman(omegas, medians);
  const bool pass = all_converged && wins >= 9 && rho >= 0;
  return {pass, fmt("k_DG < k_CG in %d/%d seeds; median ratio over omega {2,4,8,12} = %.3f %.3f %.3f %.3f, "
                    "Spearman %.2f%s",
                    wins, kSeeds, medians[0], medians[1], medians[2], medians[3], rho,
                    all_converged ? "" : "; some run hit the cap")};
}

Outcome tightness() {
  double worst = 0;
  for (auto [omega, m] : std::vector<std::pair<Index, Index>>{{1, 3}, {2, 4}, {3, 5}}) {
    const auto t = tightness_instance<double>(omega, m);
    const auto d = oracle::build(t.problem);
    const Vec<double> Gh = d.G.transpose() * t.direction;
    const double curvature = Gh.dot(d.Q.ldlt().solve(Gh));
    const double weighted = compute_weights(t.problem).sq_norm(t.direction);
    worst = std::max(worst, std::abs(curvature - weighted));
  }
  return {worst <= 1e-10, fmt("max |h'GQ^-1G'h - ||h||_W^2| = %.2e", worst)};
}

Outcome inequalities() {
  Index violations = 0, pairs = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& inst : family) {
    const auto rep = inequality_campaign(inst.problem, inst.W, inst.ref.lambda_ref, 200, 1000 + inst.seed);
    violations += rep.violations();
    pairs += rep.pairs;
    worst = std::min({worst, rep.worst_descent, rep.worst_gradient_residual, rep.worst_lipschitz3});
  }
  return {violations == 0, fmt("%ld violations over %ld pairs, smallest relative margin %.2e",
                               static_cast<long>(violations), static_cast<long>(pairs), worst)};
}

Outcome error_bound() {
  bool pass = true;
  double worst = 0;
  for (int s = 0; s < 5; ++s) {
    const auto p = generate(kM, kN, kOmega, false, static_cast<std::uint64_t>(s), GeneratorOptions{false});
    const auto W = compute_weights(p);
    const auto ref = solve_reference(p, W);
    RunOptions o;
    o.keep_iterates = true;
    const auto t = run(p, Algorithm::DG, W, 0.0, Vec<double>::Zero(p.graph().total_rows()),
                       StopRule{StopMode::ProxResidual, 1e-8, 100000}, &ref, o);
    const auto rep = probe_error_bound(p, W, t.iterates, ref);
    const double rel = rep.kappa_hat / *rep.kappa_bound;
    worst = std::max(worst, rel);
    pass = pass && rep.nonfinite == 0 && !rep.ratios.empty() && rep.within_bound(0.01);
  }
  return {pass, fmt("max kappa_hat / (2/sigma_dW) = %.4f over 5 instances", worst)};
}

Outcome distributed() {
  bool bitwise = true, local = true;
  for (int s = 0; s < 5; ++s) {
    const auto p = generate(kM, kN, kOmega, s % 2 == 1, static_cast<std::uint64_t>(s));
    const auto W = compute_weights(p);
    const Vec<double> zero = Vec<double>::Zero(p.graph().total_rows());
    const auto d = run_distributed<double>(p, W, zero, 50);
    const auto m = run<double>(p, Algorithm::DG, W, 0.0, zero, StopRule{StopMode::IterationCap, 1.0, 50});
    bitwise = bitwise && d.lambda == m.final_lambda;
    local = local && verify_locality(d.log, p.graph());
  }

  const auto p = generate(kM, kN, kOmega, false, 0);
  const auto& g = p.graph();
  Index off = 0;
  while (g.has_edge(0, off)) ++off;
  bool caught = false;
  try {
    run_distributed<double>(p, compute_weights(p), Vec<double>::Zero(g.total_rows()), 3,
                            [&](Network<double>& net, Index round) {
                              if (round == 2) net.send(round, Direction::PrimalToDual, off, 0, {});
                            });
  } catch (const LocalityViolation&) {
    caught = true;
  }
  return {bitwise && local && caught, fmt("bitwise %s, locality %s, off-edge message %s", bitwise ? "yes" : "no",
                                          local ? "yes" : "no", caught ? "caught" : "missed")};
}

// Median seconds per DG iteration over a few repeats.
double seconds_per_iteration(const BlockProblem<double>& p, Index iterations) {
  const auto W = compute_weights(p);
  const Vec<double> zero = Vec<double>::Zero(p.graph().total_rows());
  RunOptions o;
  o.check_ascent = false;
  std::vector<double> times;
  for (int rep = 0; rep < 5; ++rep) {
    const auto t = run<double>(p, Algorithm::DG, W, 0.0, zero, StopRule{StopMode::IterationCap, 1.0, iterations},
                               nullptr, o);
    times.push_back(t.seconds / static_cast<double>(iterations + 1));
  }
  return median(times);
}

Outcome dmpc_scaling() {
  const std::vector<std::pair<Index, Index>> sizes{{8, 4}, {16, 4}, {16, 8}};
  std::vector<double> mn, t;
  for (auto [M, N] : sizes) {
    const auto p = build_problem(ring_system(M, N, 7));
    mn.push_back(static_cast<double>(M * N));
    t.push_back(seconds_per_iteration(p, 400));
  }
  // Least squares through the origin: t = alpha * M * N.
  double num = 0, den = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    num += mn[k] * t[k];
    den += mn[k] * mn[k];
  }
  const double alpha = num / den;
  double lo = INFINITY, hi = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double r = t[k] / (alpha * mn[k]);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return {lo >= 0.5 && hi <= 2.0,
          fmt("per-iteration us %.1f %.1f %.1f; measured/fit in [%.2f, %.2f]", 1e6 * t[0], 1e6 * t[1], 1e6 * t[2], lo,
              hi)};
}

Outcome scalar_hand() {
  BipartiteGraph g(1, 1, {{0, 0}}, {1}, {1}, {0});
  std::vector<BlockObjective<double>> objs{BlockObjective<double>(Mat<double>::Identity(1, 1), Vec<double>::Zero(1))};
  BlockProblem<double>::BlockMap blocks;
  blocks[{0, 0}] = {Mat<double>::Ones(1, 1), Mat<double>(0, 1)};
  const auto p = BlockProblem<double>::from_blocks(g, objs, blocks, Vec<double>::Ones(1), Vec<double>(0));
  const auto W = compute_weights(p);
  const auto first = dg_step<double>(p, W, Vec<double>::Zero(1));
  const auto second = dg_step<double>(p, W, first.next);
  const double f = eval_objective<double>(p, second.at.z);
  const bool pass = W.diagonal()(0) == 1.0 && first.next(0) == -1.0 && second.at.z(0) == 1.0 && f == 0.5 &&
                    second.next(0) == -1.0;
  return {pass, fmt("w = %g, nu1 = %g, z(nu1) = %g, f = %g", W.diagonal()(0), first.next(0), second.at.z(0), f)};
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  build_family();

  report(1, "ascent", ascent());
  const Replay replay = replay_family();
  report(2, "monotone distance",
         {replay.distance_violations == 0,
          fmt("%ld increases over %ld steps", static_cast<long>(replay.distance_violations),
              static_cast<long>(replay.steps))});
  report(3, "gradient vs differences", gradient_fd());
  report(4, "residual identity",
         {replay.worst_identity <= 1e-12, fmt("max relative gap %.2e", replay.worst_identity)});
  report(5, "linear rate", linear_rate());
  report(6, "DG vs CG", dg_vs_cg());
  report(7, "step-size tightness", tightness());
  report(8, "inequality suite", inequalities());
  report(9, "error-bound probe", error_bound());
  report(10, "distributed equivalence", distributed());
  report(11, "DMPC scaling", dmpc_scaling());
  report(12, "scalar by hand", scalar_hand());

  std::printf("%d of 12 criteria failed, %.1f s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
