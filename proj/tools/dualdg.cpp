// Command-line front end: generate, solve, compare, dmpc, probe.
//
// Exit codes: 0 success, 1 unexpected failure, 2 usage or input error,
// 3 numeric failure (non-convergence, rank loss, unsupported instance).

#include "dualdg/dmpc.hpp"
#include "dualdg/errorbound.hpp"
#include "dualdg/gen.hpp"
#include "dualdg/io.hpp"
#include "dualdg/reference.hpp"
#include "dualdg/stepsize.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace dualdg;
using io::json;

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Loaded {
  BlockProblem<double> problem;
  std::uint64_t hash;
};

Loaded load_problem(const std::string& path) {
  const std::string text = io::read_text(path);
  try {
    return {io::problem_from_json(json::parse(text)), io::content_hash(text)};
  } catch (const json::exception& e) {
    throw io::FormatError(path + ": " + e.what());
  }
}

/// Reads the reference at `where` or computes it. "auto" means
/// <problem>.ref.json; a cached file whose hash does not match the problem
/// is recomputed. An explicit path that does not exist is computed and written.
RefSolution<double> obtain_reference(const std::string& where, const std::string& problem_path, const Loaded& loaded,
                                     const Weights<double>& W, int jobs) {
  const std::string path = where == "auto" ? problem_path + ".ref.json" : where;
  if (std::filesystem::exists(path)) {
    std::uint64_t hash = 0;
    auto ref = io::reference_from_json(json::parse(io::read_text(path)), &hash);
    if (hash == loaded.hash) return ref;
    if (where != "auto") throw UsageError("reference " + path + " was computed for a different problem");
  }
  ReferenceOptions opts;
  opts.jobs = jobs;
  auto ref = solve_reference(loaded.problem, W, opts);
  if (ref.quality.low_quality) {
    std::cerr << "warning: reference did not reach the target accuracy (prox_w=" << ref.quality.prox_w
              << ", infeas=" << ref.quality.infeas << ")\n";
  }
  io::write_text(path, io::dump(io::reference_to_json(ref, loaded.hash)));
  return ref;
}

struct Constants {
  double L_d;
  double w_max;
  double w_min;
  double sigma_f;
  double norm_G;
  Index omega;
};

Constants problem_constants(const BlockProblem<double>& problem, const Weights<double>& W) {
  const double normG_sq = spectral_norm_sq(assemble_dense(problem).G);
  const double sigma_f = conjugate_strong_convexity(problem).sigma_f;
  return {normG_sq / sigma_f, W.max(), W.min(), sigma_f, std::sqrt(normG_sq), neighborhoods(problem.graph()).omega};
}

json constants_json(const Constants& c) {
  return {{"L_d", c.L_d}, {"w_max", c.w_max}, {"w_min", c.w_min},
          {"sigma_f", c.sigma_f}, {"norm_G", c.norm_G}, {"omega", c.omega}};
}

json last_row_json(const RunTrace<double>& trace) {
  const auto& r = trace.rows.back();
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"dual", num(r.dual)},          {"f", num(r.f)},
          {"dual_subopt", num(r.dual_subopt)}, {"primal_subopt", num(r.primal_subopt)},
          {"infeas_w", num(r.infeas_w)},  {"dist_z", num(r.dist_z)},
          {"step_w", num(r.step_w)},      {"prox_w", num(r.prox_w)}};
}

void write_or_print(const std::string& path, const json& doc) {
  if (path.empty() || path == "-") {
    std::cout << io::dump(doc);
  } else {
    io::write_text(path, io::dump(doc));
  }
}

int cmd_generate(Index m, Index n, Index omega, bool gamma, std::uint64_t seed, bool equality_only,
                 const std::string& out) {
  if (omega < 1 || omega > m) throw UsageError("--omega must satisfy 1 <= omega <= m");
  GeneratorOptions opts;
  opts.inequalities = !equality_only;
  auto problem = generate(m, n, omega, gamma, seed, opts);
  io::write_problem(out, problem);
  const auto& g = problem.graph();
  std::cout << io::dump({{"file", out},
                         {"n", g.total_n()},
                         {"p", g.total_p()},
                         {"q", g.total_q()},
                         {"omega", neighborhoods(g).omega},
                         {"seed", seed}});
  return 0;
}

struct SolveArgs {
  std::string problem;
  std::string algo = "dg";
  double eps = 1e-8;
  std::string stop = "prox";
  Index cap = 1000000;
  std::string trace;
  std::string ref;
  std::string summary;
  int jobs = 1;
};

StopMode parse_stop(const std::string& s) {
  if (s == "rel") return StopMode::RelativePrimal;
  if (s == "prox") return StopMode::ProxResidual;
  return StopMode::IterationCap;
}

int cmd_solve(const SolveArgs& a) {
  const StopMode mode = parse_stop(a.stop);
  if (mode == StopMode::RelativePrimal && a.ref.empty()) {
    throw UsageError("--stop rel needs --ref (a reference file or 'auto')");
  }
  const Loaded loaded = load_problem(a.problem);
  const auto& problem = loaded.problem;
  const Weights<double> W = compute_weights(problem);
  const Constants c = problem_constants(problem, W);

  std::optional<RefSolution<double>> ref;
  if (!a.ref.empty()) ref = obtain_reference(a.ref, a.problem, loaded, W, a.jobs);

  const Algorithm algo = a.algo == "cg" ? Algorithm::CG : Algorithm::DG;
  const StopRule stop{mode, a.eps, a.cap};
  RunOptions opts;
  opts.jobs = a.jobs;
  const Vec<double> lambda0 = Vec<double>::Zero(problem.graph().total_rows());
  const auto trace = run(problem, algo, W, c.L_d, lambda0, stop, ref ? &*ref : nullptr, opts);

  if (!a.trace.empty()) {
    std::ofstream out(a.trace);
    if (!out) throw io::FormatError("cannot write " + a.trace);
    io::write_trace_csv(out, trace);
  }

  json summary = {{"algorithm", to_string(algo)},
                  {"stop", to_string(mode)},
                  {"eps", a.eps},
                  {"cap", a.cap},
                  {"status", to_string(trace.status)},
                  {"iterations", trace.iterations},
                  {"ascent_violations", trace.ascent_violations},
                  {"seconds", trace.seconds},
                  {"final", last_row_json(trace)},
                  {"constants", constants_json(c)}};
  if (problem.seed) summary["seed"] = *problem.seed;
  if (ref) summary["f_star"] = ref->f_star;
  write_or_print(a.summary, summary);
  return 0;
}

int cmd_compare(const std::string& path, double eps, Index cap, const std::string& ref_spec, const std::string& out,
                int jobs) {
  const Loaded loaded = load_problem(path);
  const auto& problem = loaded.problem;
  const Weights<double> W = compute_weights(problem);
  const Constants c = problem_constants(problem, W);
  const auto ref = obtain_reference(ref_spec, path, loaded, W, jobs);

  const StopRule stop{StopMode::RelativePrimal, eps, cap};
  RunOptions opts;
  opts.jobs = jobs;
  const Vec<double> lambda0 = Vec<double>::Zero(problem.graph().total_rows());
  const auto dg = run(problem, Algorithm::DG, W, c.L_d, lambda0, stop, &ref, opts);
  const auto cg = run(problem, Algorithm::CG, W, c.L_d, lambda0, stop, &ref, opts);

  const bool both = dg.status == RunStatus::Converged && cg.status == RunStatus::Converged;
  json report = {{"eps", eps},
                 {"k_dg", dg.iterations},
                 {"k_cg", cg.iterations},
                 {"ratio", cg.iterations > 0 ? static_cast<double>(dg.iterations) / static_cast<double>(cg.iterations)
                                             : (dg.iterations == 0 ? 1.0 : 0.0)},
                 {"dg_status", to_string(dg.status)},
                 {"cg_status", to_string(cg.status)},
                 {"converged", both},
                 {"f_star", ref.f_star},
                 {"constants", constants_json(c)}};
  write_or_print(out, report);
  return 0;
}

int cmd_dmpc(const std::string& system_path, std::optional<Index> horizon, const std::string& out) {
  NetworkedSystem sys;
  try {
    sys = io::system_from_json(json::parse(io::read_text(system_path)));
  } catch (const json::exception& e) {
    throw io::FormatError(system_path + ": " + e.what());
  }
  if (horizon) sys.horizon = *horizon;
  if (sys.horizon < 1) throw UsageError("--horizon must be at least 1");
  const auto problem = build_problem(sys);
  io::write_problem(out, problem);
  const auto& g = problem.graph();
  std::cout << io::dump({{"file", out}, {"n", g.total_n()}, {"p", g.total_p()}, {"q", g.total_q()},
                         {"horizon", sys.horizon}});
  return 0;
}

int cmd_probe(const std::string& path, const std::string& trace_path, const std::string& ref_spec, Index pairs,
              std::uint64_t seed, const std::string& out, int jobs) {
  const Loaded loaded = load_problem(path);
  const auto& problem = loaded.problem;
  const Weights<double> W = compute_weights(problem);
  const auto ref = obtain_reference(ref_spec, path, loaded, W, jobs);

  std::ifstream tin(trace_path);
  if (!tin) throw io::FormatError("cannot open " + trace_path);
  const auto rows = io::read_trace_csv(tin);
  if (rows.empty()) throw io::FormatError(trace_path + ": no rows");

  // The trace stores dual values, not multipliers; replay DG from zero and
  // confirm that it reproduces the recorded dual column.
  RunOptions opts;
  opts.jobs = jobs;
  opts.keep_iterates = true;
  opts.check_ascent = false;
  const Vec<double> lambda0 = Vec<double>::Zero(problem.graph().total_rows());
  const Index K = rows.back().k;
  const auto replay = run(problem, Algorithm::DG, W, 0.0, lambda0, StopRule{StopMode::IterationCap, 1.0,
                                                                              std::max<Index>(K, 1)},
                          &ref, opts);
  for (std::size_t k = 0; k < rows.size() && k < replay.rows.size(); ++k) {
    const double want = rows[k].dual;
    const double got = replay.rows[k].dual;
    if (std::abs(want - got) > 1e-9 * std::max(1.0, std::abs(want))) {
      throw UsageError("trace does not match a DG run from zero on this problem (row " + std::to_string(k) + ")");
    }
  }
  std::vector<Vec<double>> iterates(replay.iterates.begin(),
                                    replay.iterates.begin() + static_cast<std::ptrdiff_t>(rows.size()));

  const auto campaign = inequality_campaign(problem, W, ref.lambda_ref, pairs, seed);
  json report = {{"campaign",
                  {{"pairs", campaign.pairs},
                   {"seed", seed},
                   {"descent_violations", campaign.descent_violations},
                   {"gradient_residual_violations", campaign.gradient_residual_violations},
                   {"lipschitz3_violations", campaign.lipschitz3_violations},
                   {"worst_descent", campaign.worst_descent},
                   {"worst_gradient_residual", campaign.worst_gradient_residual},
                   {"worst_lipschitz3", campaign.worst_lipschitz3}}}};

  int code = 0;
  try {
    const auto probe = probe_error_bound(problem, W, iterates, ref);
    json ratios = json::array();
    for (std::size_t t = 0; t < probe.ratios.size(); ++t) ratios.push_back({{"k", probe.k[t]}, {"ratio", probe.ratios[t]}});
    report["probe"] = {{"samples", probe.ratios.size()},
                       {"excluded", probe.excluded},
                       {"nonfinite", probe.nonfinite},
                       {"kappa_hat", probe.kappa_hat},
                       {"median", probe.median},
                       {"bounded", probe.bounded()},
                       {"ratios", ratios}};
    if (probe.kappa_bound) {
      report["probe"]["kappa_bound"] = *probe.kappa_bound;
      report["probe"]["within_bound"] = probe.within_bound();
    }
  } catch (const UnsupportedInstance& e) {
    report["probe"] = {{"unsupported", e.what()}};
    code = kExitNumeric;
  }
  write_or_print(out, report);
  if (code != 0) std::cerr << "error: " << report["probe"]["unsupported"].get<std::string>() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted dual gradient solver for separable convex problems with sparse linear coupling"};
  app.require_subcommand(1);

  Index m = 0, n = 0, omega = 0;
  bool gamma = false, equality_only = false;
  std::uint64_t seed = 0;
  std::string out;
  auto* gen = app.add_subcommand("generate", "Write a random instance");
  gen->add_option("--m", m, "Number of primal blocks (M = M_bar)")->required()->check(CLI::PositiveNumber);
  gen->add_option("--n", n, "Block dimension")->required()->check(CLI::PositiveNumber);
  gen->add_option("--omega", omega, "Maximum neighborhood size")->required()->check(CLI::PositiveNumber);
  gen->add_option("--gamma", gamma, "1 adds the softplus term to every block")->default_val(false);
  gen->add_option("--seed", seed, "Generator seed")->default_val(0);
  gen->add_flag("--equality-only", equality_only, "Omit the inequality rows");
  gen->add_option("--out", out, "Output problem file")->required();

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "Run DG or CG and write a trace");
  solve->add_option("--problem", sa.problem)->required()->check(CLI::ExistingFile);
  solve->add_option("--algo", sa.algo)->check(CLI::IsMember({"dg", "cg"}))->default_val("dg");
  solve->add_option("--eps", sa.eps)->check(CLI::PositiveNumber)->default_val(1e-8);
  solve->add_option("--stop", sa.stop)->check(CLI::IsMember({"rel", "prox", "cap"}))->default_val("prox");
  solve->add_option("--cap", sa.cap)->check(CLI::PositiveNumber)->default_val(1000000);
  solve->add_option("--trace", sa.trace, "Trace CSV output");
  solve->add_option("--ref", sa.ref, "Reference file, or 'auto' to cache beside the problem");
  solve->add_option("--summary", sa.summary, "Summary JSON output (default stdout)");
  solve->add_option("--jobs", sa.jobs)->check(CLI::PositiveNumber)->default_val(1);

  std::string problem_path, ref_spec = "auto";
  double eps = 1e-2;
  Index cap = 1000000;
  int jobs = 1;
  auto* compare = app.add_subcommand("compare", "Iterations of DG and CG to the same relative accuracy");
  compare->add_option("--problem", problem_path)->required()->check(CLI::ExistingFile);
  compare->add_option("--eps", eps)->check(CLI::PositiveNumber)->default_val(1e-2);
  compare->add_option("--cap", cap)->check(CLI::PositiveNumber)->default_val(1000000);
  compare->add_option("--ref", ref_spec)->default_val("auto");
  compare->add_option("--out", out, "Report JSON (default stdout)");
  compare->add_option("--jobs", jobs)->check(CLI::PositiveNumber)->default_val(1);

  std::string system_path;
  std::optional<Index> horizon;
  auto* dmpc = app.add_subcommand("dmpc", "Build the stacked problem for a networked system");
  dmpc->add_option("--system", system_path)->required()->check(CLI::ExistingFile);
  dmpc->add_option("--horizon", horizon, "Overrides the horizon in the system file");
  dmpc->add_option("--out", out)->required();

  std::string trace_path;
  Index pairs = 200;
  std::uint64_t probe_seed = 0;
  auto* probe = app.add_subcommand("probe", "Error-bound ratios along a DG trace and inequality checks");
  probe->add_option("--problem", problem_path)->required()->check(CLI::ExistingFile);
  probe->add_option("--trace", trace_path)->required()->check(CLI::ExistingFile);
  probe->add_option("--ref", ref_spec)->default_val("auto");
  probe->add_option("--pairs", pairs, "Sampled point pairs for the inequality checks")->default_val(200);
  probe->add_option("--seed", probe_seed)->default_val(0);
  probe->add_option("--out", out, "Report JSON (default stdout)");
  probe->add_option("--jobs", jobs)->check(CLI::PositiveNumber)->default_val(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(m, n, omega, gamma, seed, equality_only, out);
    if (*solve) return cmd_solve(sa);
    if (*compare) return cmd_compare(problem_path, eps, cap, ref_spec, out, jobs);
    if (*dmpc) return cmd_dmpc(system_path, horizon, out);
    if (*probe) return cmd_probe(problem_path, trace_path, ref_spec, pairs, probe_seed, out, jobs);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const io::FormatError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const StructuralError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidObjective& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const RankError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DegenerateWeights& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const UnsupportedInstance& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
