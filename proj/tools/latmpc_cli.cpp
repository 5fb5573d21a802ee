// Command-line front end: each stage reads and writes JSON artifacts.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "latmpc/io.hpp"
#include "latmpc/pipeline.hpp"

using namespace latmpc;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kVerificationFailure = 2;
constexpr int kInfeasibleConfig = 3;
constexpr int kSolverFailure = 4;

void emit(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(1) << '\n';
  } else {
    write_json_file(path, j);
  }
}

Vector parse_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lattice PWA approximation of explicit linear MPC"};
  app.require_subcommand(1);

  std::string problem_path, dataset_path, out_path, lattice_d_path, lattice_c_path, config_path;
  std::vector<int> grid;
  int n_init = 0, steps = 25, n_eval = 100000, sandwich_points = 10000, qp_evals = 2000, lp_rounds = 10;
  long long n_v = 100000;
  double epsilon = 5e-3;
  std::uint64_t seed = 1;
  bool feasible_only = false, no_simplify = false;
  std::string controller = "online_qp";
  std::vector<double> x0;

  auto* condense_cmd = app.add_subcommand("condense", "Print the condensed QP matrices");
  condense_cmd->add_option("-p,--problem", problem_path, "problem JSON")->required();
  condense_cmd->add_option("-o,--out", out_path, "output JSON (default stdout)");

  auto* sample_cmd = app.add_subcommand("sample", "Sample the optimal law on a grid or along trajectories");
  sample_cmd->add_option("-p,--problem", problem_path, "problem JSON")->required();
  sample_cmd->add_option("--grid", grid, "points per dimension")->delimiter(',');
  sample_cmd->add_option("--trajectories", n_init, "number of random initial states");
  sample_cmd->add_option("--steps", steps, "closed-loop steps per trajectory");
  sample_cmd->add_option("--seed", seed);
  sample_cmd->add_option("-o,--out", out_path, "dataset JSON")->required();

  auto* refine_cmd = app.add_subcommand("refine", "Re-sample segments until the pairwise check passes");
  refine_cmd->add_option("-p,--problem", problem_path)->required();
  refine_cmd->add_option("-d,--dataset", dataset_path)->required();
  refine_cmd->add_option("--seed", seed);
  refine_cmd->add_option("--lp-rounds", lp_rounds, "LP scan repair rounds after refinement (0 disables)");
  refine_cmd->add_option("-o,--out", out_path)->required();

  auto* build_cmd = app.add_subcommand("build", "Build both lattice forms from a dataset");
  build_cmd->add_option("-d,--dataset", dataset_path)->required();
  build_cmd->add_option("--out-d", lattice_d_path)->required();
  build_cmd->add_option("--out-c", lattice_c_path)->required();
  build_cmd->add_flag("--no-simplify", no_simplify);

  auto* verify_cmd = app.add_subcommand("verify", "LP scan, statistical validation and sandwich check");
  verify_cmd->add_option("-p,--problem", problem_path)->required();
  verify_cmd->add_option("--lattice-d", lattice_d_path)->required();
  verify_cmd->add_option("--lattice-c", lattice_c_path)->required();
  verify_cmd->add_option("--nv", n_v, "validation points");
  verify_cmd->add_option("--epsilon", epsilon);
  verify_cmd->add_option("--seed", seed);
  verify_cmd->add_option("--sandwich-points", sandwich_points);
  verify_cmd->add_flag("--feasible-only", feasible_only, "validate only where the QP is feasible");
  verify_cmd->add_option("-o,--out", out_path, "report JSON (default stdout)");

  auto* sim_cmd = app.add_subcommand("simulate", "Closed-loop simulation, CSV output");
  sim_cmd->add_option("-p,--problem", problem_path)->required();
  sim_cmd->add_option("--controller", controller)->check(CLI::IsMember({"lattice_d", "lattice_c", "online_qp"}));
  sim_cmd->add_option("--lattice", lattice_d_path, "lattice JSON for lattice controllers");
  sim_cmd->add_option("--x0", x0)->delimiter(',')->required();
  sim_cmd->add_option("--steps", steps);
  sim_cmd->add_option("-o,--out", out_path, "CSV file (default stdout)");

  auto* bench_cmd = app.add_subcommand("bench", "Lattice evaluation latency versus online QP");
  bench_cmd->add_option("-p,--problem", problem_path)->required();
  bench_cmd->add_option("--lattice", lattice_d_path)->required();
  bench_cmd->add_option("--n-evals", n_eval);
  bench_cmd->add_option("--qp-evals", qp_evals);
  bench_cmd->add_option("--seed", seed);

  auto* pipe_cmd = app.add_subcommand("pipeline", "Run every stage and write artifacts");
  pipe_cmd->add_option("-c,--config", config_path, "pipeline config JSON");
  pipe_cmd->add_option("-p,--problem", problem_path, "problem JSON (overrides config)");
  pipe_cmd->add_option("--grid", grid)->delimiter(',');
  pipe_cmd->add_option("--trajectories", n_init);
  pipe_cmd->add_option("--steps", steps);
  pipe_cmd->add_option("--seed", seed);
  pipe_cmd->add_option("--nv", n_v);
  pipe_cmd->add_option("--epsilon", epsilon);
  pipe_cmd->add_option("--sandwich-points", sandwich_points);
  pipe_cmd->add_flag("--feasible-only", feasible_only);
  pipe_cmd->add_option("-o,--out", out_path, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*condense_cmd) {
      const ProblemSpec spec = problem_from_json(read_json_file(problem_path));
      const CondensedQp qp = condense(spec.problem);
      emit(out_path, {{"H", matrix_to_json(qp.H)},
                      {"F", matrix_to_json(qp.F)},
                      {"G", matrix_to_json(qp.G)},
                      {"w", vector_to_json(qp.w)},
                      {"E", matrix_to_json(qp.E)},
                      {"S", matrix_to_json(qp.S)},
                      {"P", matrix_to_json(spec.problem.P)}});
      return kOk;
    }

    if (*sample_cmd) {
      const ProblemSpec spec = problem_from_json(read_json_file(problem_path));
      const CondensedQp qp = condense(spec.problem);
      const MpcLawOracle oracle(qp);
      SamplingSpec s;
      if (!grid.empty()) {
        s.counts = grid;
      } else if (n_init > 0) {
        s.kind = SamplingSpec::Kind::trajectories;
        s.n_init = n_init;
        s.steps = steps;
      } else {
        std::cerr << "sample: give --grid or --trajectories\n";
        return kInfeasibleConfig;
      }
      SamplerOptions opt;
      opt.seed = seed;
      const SampleDataset ds = run_sampling(oracle, spec, s, opt);
      write_json_file(out_path, dataset_to_json(ds));
      std::printf("points %zu  literals %zu  perturbed %d  infeasible %d  skipped %zu\n", ds.points.size(),
                  ds.literals.size(), ds.stats.perturbed, ds.stats.infeasible, ds.stats.skipped.size());
      return ds.points.empty() ? kInfeasibleConfig : kOk;
    }

    if (*refine_cmd) {
      const ProblemSpec spec = problem_from_json(read_json_file(problem_path));
      const CondensedQp qp = condense(spec.problem);
      const MpcLawOracle oracle(qp);
      SampleDataset ds = dataset_from_json(read_json_file(dataset_path));
      RefineOptions opt;
      opt.sampler.seed = seed;
      const RefineReport rep = refine_until_valid(oracle, ds, opt);
      int witnesses = 0;
      if (lp_rounds > 0 && rep.converged) {
        witnesses = static_cast<int>(lp_scan_with_repair(oracle, ds, lp_rounds, opt).lp.witnesses.size());
      }
      write_json_file(out_path, dataset_to_json(ds));
      std::printf("iterations %d  points +%d  literals %zu  remaining %zu  lp witnesses %d\n", rep.iterations,
                  rep.points_added, ds.literals.size(), rep.remaining.size(), witnesses);
      return rep.converged && witnesses == 0 ? kOk : kVerificationFailure;
    }

    if (*build_cmd) {
      const SampleDataset ds = dataset_from_json(read_json_file(dataset_path));
      LatticeForm d = build_lattice(ds, LatticeKind::disjunctive);
      LatticeForm c = build_lattice(ds, LatticeKind::conjunctive);
      if (!no_simplify) {
        d = simplify(d);
        c = simplify(c);
      }
      write_json_file(lattice_d_path, lattice_to_json(d));
      write_json_file(lattice_c_path, lattice_to_json(c));
      const StorageStats sd = storage_stats(d), sc = storage_stats(c);
      std::printf("disjunctive: M %d terms %d params %d\nconjunctive: M %d terms %d params %d\n", sd.M, sd.N_terms,
                  sd.total_params, sc.M, sc.N_terms, sc.total_params);
      return kOk;
    }

    if (*verify_cmd) {
      const ProblemSpec spec = problem_from_json(read_json_file(problem_path));
      const CondensedQp qp = condense(spec.problem);
      const MpcLawOracle oracle(qp);
      const LatticeForm d = lattice_from_json(read_json_file(lattice_d_path));
      const LatticeForm c = lattice_from_json(read_json_file(lattice_c_path));
      VerificationReport rep;
      rep.lp = lp_scan(c, d, spec.domain);
      PointFilter filter;
      if (feasible_only) filter = [&](const Vector& x) { return solve_qp(qp, x).status == QpStatus::optimal; };
      rep.validation = hoeffding_validate(d, c, spec.domain, n_v, epsilon, seed, 1e-9, filter);
      rep.sandwich = sandwich_check(d, c, oracle, spec.domain, sandwich_points, seed);
      emit(out_path, {{"lp", to_json(rep.lp)}, {"validation", to_json(rep.validation)}, {"sandwich", to_json(rep.sandwich)}});
      const bool ok = rep.lp.witnesses.empty() && rep.validation.mismatch_count == 0 &&
                      rep.sandwich.max_lower_violation <= 1e-7 && rep.sandwich.max_upper_violation <= 1e-7;
      return ok ? kOk : kVerificationFailure;
    }

    if (*sim_cmd) {
      const ProblemSpec spec = problem_from_json(read_json_file(problem_path));
      const CondensedQp qp = condense(spec.problem);
      std::optional<LatticeForm> form;
      Controller ctrl;
      ControllerTag tag = ControllerTag::online_qp;
      if (controller == "online_qp") {
        ctrl = qp_controller(qp);
      } else {
        if (lattice_d_path.empty()) {
          std::cerr << "simulate: --lattice is required for lattice controllers\n";
          return kInfeasibleConfig;
        }
        form = lattice_from_json(read_json_file(lattice_d_path));
        ctrl = lattice_controller(*form);
        tag = controller == "lattice_d" ? ControllerTag::lattice_d : ControllerTag::lattice_c;
      }
      const Trajectory t = simulate(spec.problem, ctrl, tag, parse_vector(x0), steps);
      const std::string csv = trajectory_csv(t);
      if (out_path.empty() || out_path == "-") {
        std::cout << csv;
      } else {
        std::ofstream(out_path) << csv;
      }
      return t.truncated ? kInfeasibleConfig : kOk;
    }

    if (*bench_cmd) {
      const ProblemSpec spec = problem_from_json(read_json_file(problem_path));
      const CondensedQp qp = condense(spec.problem);
      const LatticeForm form = lattice_from_json(read_json_file(lattice_d_path));
      const BenchStats b = bench_eval(form, &qp, spec.domain, n_eval, seed, qp_evals);
      std::printf("lattice ns: mean %.1f median %.1f p99 %.1f (n=%d)\n", b.mean_ns, b.median_ns, b.p99_ns, b.n_evals);
      std::printf("online qp ns: mean %.1f median %.1f (n=%d)\nspeedup %.1fx\n", b.qp_mean_ns, b.qp_median_ns,
                  b.qp_evals, b.speedup);
      return kOk;
    }

    if (*pipe_cmd) {
      PipelineConfig cfg;
      json cj = config_path.empty() ? json::object() : read_json_file(config_path);
      if (!problem_path.empty()) cj["problem"] = problem_path;
      if (!grid.empty()) cj["sampling"] = {{"kind", "grid"}, {"counts", grid}};
      if (n_init > 0) cj["sampling"] = {{"kind", "trajectories"}, {"n_init", n_init}, {"steps", steps}};
      if (pipe_cmd->count("--seed")) cj["seed"] = seed;
      if (pipe_cmd->count("--nv")) cj["N_v"] = n_v;
      if (pipe_cmd->count("--epsilon")) cj["epsilon"] = epsilon;
      if (pipe_cmd->count("--sandwich-points")) cj["sandwich_points"] = sandwich_points;
      if (feasible_only) cj["validate_feasible_only"] = true;
      if (!out_path.empty()) cj["output_dir"] = out_path;
      cfg = pipeline_config_from_json(cj);
      if (cfg.problem_path.empty()) {
        std::cerr << "pipeline: no problem given\n";
        return kInfeasibleConfig;
      }
      const ProblemSpec spec = problem_from_json(read_json_file(cfg.problem_path));
      const PipelineResult r = run_pipeline(spec, cfg);
      std::cout << summary_table(r);
      return r.verified ? kOk : kVerificationFailure;
    }
  } catch (const PipelineError& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << '\n';
    return e.exit_code();
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInfeasibleConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverFailure;
  }
  return kOk;
}
