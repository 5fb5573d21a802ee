#include "latmpc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace latmpc {

using nlohmann::json;

namespace {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void write_artifacts(const std::string& dir, const PipelineResult& r, bool have_forms) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  write_json_file((base / "dataset.json").string(), dataset_to_json(r.dataset));
  if (have_forms) {
    write_json_file((base / "lattice_d.json").string(), lattice_to_json(r.form_d));
    write_json_file((base / "lattice_c.json").string(), lattice_to_json(r.form_c));
  }
  write_json_file((base / "report.json").string(), summary_json(r));
  std::ofstream((base / "summary.txt").string()) << summary_table(r);
}

}  // namespace

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  c.problem_path = j.value("problem", std::string());
  if (j.contains("sampling")) {
    const json& s = j["sampling"];
    const std::string kind = s.value("kind", std::string("grid"));
    if (kind == "grid") {
      c.sampling.kind = SamplingSpec::Kind::grid;
      c.sampling.counts = s.at("counts").get<std::vector<int>>();
    } else if (kind == "trajectories") {
      c.sampling.kind = SamplingSpec::Kind::trajectories;
      c.sampling.n_init = s.at("n_init").get<int>();
      c.sampling.steps = s.at("steps").get<int>();
    } else {
      throw InvalidInput("sampling kind must be 'grid' or 'trajectories'");
    }
  } else {
    throw InvalidInput("pipeline config needs a sampling section");
  }
  c.seed = j.value("seed", c.seed);
  c.N_v = j.value("N_v", c.N_v);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.tol_eq = j.value("tol_eq", c.tol_eq);
  c.sandwich_points = j.value("sandwich_points", c.sandwich_points);
  c.lp_rounds = j.value("lp_rounds", c.lp_rounds);
  c.validate_feasible_only = j.value("validate_feasible_only", c.validate_feasible_only);
  c.sandwich_tol = j.value("sandwich_tol", c.sandwich_tol);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.refine.max_iterations = j.value("refine_iterations", c.refine.max_iterations);
  c.refine.sampler.seed = c.seed;
  if (!(c.epsilon > 0.0) || !(c.tol_eq > 0.0) || !(c.sandwich_tol > 0.0)) {
    throw InvalidInput("tolerances must be positive");
  }
  return c;
}

SampleDataset run_sampling(const LawOracle& oracle, const ProblemSpec& spec, const SamplingSpec& sampling,
                           const SamplerOptions& options) {
  if (sampling.kind == SamplingSpec::Kind::grid) return sample_grid(oracle, spec.domain, sampling.counts, options);
  return sample_trajectories(oracle, spec.problem.A, spec.problem.B, spec.domain, sampling.n_init, sampling.steps,
                             options);
}

LatticeForm build_simplified(const SampleDataset& ds, LatticeKind kind) { return simplify(build_lattice(ds, kind)); }

LpRepairOutcome lp_scan_with_repair(const LawOracle& oracle, SampleDataset& ds, int max_rounds,
                                    const RefineOptions& options) {
  LpRepairOutcome out;
  CounterRng rng(options.sampler.seed, 0x4c50'5250ULL);
  for (int round = 0;; ++round) {
    out.form_d = build_simplified(ds, LatticeKind::disjunctive);
    out.form_c = build_simplified(ds, LatticeKind::conjunctive);
    out.lp = lp_scan(out.form_c, out.form_d, ds.domain);
    out.rounds = round;
    if (out.lp.witnesses.empty() || round >= max_rounds) return out;
    const std::size_t points0 = ds.points.size();
    const std::size_t literals0 = ds.literals.size();
    for (const auto& w : out.lp.witnesses) {
      if (w.owner_c < 0 || w.owner_d < 0) continue;
      lemma16_repair(oracle, ds, w.x, w.owner_c, w.owner_d, rng, options);
    }
    if (ds.points.size() == points0 && ds.literals.size() == literals0) return out;
    restore_uo_interior(oracle, ds, {}, options.restore_fraction * ds.domain.width().minCoeff(), true,
                        options.sampler, 0x4c50'0000ULL + static_cast<std::uint64_t>(round));
    refine_until_valid(oracle, ds, options);
  }
}

PipelineResult run_pipeline(const ProblemSpec& spec, const PipelineConfig& config) {
  PipelineResult r;
  r.spec = spec;
  const std::string& dir = config.output_dir;
  std::string stage = "condense";
  bool have_forms = false;
  auto fail = [&](const std::string& what, int code) -> PipelineError {
    try {
      write_artifacts(dir, r, have_forms);
    } catch (...) {
    }
    return PipelineError(stage, what, code);
  };
  try {
    Stopwatch total;
    Stopwatch sw;
    const CondensedQp qp = condense(spec.problem);
    const MpcLawOracle oracle(qp);
    r.timings.push_back({stage, sw.seconds()});

    stage = "sample";
    sw = Stopwatch();
    SamplerOptions sopt = config.refine.sampler;
    sopt.seed = config.seed;
    r.dataset = run_sampling(oracle, spec, config.sampling, sopt);
    r.timings.push_back({stage, sw.seconds()});
    if (r.dataset.points.empty()) throw fail("no feasible sample point", 3);

    stage = "refine";
    sw = Stopwatch();
    RefineOptions ropt = config.refine;
    ropt.sampler = sopt;
    r.refine = refine_until_valid(oracle, r.dataset, ropt);
    r.timings.push_back({stage, sw.seconds()});

    stage = "lp_scan";
    sw = Stopwatch();
    LpRepairOutcome lp = lp_scan_with_repair(oracle, r.dataset, config.lp_rounds, ropt);
    r.lp = lp.lp;
    r.lp_rounds_used = lp.rounds;
    r.form_d = std::move(lp.form_d);
    r.form_c = std::move(lp.form_c);
    r.stats_d = storage_stats(r.form_d);
    r.stats_c = storage_stats(r.form_c);
    have_forms = true;
    r.timings.push_back({stage, sw.seconds()});

    stage = "validate";
    sw = Stopwatch();
    PointFilter filter;
    if (config.validate_feasible_only) {
      filter = [&](const Vector& x) { return solve_qp(qp, x).status == QpStatus::optimal; };
    }
    r.validation = hoeffding_validate(r.form_d, r.form_c, spec.domain, config.N_v, config.epsilon, config.seed,
                                      config.tol_eq, filter);
    r.timings.push_back({stage, sw.seconds()});

    stage = "sandwich";
    sw = Stopwatch();
    r.sandwich = sandwich_check(r.form_d, r.form_c, oracle, spec.domain, config.sandwich_points, config.seed);
    r.timings.push_back({stage, sw.seconds()});
    r.timings.push_back({"total", total.seconds()});

    r.verified = r.refine.converged && r.lp.witnesses.empty() && r.validation.mismatch_count == 0 &&
                 r.sandwich.max_lower_violation <= config.sandwich_tol &&
                 r.sandwich.max_upper_violation <= config.sandwich_tol;
    stage = "write";
    write_artifacts(dir, r, have_forms);
  } catch (const PipelineError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw fail(e.what(), 3);
  } catch (const std::exception& e) {
    throw fail(e.what(), 4);
  }
  return r;
}

json summary_json(const PipelineResult& r) {
  json timings = json::object();
  for (const auto& t : r.timings) timings[t.stage] = t.seconds;
  json j = {{"M", static_cast<int>(r.dataset.literals.size())},
            {"points", static_cast<int>(r.dataset.points.size())},
            {"raw_points", r.dataset.stats.raw_points},
            {"infeasible", r.dataset.stats.infeasible},
            {"perturbed", r.dataset.stats.perturbed},
            {"skipped", static_cast<int>(r.dataset.stats.skipped.size())},
            {"refine", {{"iterations", r.refine.iterations},
                        {"converged", r.refine.converged},
                        {"points_added", r.refine.points_added},
                        {"literals_added", r.refine.literals_added},
                        {"remaining", static_cast<int>(r.refine.remaining.size())}}},
            {"lp_rounds", r.lp_rounds_used},
            {"lp", to_json(r.lp)},
            {"validation", to_json(r.validation)},
            {"sandwich", to_json(r.sandwich)},
            {"timings", timings},
            {"verified", r.verified}};
  if (r.form_d.num_literals() > 0) {
    j["disjunctive"] = to_json(r.stats_d);
    j["conjunctive"] = to_json(r.stats_c);
  }
  return j;
}

std::string summary_table(const PipelineResult& r) {
  std::ostringstream o;
  char buf[256];
  auto line = [&](const char* key, const std::string& value) {
    std::snprintf(buf, sizeof buf, "%-28s %s\n", key, value.c_str());
    o << buf;
  };
  auto num = [](double v) {
    char b[64];
    std::snprintf(b, sizeof b, "%.6g", v);
    return std::string(b);
  };
  line("problem", r.spec.name.empty() ? "-" : r.spec.name);
  line("sample points", std::to_string(r.dataset.points.size()));
  line("distinct literals M", std::to_string(r.dataset.literals.size()));
  line("perturbed points", std::to_string(r.dataset.stats.perturbed));
  line("infeasible raw points", std::to_string(r.dataset.stats.infeasible));
  line("refine iterations", std::to_string(r.refine.iterations) + (r.refine.converged ? " (clean)" : " (violations left)"));
  line("lp repair rounds", std::to_string(r.lp_rounds_used));
  line("terms disjunctive", std::to_string(r.stats_d.N_terms));
  line("terms conjunctive", std::to_string(r.stats_c.N_terms));
  line("params disjunctive", std::to_string(r.stats_d.total_params));
  line("params conjunctive", std::to_string(r.stats_c.total_params));
  line("lp pairs / min objective", std::to_string(r.lp.pairs_checked) + " / " + num(r.lp.min_objective));
  line("validation I_bar", num(r.validation.I_bar));
  line("validation confidence", num(r.validation.confidence));
  line("sandwich eps_hat", num(r.sandwich.epsilon_hat));
  line("sandwich max violation", num(std::max(r.sandwich.max_lower_violation, r.sandwich.max_upper_violation)));
  for (const auto& t : r.timings) line(("time " + t.stage + " [s]").c_str(), num(t.seconds));
  line("verified", r.verified ? "yes" : "no");
  return o.str();
}

const char* to_string(ControllerTag tag) {
  switch (tag) {
    case ControllerTag::lattice_d: return "lattice_d";
    case ControllerTag::lattice_c: return "lattice_c";
    case ControllerTag::online_qp: return "online_qp";
  }
  return "online_qp";
}

Controller lattice_controller(const LatticeForm& form) {
  return [&form](const Vector& x) -> std::optional<double> { return form.evaluate(x); };
}

Controller qp_controller(const CondensedQp& qp) {
  return [&qp](const Vector& x) -> std::optional<double> {
    const QpSolution s = solve_qp(qp, x);
    if (s.status != QpStatus::optimal) return std::nullopt;
    return qp.inputs_from_shifted(s.z, x)[0];
  };
}

Trajectory simulate(const MpcProblem& problem, const Controller& controller, ControllerTag tag, const Vector& x0,
                    int steps) {
  if (problem.n_u() != 1) throw InvalidInput("simulate: single-input problems only");
  if (x0.size() != problem.n_x()) throw InvalidInput("simulate: state dimension mismatch");
  Trajectory t;
  t.controller_tag = tag;
  Vector x = x0;
  t.states.push_back(x);
  for (int k = 0; k < steps; ++k) {
    const auto u = controller(x);
    if (!u) {
      t.truncated = true;
      break;
    }
    t.inputs.push_back(*u);
    t.costs.push_back(x.dot(problem.Q * x) + problem.R(0, 0) * (*u) * (*u));
    x = problem.A * x + problem.B.col(0) * (*u);
    t.states.push_back(x);
  }
  return t;
}

std::string trajectory_csv(const Trajectory& t) {
  std::ostringstream o;
  const int n = t.states.empty() ? 0 : static_cast<int>(t.states[0].size());
  o << "k";
  for (int i = 1; i <= n; ++i) o << ",x_" << i;
  o << ",u,cost\n";
  char buf[64];
  for (std::size_t k = 0; k < t.states.size(); ++k) {
    o << k;
    for (int i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", t.states[k][i]);
      o << buf;
    }
    if (k < t.inputs.size()) {
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g", t.inputs[k], t.costs[k]);
      o << buf;
    } else {
      o << ",,";
    }
    o << '\n';
  }
  return o.str();
}

BenchStats bench_eval(const LatticeForm& form, const CondensedQp* qp, const Box& domain, int n_evals,
                      std::uint64_t seed, int qp_evals) {
  if (n_evals < 1) throw InvalidInput("bench_eval: n_evals must be positive");
  CounterRng rng(seed, 0x4245'4e43ULL);
  std::vector<Vector> xs(n_evals);
  for (auto& x : xs) x = rng.uniform_in(domain);

  auto stats = [](std::vector<double>& ns, double& mean, double& median, double* p99) {
    std::sort(ns.begin(), ns.end());
    double sum = 0.0;
    for (double v : ns) sum += v;
    mean = sum / static_cast<double>(ns.size());
    median = ns[ns.size() / 2];
    if (p99) *p99 = ns[std::min(ns.size() - 1, static_cast<std::size_t>(0.99 * static_cast<double>(ns.size())))];
  };

  BenchStats b;
  b.n_evals = n_evals;
  std::vector<double> ns(n_evals);
  volatile double sink = 0.0;
  for (int i = 0; i < n_evals; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const double v = form.evaluate(xs[i]);
    const auto t1 = std::chrono::steady_clock::now();
    sink = sink + v;
    ns[i] = std::chrono::duration<double, std::nano>(t1 - t0).count();
  }
  stats(ns, b.mean_ns, b.median_ns, &b.p99_ns);

  if (qp) {
    b.qp_evals = std::min(qp_evals, n_evals);
    std::vector<double> qns(b.qp_evals);
    for (int i = 0; i < b.qp_evals; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      const QpSolution s = solve_qp(*qp, xs[i]);
      const auto t1 = std::chrono::steady_clock::now();
      sink = sink + (s.status == QpStatus::optimal ? s.z[0] : 0.0);
      qns[i] = std::chrono::duration<double, std::nano>(t1 - t0).count();
    }
    stats(qns, b.qp_mean_ns, b.qp_median_ns, nullptr);
    b.speedup = b.median_ns > 0.0 ? b.qp_median_ns / b.median_ns : 0.0;
  }
  return b;
}

}  // namespace latmpc
