#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "latmpc/io.hpp"
#include "latmpc/lattice.hpp"
#include "latmpc/refinement.hpp"
#include "latmpc/sampler.hpp"
#include "latmpc/verification.hpp"

namespace latmpc {

struct SamplingSpec {
  enum class Kind { grid, trajectories };
  Kind kind = Kind::grid;
  std::vector<int> counts;  // grid
  int n_init = 0;           // trajectories
  int steps = 0;
};

struct PipelineConfig {
  std::string problem_path;
  SamplingSpec sampling;
  std::uint64_t seed = 1;
  long long N_v = 100000;
  double epsilon = 5e-3;
  double tol_eq = 1e-9;
  int sandwich_points = 10000;
  int lp_rounds = 10;
  /// Redraw validation points at which the QP is infeasible.
  bool validate_feasible_only = false;
  double sandwich_tol = 1e-7;
  std::string output_dir;
  RefineOptions refine;
};

PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineResult {
  ProblemSpec spec;
  SampleDataset dataset;
  RefineReport refine;
  int lp_rounds_used = 0;
  LatticeForm form_d;
  LatticeForm form_c;
  StorageStats stats_d;
  StorageStats stats_c;
  LpScanReport lp;
  ValidationReport validation;
  SandwichReport sandwich;
  std::vector<StageTiming> timings;
  bool verified = false;
};

/// Stage-tagged failure; partial artifacts are already on disk when thrown.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& what, int exit_code)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), exit_code_(exit_code) {}
  const std::string& stage() const { return stage_; }
  int exit_code() const { return exit_code_; }

 private:
  std::string stage_;
  int exit_code_;
};

/// Sample, refine, build and simplify both forms, LP scan with repair rounds,
/// statistical validation and the sandwich check against the QP.
PipelineResult run_pipeline(const ProblemSpec& spec, const PipelineConfig& config);

/// Sampling stage alone, as used by run_pipeline.
SampleDataset run_sampling(const LawOracle& oracle, const ProblemSpec& spec, const SamplingSpec& sampling,
                           const SamplerOptions& options);

/// Builds and simplifies one form.
LatticeForm build_simplified(const SampleDataset& ds, LatticeKind kind);

struct LpRepairOutcome {
  LpScanReport lp;
  int rounds = 0;
  LatticeForm form_d;
  LatticeForm form_c;
};

/// LP scan; on negative pairs apply lemma16_repair per witness, rebuild, rescan.
LpRepairOutcome lp_scan_with_repair(const LawOracle& oracle, SampleDataset& ds, int max_rounds,
                                    const RefineOptions& options);

std::string summary_table(const PipelineResult& r);
nlohmann::json summary_json(const PipelineResult& r);

enum class ControllerTag { lattice_d, lattice_c, online_qp };
const char* to_string(ControllerTag tag);

using Controller = std::function<std::optional<double>(const Vector&)>;

struct Trajectory {
  std::vector<Vector> states;
  std::vector<double> inputs;
  std::vector<double> costs;
  ControllerTag controller_tag = ControllerTag::online_qp;
  bool truncated = false;
};

Controller lattice_controller(const LatticeForm& form);
Controller qp_controller(const CondensedQp& qp);

/// x+ = A x + B u(x), controller output applied unclamped. Stops early when the
/// controller has no answer (infeasible QP).
Trajectory simulate(const MpcProblem& problem, const Controller& controller, ControllerTag tag, const Vector& x0,
                    int steps);

/// CSV with header k,x_1..x_n,u,cost.
std::string trajectory_csv(const Trajectory& t);

struct BenchStats {
  int n_evals = 0;
  double mean_ns = 0.0;
  double median_ns = 0.0;
  double p99_ns = 0.0;
  int qp_evals = 0;
  double qp_mean_ns = 0.0;
  double qp_median_ns = 0.0;
  double speedup = 0.0;  // qp median / lattice median
};

/// Per-call latency of form.evaluate at uniform points; when qp is given, the
/// online solve is timed on the first qp_evals of the same points.
BenchStats bench_eval(const LatticeForm& form, const CondensedQp* qp, const Box& domain, int n_evals,
                      std::uint64_t seed, int qp_evals = 2000);

}  // namespace latmpc
