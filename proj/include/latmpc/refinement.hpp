#pragma once

#include <string>
#include <vector>

#include "latmpc/lattice.hpp"
#include "latmpc/sampler.hpp"

namespace latmpc {

struct ViolationRecord {
  int i = -1;  // term owner
  int k = -1;  // point where the term misjudges u*
  LatticeKind kind = LatticeKind::disjunctive;
  double gap = 0.0;  // positive magnitude of the violation
};

/// Pairwise check: the disjunctive term of i must not exceed u at x_k and the
/// conjunctive term of i must not fall below it. Owners sharing a term set are
/// reported once, through the first owner.
std::vector<ViolationRecord> check_assumption(const SampleDataset& ds, double tol_violation = 1e-7);

struct RefineOptions {
  SamplerOptions sampler;
  int depth_cap = 40;
  int max_iterations = 50;
  /// Midpoint perturbation radius relative to the segment length.
  double tube_fraction = 1e-7;
  /// Radius for re-settling tied points after the pool grows, relative to the smallest domain width.
  double restore_fraction = 1e-6;
  double tol_violation = 1e-7;
  double point_dedup_tol = 1e-12;
};

struct SegmentResult {
  std::vector<int> inserted;  // indices of appended dataset points
  int depth_reached = 0;
  bool aborted = false;
  std::string diagnostic;
};

/// Bisects the segment between dataset points a and b while neighbouring laws
/// fail to cross between them. New points are appended to ds.
SegmentResult refine_segment(const LawOracle& oracle, SampleDataset& ds, int a, int b, CounterRng& rng,
                             const RefineOptions& options = {});

struct RefineReport {
  int iterations = 0;
  bool converged = false;
  int points_added = 0;
  int literals_added = 0;
  std::vector<ViolationRecord> remaining;
  std::vector<std::string> diagnostics;
};

/// Alternates check_assumption and segment refinement until no violation
/// remains or the iteration cap is reached.
RefineReport refine_until_valid(const LawOracle& oracle, SampleDataset& ds, const RefineOptions& options = {});

struct RepairResult {
  bool applied = false;            // false when the witness is already consistent
  bool disjunctive_side = false;   // min over J>= of the disjunctive owner exceeded u* at the witness
  bool conjunctive_side = false;   // max over J<= of the conjunctive owner fell below u*
  bool inconsistent = false;       // neither side held
  int points_added = 0;
  int literals_added = 0;
  std::string diagnostic;
};

/// Repair from an LP witness x_gamma where the conjunctive term of owner_c lies
/// below the disjunctive term of owner_d. Adds x_gamma as a sample and refines
/// the segment(s) towards the owner(s) whose term misjudges u*(x_gamma).
RepairResult lemma16_repair(const LawOracle& oracle, SampleDataset& ds, const Vector& x_gamma, int owner_c,
                            int owner_d, CounterRng& rng, const RefineOptions& options = {});

}  // namespace latmpc
