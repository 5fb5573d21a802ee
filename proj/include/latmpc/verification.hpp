#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "latmpc/lattice.hpp"
#include "latmpc/sampler.hpp"

namespace latmpc {

struct LpWitness {
  Vector x;
  int term_c = -1;   // conjunctive term index
  int term_d = -1;   // disjunctive term index
  int owner_c = -1;  // anchor sample of the conjunctive term
  int owner_d = -1;  // anchor sample of the disjunctive term
  double objective = 0.0;
};

struct LpScanReport {
  int pairs_checked = 0;
  double min_objective = 0.0;
  std::vector<LpWitness> witnesses;
};

/// For each conjunctive term i and disjunctive term k, minimizes
/// max_{J<=,i} u_j(x) - min_{J>=,k} u_j(x) over the box through the epigraph LP
/// in (x, y1, y2). Pairs below -tol are reported as witnesses.
LpScanReport lp_scan(const LatticeForm& form_c, const LatticeForm& form_d, const Box& domain, double tol = 1e-9);

/// 1 - 2 exp(-2 N_v eps^2).
double hoeffding_confidence(long long n_v, double epsilon);

struct Mismatch {
  Vector x;
  double f_d = 0.0;
  double f_c = 0.0;
};

struct ValidationReport {
  long long N_v = 0;
  double epsilon = 0.0;
  double I_bar = 0.0;
  double confidence = 0.0;
  long long mismatch_count = 0;
  std::vector<Mismatch> mismatches;  // first 1000 in draw order
  long long ordering_violations = 0; // f_d > f_c + tol_eq
  std::uint64_t seed = 0;
};

/// Optional filter on validation draws; rejected draws are redrawn and not counted.
using PointFilter = std::function<bool(const Vector&)>;

/// N_v uniform draws in the box; I(x) = 1 iff |f_d(x) - f_c(x)| <= tol_eq.
ValidationReport hoeffding_validate(const LatticeForm& form_d, const LatticeForm& form_c, const Box& domain,
                                    long long n_v, double epsilon, std::uint64_t seed, double tol_eq = 1e-9,
                                    const PointFilter& filter = {});

struct SandwichReport {
  int checked = 0;
  int infeasible_skipped = 0;
  double max_lower_violation = 0.0;  // max(f_d - u*), clipped at 0 from below
  double max_upper_violation = 0.0;  // max(u* - f_c), clipped at 0 from below
  double epsilon_hat = 0.0;          // max(f_c - f_d)
  double max_abs_error = 0.0;        // max(|f_d - u*|, |f_c - u*|)
};

/// Compares both forms with u* at n_points random feasible states.
SandwichReport sandwich_check(const LatticeForm& form_d, const LatticeForm& form_c, const LawOracle& oracle,
                              const Box& domain, int n_points, std::uint64_t seed);

struct VerificationReport {
  LpScanReport lp;
  ValidationReport validation;
  SandwichReport sandwich;
};

}  // namespace latmpc
