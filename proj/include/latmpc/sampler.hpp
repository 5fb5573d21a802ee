#pragma once

#include <optional>
#include <string>
#include <vector>

#include "latmpc/common.hpp"
#include "latmpc/dense_solvers.hpp"
#include "latmpc/mpc_model.hpp"

namespace latmpc {

/// u(x) = a'x + b, optionally with the full-horizon map U(x) = full_K x + k.
struct AffineLaw {
  Vector a;
  double b = 0.0;
  std::optional<Matrix> full_K;
  Vector k;
  IndexList origin_active_set;

  double operator()(const Vector& x) const { return a.dot(x) + b; }
};

enum class SampleSource { grid, perturbed, resampled, trajectory };

const char* to_string(SampleSource s);
SampleSource sample_source_from_string(const std::string& s);

struct SamplePoint {
  Vector x;
  int law_index = -1;
  double u_value = 0.0;
  SampleSource source = SampleSource::grid;
};

struct SkippedPoint {
  Vector x;
  std::string reason;
};

struct SamplingStats {
  int raw_points = 0;
  int infeasible = 0;
  int perturbed = 0;
  int resampled_initial = 0;
  std::vector<SkippedPoint> skipped;
};

struct SampleDataset {
  std::vector<SamplePoint> points;
  std::vector<AffineLaw> literals;
  Box domain;
  SamplingStats stats;

  int n_x() const { return domain.dim(); }
  /// Matrix of literal values at every point: rows points, columns literals.
  Matrix value_matrix() const;
};

/// Result of evaluating the optimal control law at one state.
struct LawQuery {
  AffineLaw law;
  double value = 0.0;
  /// Point lies on a critical-region boundary (weakly active row or zero multiplier).
  bool boundary = false;
};

/// Source of the exact PWA law being approximated.
class LawOracle {
 public:
  virtual ~LawOracle() = default;
  virtual int n_x() const = 0;
  /// Empty when x is infeasible.
  virtual std::optional<LawQuery> query(const Vector& x) const = 0;
};

/// First input of the MPC optimizer, via solve_qp and extract_affine_law.
class MpcLawOracle : public LawOracle {
 public:
  explicit MpcLawOracle(const CondensedQp& qp, double boundary_multiplier_tol = 1e-9)
      : qp_(qp), multiplier_tol_(boundary_multiplier_tol) {}
  int n_x() const override { return qp_.n_x; }
  std::optional<LawQuery> query(const Vector& x) const override;
  const CondensedQp& qp() const { return qp_; }

 private:
  const CondensedQp& qp_;
  double multiplier_tol_;
};

/// Affine law of the first input from the active set of `sol`. The working set
/// leads the row order so independent_rows keeps it intact.
AffineLaw extract_affine_law(const CondensedQp& qp, const QpSolution& sol);

/// Index of a pool literal within tol (||a-a'||_inf + |b-b'|), else appends.
int dedup_law(std::vector<AffineLaw>& pool, const AffineLaw& candidate, double tol = 1e-6);

/// 1e-9 * max(1, |value|).
double tie_tolerance(double value);

/// True iff all pool literals take pairwise distinct values at x.
bool uo_interior(const std::vector<AffineLaw>& pool, const Vector& x, double own_value);

struct SamplerOptions {
  /// Grid: delta = perturb_fraction * smallest grid step.
  double perturb_fraction = 1e-3;
  /// Trajectories: delta = trajectory_perturb_fraction * smallest domain width.
  double trajectory_perturb_fraction = 1e-5;
  int max_retries = 10;
  double dedup_tol = 1e-6;
  std::uint64_t seed = 1;
};

SampleDataset sample_grid(const LawOracle& oracle, const Box& domain, const std::vector<int>& counts,
                          const SamplerOptions& options = {});

/// n_init feasible initial states drawn uniformly in the domain, each rolled
/// forward `steps` times under x+ = A x + B u*(x). Visited states may leave the
/// domain; they stay in the dataset.
SampleDataset sample_trajectories(const LawOracle& oracle, const Matrix& A, const Matrix& B,
                                  const Box& domain, int n_init, int steps,
                                  const SamplerOptions& options = {});

/// Queries x and, when it sits on a boundary or ties with the pool, retries at
/// x + delta*d for random unit d. On success the law is merged into ds.literals
/// (the point itself is not appended). Empty with *why set on failure.
std::optional<SamplePoint> settle_sample(const LawOracle& oracle, SampleDataset& ds, const Vector& x,
                                         SampleSource source, double delta, bool keep_in_domain,
                                         CounterRng& rng, const SamplerOptions& options,
                                         std::string* why = nullptr);

/// Re-checks ties of every point against the full pool and perturbs offenders
/// by radius delta until the dataset is stable. Points that fail max_retries are
/// dropped into stats.skipped. Returns the number of points moved.
/// keep_in_domain reflects perturbed points back into the domain.
int restore_uo_interior(const LawOracle& oracle, SampleDataset& ds, std::vector<bool> flagged, double delta,
                        bool keep_in_domain, const SamplerOptions& options, std::uint64_t stream_base);

}  // namespace latmpc
