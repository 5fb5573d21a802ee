#pragma once

#include <Eigen/Cholesky>

#include "latmpc/common.hpp"
#include "latmpc/mpc_model.hpp"

namespace latmpc {

enum class QpStatus { optimal, infeasible };

/// Solution of min ½z'Hz + c'z  s.t.  Gz <= h.
struct QpSolution {
  QpStatus status = QpStatus::infeasible;
  Vector z;
  double objective = 0.0;
  /// Rows with |G_j z - h_j| <= tol_active, ascending.
  IndexList active_set;
  /// Multipliers aligned with active_set; zero for rows outside the working set.
  Vector multipliers;
  /// Linearly independent rows the dual method ended with (ascending).
  IndexList working_set;
  Vector working_multipliers;
  int iterations = 0;
  bool warm_started = false;
};

struct QpOptions {
  double tol_active = 1e-8;
  double tol_feasible = 1e-11;
  int max_iterations = 0;  // 0 -> 50 (m + p)
};

/// Dense strictly convex QP via the Goldfarb-Idnani dual active-set method.
/// `llt` must hold the Cholesky factor of H. A nonempty `warm` set is tried
/// first through one equality-constrained solve and accepted only when it is
/// primal and dual feasible.
QpSolution solve_dense_qp(const Matrix& H, const Eigen::LLT<Matrix>& llt, const Vector& c,
                          const Matrix& G, const Vector& h, const IndexList& warm = {},
                          const QpOptions& options = {});

/// Shifted MPC QP at state x: min ½z'Hz  s.t.  Gz <= w + Sx.
QpSolution solve_qp(const CondensedQp& qp, const Vector& x, const IndexList& warm = {},
                    const QpOptions& options = {});

/// Maximal linearly independent subset of rows, greedy in ascending order.
IndexList independent_rows(const Matrix& M, double tol = 1e-10);

enum class LpStatus { optimal, infeasible, unbounded };

/// min c'x  s.t.  A_ub x <= b_ub,  lo <= x <= hi.
struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  Vector x;
  double objective = 0.0;
  /// Nonnegative multipliers of the inequality rows and of the two bound sides,
  /// satisfying c + A_ub'row_duals + upper_duals - lower_duals = 0 at optimum.
  Vector row_duals;
  Vector lower_duals;
  Vector upper_duals;
  int pivots = 0;
};

/// Two-phase dense tableau simplex with Bland's rule. Bounds must be finite.
LpSolution solve_lp(const Vector& c, const Matrix& A_ub, const Vector& b_ub, const Box& bounds);

}  // namespace latmpc
