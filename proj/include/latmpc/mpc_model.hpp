#pragma once

#include <optional>
#include <vector>

#include <Eigen/Cholesky>

#include "latmpc/common.hpp"

namespace latmpc {

/// General stage constraint c_x·x_k + c_u·u_k <= d, imposed at k = 0..N_p-1.
struct StageConstraint {
  Vector c_x;
  Vector c_u;
  double d = 0.0;
};

/// Linear time-invariant MPC problem with quadratic cost and box constraints.
///
/// Cost: x_N'P x_N + sum_{k<N} x_k'Q x_k + u_k'R u_k.
/// Input box applies at steps 0..N_p-1; state box at steps 1..N_p-1 and, when
/// terminal_state_box is set, also at step N_p. Infinite bounds add no rows.
struct MpcProblem {
  Matrix A;
  Matrix B;
  Matrix Q;
  Matrix R;
  Matrix P;
  int horizon = 1;
  Vector x_min;
  Vector x_max;
  Vector u_min;
  Vector u_max;
  std::vector<StageConstraint> extra_rows;
  bool terminal_state_box = true;

  int n_x() const { return static_cast<int>(A.rows()); }
  int n_u() const { return static_cast<int>(B.cols()); }

  /// Throws InvalidInput when dimensions or definiteness requirements fail.
  void validate() const;
};

/// Parametric QP  min ½U'HU + x'FU  s.t.  GU <= w + Ex,  plus the shifted form
/// min ½z'Hz  s.t.  Gz <= w + Sx  with z = U + H⁻¹F'x.
struct CondensedQp {
  Matrix H;
  Matrix F;
  Matrix G;
  Vector w;
  Matrix E;
  Matrix S;
  Matrix Hinv_Ft;
  Eigen::LLT<Matrix> H_llt;
  int n_x = 0;
  int n_u = 0;
  int horizon = 0;

  int num_vars() const { return static_cast<int>(H.rows()); }
  int num_rows() const { return static_cast<int>(G.rows()); }

  /// Right-hand side w + Sx of the shifted QP.
  Vector shifted_rhs(const Vector& x) const { return w + S * x; }
  /// U = z - H⁻¹F'x.
  Vector inputs_from_shifted(const Vector& z, const Vector& x) const { return z - Hinv_Ft * x; }
};

/// Builds the condensed QP. Throws InvalidInput on invalid problems.
CondensedQp condense(const MpcProblem& problem);

/// Cost of the rollout x_{k+1} = A x_k + B u_k (the MPC objective itself).
double rollout_cost(const MpcProblem& problem, const Vector& x0, const Vector& inputs);

/// Stacked predicted states [x_1; ...; x_N].
Vector rollout_states(const MpcProblem& problem, const Vector& x0, const Vector& inputs);

/// True iff the rollout satisfies every box and stage constraint (tolerance tol).
bool rollout_feasible(const MpcProblem& problem, const Vector& x0, const Vector& inputs,
                      double tol = 1e-12);

struct DareOptions {
  int max_iterations = 100000;
  double tolerance = 1e-12;
};

/// Solves P = A'PA - A'PB(R+B'PB)⁻¹B'PA + Q by fixed-point iteration.
/// Throws SolverFailure if the iteration does not converge.
Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                  const DareOptions& options = {});

/// Infinity-norm residual of the Riccati fixed point.
double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                     const Matrix& P);

/// Unconstrained LQR gain K such that u = -Kx.
Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& R, const Matrix& P);

struct StateSpaceModel {
  Matrix A;
  Matrix B;
};

/// Zero-order-hold discretization via the augmented matrix exponential.
StateSpaceModel discretize_zoh(const Matrix& A_c, const Matrix& B_c, double Ts);

/// Controllable companion realization of 1 / (s^n + a_{n-1}s^{n-1} + ... + a_0),
/// coefficients given low order first.
StateSpaceModel companion_form(const std::vector<double>& denominator_low_first);

}  // namespace latmpc
