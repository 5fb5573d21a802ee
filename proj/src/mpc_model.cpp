#include "latmpc/mpc_model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace latmpc {
namespace {

void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidInput(message);
}

bool symmetric(const Matrix& M, double tol) {
  return M.rows() == M.cols() && (M - M.transpose()).cwiseAbs().maxCoeff() <= tol * (1.0 + M.cwiseAbs().maxCoeff());
}

bool positive_semidefinite(const Matrix& M) {
  if (M.size() == 0) return true;
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (M + M.transpose()));
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  return eig.eigenvalues().minCoeff() >= -1e-10 * scale;
}

struct Prediction {
  Matrix Sx;  // [A; A^2; ...; A^N]
  Matrix Su;  // block lower triangular A^{i-j-1}B
};

Prediction prediction_matrices(const MpcProblem& p) {
  const int nx = p.n_x();
  const int nu = p.n_u();
  const int N = p.horizon;
  Prediction pred{Matrix::Zero(N * nx, nx), Matrix::Zero(N * nx, N * nu)};
  // powers[k] = A^k
  std::vector<Matrix> powers(N + 1);
  powers[0] = Matrix::Identity(nx, nx);
  for (int k = 1; k <= N; ++k) powers[k] = p.A * powers[k - 1];
  for (int i = 0; i < N; ++i) {
    pred.Sx.block(i * nx, 0, nx, nx) = powers[i + 1];
    for (int j = 0; j <= i; ++j) {
      pred.Su.block(i * nx, j * nu, nx, nu) = powers[i - j] * p.B;
    }
  }
  return pred;
}

struct RowBuilder {
  std::vector<Vector> g;
  std::vector<double> w;
  std::vector<Vector> e;

  void add(Vector g_row, double w_val, Vector e_row) {
    g.push_back(std::move(g_row));
    w.push_back(w_val);
    e.push_back(std::move(e_row));
  }
};

}  // namespace

void MpcProblem::validate() const {
  const int nx = n_x();
  const int nu = n_u();
  require(nx > 0 && A.rows() == A.cols(), "A must be square and non-empty");
  require(B.rows() == nx && nu > 0, "B must have n_x rows and at least one column");
  require(Q.rows() == nx && Q.cols() == nx, "Q must be n_x x n_x");
  require(P.rows() == nx && P.cols() == nx, "P must be n_x x n_x");
  require(R.rows() == nu && R.cols() == nu, "R must be n_u x n_u");
  require(horizon >= 1, "horizon must be positive");
  require(x_min.size() == nx && x_max.size() == nx, "state bounds must have n_x entries");
  require(u_min.size() == nu && u_max.size() == nu, "input bounds must have n_u entries");
  require(symmetric(Q, 1e-12) && positive_semidefinite(Q), "Q must be symmetric positive semidefinite");
  require(symmetric(P, 1e-12) && positive_semidefinite(P), "P must be symmetric positive semidefinite");
  require(symmetric(R, 1e-12), "R must be symmetric");
  require(Eigen::LLT<Matrix>(R).info() == Eigen::Success, "R must be positive definite");
  {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(R);
    require(eig.eigenvalues().minCoeff() > 0.0, "R must be positive definite");
  }
  for (int i = 0; i < nx; ++i) require(x_min[i] < x_max[i], "x_min must be below x_max");
  for (int i = 0; i < nu; ++i) require(u_min[i] < u_max[i], "u_min must be below u_max");
  for (const auto& row : extra_rows) {
    require(row.c_x.size() == nx && row.c_u.size() == nu, "stage constraint dimension mismatch");
  }
}

CondensedQp condense(const MpcProblem& problem) {
  problem.validate();
  const int nx = problem.n_x();
  const int nu = problem.n_u();
  const int N = problem.horizon;
  const int m = N * nu;
  const Prediction pred = prediction_matrices(problem);

  Matrix Qbar = Matrix::Zero(N * nx, N * nx);
  for (int k = 0; k < N - 1; ++k) Qbar.block(k * nx, k * nx, nx, nx) = problem.Q;
  Qbar.block((N - 1) * nx, (N - 1) * nx, nx, nx) = problem.P;
  Matrix Rbar = Matrix::Zero(m, m);
  for (int k = 0; k < N; ++k) Rbar.block(k * nu, k * nu, nu, nu) = problem.R;

  CondensedQp qp;
  qp.n_x = nx;
  qp.n_u = nu;
  qp.horizon = N;
  qp.H = 2.0 * (pred.Su.transpose() * Qbar * pred.Su + Rbar);
  qp.H = 0.5 * (qp.H + qp.H.transpose()).eval();
  qp.F = 2.0 * pred.Sx.transpose() * Qbar * pred.Su;

  RowBuilder rows;
  const Vector zero_x = Vector::Zero(nx);
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < nu; ++i) {
      Vector g = Vector::Zero(m);
      g[k * nu + i] = 1.0;
      if (std::isfinite(problem.u_max[i])) rows.add(g, problem.u_max[i], zero_x);
      if (std::isfinite(problem.u_min[i])) rows.add(-g, -problem.u_min[i], zero_x);
    }
  }
  const int last_state_step = problem.terminal_state_box ? N : N - 1;
  for (int k = 1; k <= last_state_step; ++k) {
    for (int i = 0; i < nx; ++i) {
      const Vector su = pred.Su.row((k - 1) * nx + i).transpose();
      const Vector sx = pred.Sx.row((k - 1) * nx + i).transpose();
      if (std::isfinite(problem.x_max[i])) rows.add(su, problem.x_max[i], -sx);
      if (std::isfinite(problem.x_min[i])) rows.add(-su, -problem.x_min[i], sx);
    }
  }
  for (int k = 0; k < N; ++k) {
    for (const auto& c : problem.extra_rows) {
      Vector g = Vector::Zero(m);
      g.segment(k * nu, nu) = c.c_u;
      Vector e;
      if (k == 0) {
        e = -c.c_x;
      } else {
        g += pred.Su.middleRows((k - 1) * nx, nx).transpose() * c.c_x;
        e = -(pred.Sx.middleRows((k - 1) * nx, nx).transpose() * c.c_x);
      }
      rows.add(g, c.d, e);
    }
  }

  const int p = static_cast<int>(rows.g.size());
  qp.G.resize(p, m);
  qp.w.resize(p);
  qp.E.resize(p, nx);
  for (int j = 0; j < p; ++j) {
    qp.G.row(j) = rows.g[j].transpose();
    qp.w[j] = rows.w[j];
    qp.E.row(j) = rows.e[j].transpose();
  }

  qp.H_llt.compute(qp.H);
  if (qp.H_llt.info() != Eigen::Success) throw InvalidInput("condensed Hessian is not positive definite");
  qp.Hinv_Ft = qp.H_llt.solve(qp.F.transpose());
  qp.S = qp.E + qp.G * qp.Hinv_Ft;
  return qp;
}

Vector rollout_states(const MpcProblem& problem, const Vector& x0, const Vector& inputs) {
  const int nx = problem.n_x();
  const int nu = problem.n_u();
  Vector states(problem.horizon * nx);
  Vector x = x0;
  for (int k = 0; k < problem.horizon; ++k) {
    x = problem.A * x + problem.B * inputs.segment(k * nu, nu);
    states.segment(k * nx, nx) = x;
  }
  return states;
}

double rollout_cost(const MpcProblem& problem, const Vector& x0, const Vector& inputs) {
  const int nu = problem.n_u();
  double cost = 0.0;
  Vector x = x0;
  for (int k = 0; k < problem.horizon; ++k) {
    const Vector u = inputs.segment(k * nu, nu);
    cost += x.dot(problem.Q * x) + u.dot(problem.R * u);
    x = problem.A * x + problem.B * u;
  }
  return cost + x.dot(problem.P * x);
}

bool rollout_feasible(const MpcProblem& problem, const Vector& x0, const Vector& inputs, double tol) {
  const int nx = problem.n_x();
  const int nu = problem.n_u();
  const int last_state_step = problem.terminal_state_box ? problem.horizon : problem.horizon - 1;
  Vector x = x0;
  for (int k = 0; k < problem.horizon; ++k) {
    const Vector u = inputs.segment(k * nu, nu);
    if (k >= 1 && k <= last_state_step) {
      for (int i = 0; i < nx; ++i) {
        if (x[i] > problem.x_max[i] + tol || x[i] < problem.x_min[i] - tol) return false;
      }
    }
    for (int i = 0; i < nu; ++i) {
      if (u[i] > problem.u_max[i] + tol || u[i] < problem.u_min[i] - tol) return false;
    }
    for (const auto& c : problem.extra_rows) {
      if (c.c_x.dot(x) + c.c_u.dot(u) > c.d + tol) return false;
    }
    x = problem.A * x + problem.B * u;
  }
  if (problem.terminal_state_box) {
    for (int i = 0; i < nx; ++i) {
      if (x[i] > problem.x_max[i] + tol || x[i] < problem.x_min[i] - tol) return false;
    }
  }
  return true;
}

double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, const Matrix& P) {
  const Matrix BtPA = B.transpose() * P * A;
  const Matrix rhs = A.transpose() * P * A - BtPA.transpose() * (R + B.transpose() * P * B).ldlt().solve(BtPA) + Q;
  return (P - rhs).cwiseAbs().rowwise().sum().maxCoeff();
}

Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, const DareOptions& options) {
  if (A.rows() != A.cols() || B.rows() != A.rows() || Q.rows() != A.rows() || R.rows() != B.cols()) {
    throw InvalidInput("solve_dare: dimension mismatch");
  }
  Matrix P = Q;
  for (int it = 0; it < options.max_iterations; ++it) {
    const Matrix BtPA = B.transpose() * P * A;
    Matrix next = A.transpose() * P * A - BtPA.transpose() * (R + B.transpose() * P * B).ldlt().solve(BtPA) + Q;
    next = 0.5 * (next + next.transpose()).eval();
    const double change = (next - P).cwiseAbs().maxCoeff();
    P = std::move(next);
    if (!P.allFinite()) break;
    if (change <= options.tolerance * (1.0 + P.cwiseAbs().maxCoeff())) return P;
  }
  std::ostringstream msg;
  msg << "solve_dare: no convergence within " << options.max_iterations << " iterations";
  throw SolverFailure(msg.str());
}

Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& R, const Matrix& P) {
  return (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
}

StateSpaceModel discretize_zoh(const Matrix& A_c, const Matrix& B_c, double Ts) {
  if (A_c.rows() != A_c.cols() || B_c.rows() != A_c.rows()) throw InvalidInput("discretize_zoh: dimension mismatch");
  if (!(Ts > 0.0)) throw InvalidInput("discretize_zoh: Ts must be positive");
  const int n = static_cast<int>(A_c.rows());
  const int m = static_cast<int>(B_c.cols());
  // exp([A B; 0 0] Ts) = [Ad Bd; 0 I]
  Matrix M = Matrix::Zero(n + m, n + m);
  M.topLeftCorner(n, n) = A_c * Ts;
  M.topRightCorner(n, m) = B_c * Ts;
  const Matrix phi = M.exp();
  return {phi.topLeftCorner(n, n), phi.topRightCorner(n, m)};
}

StateSpaceModel companion_form(const std::vector<double>& denominator_low_first) {
  const int n = static_cast<int>(denominator_low_first.size());
  if (n == 0) throw InvalidInput("companion_form: empty denominator");
  StateSpaceModel model{Matrix::Zero(n, n), Matrix::Zero(n, 1)};
  for (int i = 0; i + 1 < n; ++i) model.A(i, i + 1) = 1.0;
  for (int j = 0; j < n; ++j) model.A(n - 1, j) = -denominator_low_first[j];
  model.B(n - 1, 0) = 1.0;
  return model;
}

}  // namespace latmpc
