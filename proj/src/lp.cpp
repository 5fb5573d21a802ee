#include <cmath>
#include <limits>

#include "latmpc/dense_solvers.hpp"

namespace latmpc {
namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-11;

// Dense tableau: rows 0..r-1 are constraints, row r is the objective
// (reduced costs), last column is the right-hand side.
class Tableau {
 public:
  Tableau(int rows, int cols) : T_(Matrix::Zero(rows + 1, cols + 1)), basis_(rows, -1), rows_(rows), cols_(cols) {}

  double& at(int i, int j) { return T_(i, j); }
  double rhs(int i) const { return T_(i, cols_); }
  double reduced(int j) const { return T_(rows_, j); }
  double objective_row_rhs() const { return T_(rows_, cols_); }
  int basis(int i) const { return basis_[i]; }
  void set_basis(int i, int j) { basis_[i] = j; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  void pivot(int pr, int pc) {
    T_.row(pr) /= T_(pr, pc);
    for (int i = 0; i <= rows_; ++i) {
      if (i != pr && T_(i, pc) != 0.0) T_.row(i) -= T_(i, pc) * T_.row(pr);
    }
    basis_[pr] = pc;
  }

  // Loads cost vector c (length cols) as the objective row, priced out against the basis.
  void set_objective(const Vector& c) {
    T_.row(rows_).setZero();
    T_.row(rows_).head(cols_) = c.transpose();
    for (int i = 0; i < rows_; ++i) {
      const int b = basis_[i];
      if (b >= 0 && T_(rows_, b) != 0.0) T_.row(rows_) -= T_(rows_, b) * T_.row(i);
    }
  }

  // Bland's rule over columns allowed[j]. Returns false when unbounded.
  bool optimize(const std::vector<bool>& allowed, int& pivots, int max_pivots) {
    while (true) {
      int enter = -1;
      for (int j = 0; j < cols_; ++j) {
        if (allowed[j] && T_(rows_, j) < -kCostTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < rows_; ++i) {
        const double a = T_(i, enter);
        if (a > kPivotTol) {
          const double ratio = T_(i, cols_) / a;
          if (ratio < best - 1e-14 || (std::abs(ratio - best) <= 1e-14 && basis_[i] < basis_[leave])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
      if (++pivots > max_pivots) throw SolverFailure("solve_lp: pivot limit reached");
    }
  }

 private:
  Matrix T_;
  std::vector<int> basis_;
  int rows_;
  int cols_;
};

}  // namespace

LpSolution solve_lp(const Vector& c, const Matrix& A_ub, const Vector& b_ub, const Box& bounds) {
  const int n = static_cast<int>(c.size());
  const int p = static_cast<int>(A_ub.rows());
  if (bounds.dim() != n || (p > 0 && A_ub.cols() != n) || b_ub.size() != p) {
    throw InvalidInput("solve_lp: dimension mismatch");
  }
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(bounds.lo[i]) || !std::isfinite(bounds.hi[i])) {
      throw InvalidInput("solve_lp: bounds must be finite");
    }
  }

  // x = lo + y, y >= 0. Rows: A y <= b - A lo, then y <= hi - lo.
  const int r = p + n;
  Matrix A(r, n);
  Vector b(r);
  if (p > 0) {
    A.topRows(p) = A_ub;
    b.head(p) = b_ub - A_ub * bounds.lo;
  }
  A.bottomRows(n) = Matrix::Identity(n, n);
  b.tail(n) = bounds.hi - bounds.lo;

  // Columns: y (n), slacks (r), artificials (one per negated row).
  std::vector<int> negated;
  for (int i = 0; i < r; ++i) {
    if (b[i] < 0.0) negated.push_back(i);
  }
  const int na = static_cast<int>(negated.size());
  const int cols = n + r + na;
  Tableau tab(r, cols);
  for (int i = 0, k = 0; i < r; ++i) {
    const double sign = b[i] < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) tab.at(i, j) = sign * A(i, j);
    tab.at(i, n + i) = sign;
    tab.at(i, cols) = sign * b[i];
    if (sign < 0.0) {
      tab.at(i, n + r + k) = 1.0;
      tab.set_basis(i, n + r + k);
      ++k;
    } else {
      tab.set_basis(i, n + i);
    }
  }

  LpSolution sol;
  const int max_pivots = 100 * (cols + r) + 1000;
  std::vector<bool> allowed(cols, true);

  if (na > 0) {
    Vector phase1 = Vector::Zero(cols);
    phase1.tail(na).setOnes();
    tab.set_objective(phase1);
    tab.optimize(allowed, sol.pivots, max_pivots);
    if (-tab.objective_row_rhs() > 1e-9 * (1.0 + b.cwiseAbs().maxCoeff())) {
      sol.status = LpStatus::infeasible;
      return sol;
    }
    // Drive zero-level artificials out of the basis where possible.
    for (int i = 0; i < r; ++i) {
      if (tab.basis(i) < n + r) continue;
      for (int j = 0; j < n + r; ++j) {
        if (std::abs(tab.at(i, j)) > 1e-9) {
          tab.pivot(i, j);
          break;
        }
      }
    }
    for (int j = n + r; j < cols; ++j) allowed[j] = false;
  }

  Vector phase2 = Vector::Zero(cols);
  phase2.head(n) = c;
  tab.set_objective(phase2);
  if (!tab.optimize(allowed, sol.pivots, max_pivots)) {
    sol.status = LpStatus::unbounded;
    return sol;
  }

  Vector y = Vector::Zero(n);
  for (int i = 0; i < r; ++i) {
    if (tab.basis(i) < n) y[tab.basis(i)] = tab.rhs(i);
  }
  sol.status = LpStatus::optimal;
  sol.x = (bounds.lo + y).cwiseMax(bounds.lo).cwiseMin(bounds.hi);
  sol.objective = c.dot(sol.x);
  // Reduced cost of slack i is the multiplier of row i; reduced cost of y_j is the lower-bound multiplier.
  sol.row_duals.resize(p);
  for (int i = 0; i < p; ++i) sol.row_duals[i] = std::max(0.0, tab.reduced(n + i));
  sol.upper_duals.resize(n);
  sol.lower_duals.resize(n);
  for (int j = 0; j < n; ++j) {
    sol.upper_duals[j] = std::max(0.0, tab.reduced(n + p + j));
    sol.lower_duals[j] = std::max(0.0, tab.reduced(j));
  }
  return sol;
}

}  // namespace latmpc
