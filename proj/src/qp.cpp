#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/QR>

#include "latmpc/dense_solvers.hpp"

namespace latmpc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Constraint j reads n_j'z >= b_j with n_j = -G_j', b_j = -h_j.
struct DualState {
  IndexList active;  // ascending
  Vector u;          // multipliers aligned with active
};

struct StepDirections {
  Vector d;  // primal step
  Vector r;  // dual step over the active rows
  bool primal_null = false;
};

StepDirections directions(const Eigen::LLT<Matrix>& llt, const Matrix& G, const IndexList& active,
                          int p) {
  const int m = static_cast<int>(G.cols());
  const int q = static_cast<int>(active.size());
  const auto L = llt.matrixL();
  Vector v = -G.row(p).transpose();
  L.solveInPlace(v);

  StepDirections out;
  Vector proj = v;
  if (q > 0) {
    Matrix W(m, q);
    for (int i = 0; i < q; ++i) W.col(i) = -G.row(active[i]).transpose();
    L.solveInPlace(W);
    const Eigen::HouseholderQR<Matrix> qr(W);
    const Matrix Q = qr.householderQ();
    const Matrix R = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
    const Vector q1v = Q.leftCols(q).transpose() * v;
    out.r = R.triangularView<Eigen::Upper>().solve(q1v);
    proj = Q.rightCols(m - q) * (Q.rightCols(m - q).transpose() * v);
  } else {
    out.r = Vector(0);
  }
  out.primal_null = proj.norm() <= 1e-10 * std::max(1.0, v.norm());
  out.d = proj;
  llt.matrixU().solveInPlace(out.d);
  return out;
}

double slack(const Matrix& G, const Vector& h, const Vector& z, int j) {
  return h[j] - G.row(j).dot(z);
}

bool try_warm_start(const Eigen::LLT<Matrix>& llt, const Vector& c, const Matrix& G, const Vector& h,
                    const IndexList& warm, const QpOptions& opt, Vector& z, DualState& state) {
  IndexList rows;
  for (int j : warm) {
    if (j >= 0 && j < G.rows()) rows.push_back(j);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  if (rows.empty()) return false;
  Matrix Gw(rows.size(), G.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) Gw.row(i) = G.row(rows[i]);
  const IndexList keep = independent_rows(Gw);
  IndexList chosen;
  for (int i : keep) chosen.push_back(rows[i]);
  const int q = static_cast<int>(chosen.size());
  Matrix Y(G.cols(), q);
  Vector hw(q);
  for (int i = 0; i < q; ++i) {
    Y.col(i) = G.row(chosen[i]).transpose();
    hw[i] = h[chosen[i]];
  }
  const Vector Hc = llt.solve(c);
  const Matrix HinvY = llt.solve(Y);
  const Matrix M = Y.transpose() * HinvY;
  const Eigen::LDLT<Matrix> ldlt(M);
  if (ldlt.info() != Eigen::Success) return false;
  const Vector lambda = -ldlt.solve(hw + Y.transpose() * Hc);
  if (!lambda.allFinite() || (q > 0 && lambda.minCoeff() < -1e-12)) return false;
  const Vector zc = -Hc - HinvY * lambda;
  for (int j = 0; j < G.rows(); ++j) {
    if (slack(G, h, zc, j) < -opt.tol_feasible * (1.0 + std::abs(h[j]))) return false;
  }
  z = zc;
  state.active = chosen;
  state.u = lambda.cwiseMax(0.0);
  return true;
}

}  // namespace

QpSolution solve_dense_qp(const Matrix& H, const Eigen::LLT<Matrix>& llt, const Vector& c,
                          const Matrix& G, const Vector& h, const IndexList& warm,
                          const QpOptions& options) {
  const int m = static_cast<int>(H.rows());
  const int nrows = static_cast<int>(G.rows());
  if (H.cols() != m || c.size() != m || G.cols() != m || h.size() != nrows) {
    throw InvalidInput("solve_dense_qp: dimension mismatch");
  }
  const int max_iter = options.max_iterations > 0 ? options.max_iterations : 50 * (m + nrows) + 50;

  QpSolution sol;
  Vector z;
  DualState state;
  if (!warm.empty() && try_warm_start(llt, c, G, h, warm, options, z, state)) {
    sol.warm_started = true;
  } else {
    z = -llt.solve(c);
    state = {};
  }

  int iter = 0;
  bool infeasible = false;
  while (!sol.warm_started) {
    int p = -1;
    double worst = 0.0;
    for (int j = 0; j < nrows; ++j) {
      if (std::binary_search(state.active.begin(), state.active.end(), j)) continue;
      const double s = slack(G, h, z, j);
      if (s < -options.tol_feasible * (1.0 + std::abs(h[j])) && s < worst) {
        worst = s;
        p = j;
      }
    }
    if (p < 0) break;

    double u_p = 0.0;
    while (true) {
      if (++iter > max_iter) throw SolverFailure("solve_dense_qp: iteration limit reached");
      const StepDirections dir = directions(llt, G, state.active, p);

      double t1 = kInf;
      int drop = -1;
      for (int i = 0; i < static_cast<int>(state.active.size()); ++i) {
        if (dir.r[i] > 1e-13) {
          const double ratio = state.u[i] / dir.r[i];
          if (ratio < t1) {
            t1 = ratio;
            drop = i;
          }
        }
      }
      double t2 = kInf;
      if (!dir.primal_null) {
        const double curvature = -G.row(p).dot(dir.d);
        if (curvature > 0.0) t2 = std::max(0.0, -slack(G, h, z, p)) / curvature;
      }
      if (t1 == kInf && t2 == kInf) {
        infeasible = true;
        break;
      }
      const bool full = t2 <= t1;
      const double t = full ? t2 : t1;
      if (!dir.primal_null) z += t * dir.d;
      if (!state.active.empty()) state.u -= t * dir.r;
      u_p += t;
      if (full) {
        const auto pos = std::lower_bound(state.active.begin(), state.active.end(), p) - state.active.begin();
        state.active.insert(state.active.begin() + pos, p);
        Vector u(state.u.size() + 1);
        u << state.u.head(pos), u_p, state.u.tail(state.u.size() - pos);
        state.u = u;
        break;
      }
      state.active.erase(state.active.begin() + drop);
      Vector u(state.u.size() - 1);
      u << state.u.head(drop), state.u.tail(state.u.size() - drop - 1);
      state.u = u;
    }
    if (infeasible) break;
  }

  sol.iterations = iter;
  if (infeasible) {
    sol.status = QpStatus::infeasible;
    return sol;
  }
  sol.status = QpStatus::optimal;
  sol.z = z;
  sol.objective = 0.5 * z.dot(H * z) + c.dot(z);
  sol.working_set = state.active;
  sol.working_multipliers = state.u.cwiseMax(0.0);

  for (int j = 0; j < nrows; ++j) {
    const bool in_working = std::binary_search(state.active.begin(), state.active.end(), j);
    if (in_working || std::abs(slack(G, h, z, j)) <= options.tol_active) sol.active_set.push_back(j);
  }
  sol.multipliers = Vector::Zero(sol.active_set.size());
  for (std::size_t i = 0, w = 0; i < sol.active_set.size(); ++i) {
    if (w < state.active.size() && state.active[w] == sol.active_set[i]) {
      sol.multipliers[i] = sol.working_multipliers[w];
      ++w;
    }
  }
  return sol;
}

QpSolution solve_qp(const CondensedQp& qp, const Vector& x, const IndexList& warm, const QpOptions& options) {
  if (x.size() != qp.n_x) throw InvalidInput("solve_qp: state dimension mismatch");
  return solve_dense_qp(qp.H, qp.H_llt, Vector::Zero(qp.num_vars()), qp.G, qp.shifted_rhs(x), warm, options);
}

IndexList independent_rows(const Matrix& M, double tol) {
  IndexList chosen;
  std::vector<Vector> basis;
  for (int i = 0; i < M.rows(); ++i) {
    Vector r = M.row(i).transpose();
    const double norm0 = r.norm();
    if (norm0 <= tol) continue;
    // two passes of modified Gram-Schmidt
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) r -= q.dot(r) * q;
    }
    const double norm = r.norm();
    if (norm > tol * std::max(1.0, norm0)) {
      basis.push_back(r / norm);
      chosen.push_back(i);
    }
  }
  return chosen;
}

}  // namespace latmpc
