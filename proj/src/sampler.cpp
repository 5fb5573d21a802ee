#include "latmpc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace latmpc {

const char* to_string(SampleSource s) {
  switch (s) {
    case SampleSource::grid: return "grid";
    case SampleSource::perturbed: return "perturbed";
    case SampleSource::resampled: return "resampled";
    case SampleSource::trajectory: return "trajectory";
  }
  return "grid";
}

SampleSource sample_source_from_string(const std::string& s) {
  if (s == "grid") return SampleSource::grid;
  if (s == "perturbed") return SampleSource::perturbed;
  if (s == "resampled") return SampleSource::resampled;
  if (s == "trajectory") return SampleSource::trajectory;
  throw InvalidInput("unknown sample source '" + s + "'");
}

Matrix SampleDataset::value_matrix() const {
  const int n = static_cast<int>(points.size());
  const int m = static_cast<int>(literals.size());
  Matrix Aall(m, n_x());
  Vector ball(m);
  for (int j = 0; j < m; ++j) {
    Aall.row(j) = literals[j].a.transpose();
    ball[j] = literals[j].b;
  }
  Matrix X(n_x(), n);
  for (int i = 0; i < n; ++i) X.col(i) = points[i].x;
  Matrix V = (Aall * X).transpose();
  V.rowwise() += ball.transpose();
  return V;
}

AffineLaw extract_affine_law(const CondensedQp& qp, const QpSolution& sol) {
  if (sol.status != QpStatus::optimal) throw InvalidInput("extract_affine_law: solution is not optimal");
  IndexList order = sol.working_set;
  for (int j : sol.active_set) {
    if (!std::binary_search(sol.working_set.begin(), sol.working_set.end(), j)) order.push_back(j);
  }
  Matrix Gorder(order.size(), qp.num_vars());
  for (std::size_t i = 0; i < order.size(); ++i) Gorder.row(i) = qp.G.row(order[i]);
  IndexList rows;
  for (int i : independent_rows(Gorder)) rows.push_back(order[i]);
  std::sort(rows.begin(), rows.end());

  const int m = qp.num_vars();
  const int q = static_cast<int>(rows.size());
  Matrix Kz = Matrix::Zero(m, qp.n_x);
  Vector kz = Vector::Zero(m);
  if (q > 0) {
    Matrix GA(q, m);
    Matrix SA(q, qp.n_x);
    Vector wA(q);
    for (int i = 0; i < q; ++i) {
      GA.row(i) = qp.G.row(rows[i]);
      SA.row(i) = qp.S.row(rows[i]);
      wA[i] = qp.w[rows[i]];
    }
    const Matrix HinvGt = qp.H_llt.solve(GA.transpose());
    const Eigen::LDLT<Matrix> M(GA * HinvGt);
    Kz = HinvGt * M.solve(SA);
    kz = HinvGt * M.solve(wA);
  }
  AffineLaw law;
  law.full_K = Kz - qp.Hinv_Ft;
  law.k = kz;
  law.a = law.full_K->row(0).transpose();
  law.b = law.k[0];
  law.origin_active_set = rows;
  return law;
}

std::optional<LawQuery> MpcLawOracle::query(const Vector& x) const {
  const QpSolution sol = solve_qp(qp_, x);
  if (sol.status != QpStatus::optimal) return std::nullopt;
  LawQuery out;
  out.law = extract_affine_law(qp_, sol);
  out.value = qp_.inputs_from_shifted(sol.z, x)[0];
  bool boundary = out.law.origin_active_set.size() > sol.working_set.size();
  for (Eigen::Index i = 0; i < sol.working_multipliers.size(); ++i) {
    if (sol.working_multipliers[i] <= multiplier_tol_) boundary = true;
  }
  out.boundary = boundary;
  return out;
}

int dedup_law(std::vector<AffineLaw>& pool, const AffineLaw& candidate, double tol) {
  for (std::size_t j = 0; j < pool.size(); ++j) {
    if (pool[j].a.size() != candidate.a.size()) continue;
    const double dist = (pool[j].a - candidate.a).cwiseAbs().maxCoeff() + std::abs(pool[j].b - candidate.b);
    if (dist <= tol) return static_cast<int>(j);
  }
  pool.push_back(candidate);
  return static_cast<int>(pool.size()) - 1;
}

double tie_tolerance(double value) { return 1e-9 * std::max(1.0, std::abs(value)); }

bool uo_interior(const std::vector<AffineLaw>& pool, const Vector& x, double own_value) {
  std::vector<double> v;
  v.reserve(pool.size());
  for (const auto& law : pool) v.push_back(law(x));
  std::sort(v.begin(), v.end());
  const double tol = tie_tolerance(own_value);
  for (std::size_t j = 1; j < v.size(); ++j) {
    if (v[j] - v[j - 1] <= tol) return false;
  }
  return true;
}

namespace {

std::vector<Vector> grid_points(const Box& domain, const std::vector<int>& counts) {
  const int n = domain.dim();
  std::vector<Vector> pts;
  std::vector<int> idx(n, 0);
  while (true) {
    Vector x(n);
    for (int d = 0; d < n; ++d) {
      x[d] = domain.lo[d] + (domain.hi[d] - domain.lo[d]) * idx[d] / (counts[d] - 1);
    }
    pts.push_back(x);
    int d = n - 1;
    while (d >= 0 && ++idx[d] == counts[d]) idx[d--] = 0;
    if (d < 0) break;
  }
  return pts;
}

}  // namespace

std::optional<SamplePoint> settle_sample(const LawOracle& oracle, SampleDataset& ds, const Vector& x,
                                         SampleSource source, double delta, bool keep_in_domain,
                                         CounterRng& rng, const SamplerOptions& options, std::string* why) {
  auto accept = [&](const Vector& xs, const LawQuery& q, SampleSource src) -> std::optional<SamplePoint> {
    std::vector<AffineLaw> trial = ds.literals;
    const int idx = dedup_law(trial, q.law, options.dedup_tol);
    if (!uo_interior(trial, xs, q.value)) return std::nullopt;
    if (idx == static_cast<int>(ds.literals.size())) ds.literals.push_back(q.law);
    return SamplePoint{xs, idx, q.value, src};
  };
  const auto q0 = oracle.query(x);
  if (!q0) {
    if (why) *why = "infeasible";
    return std::nullopt;
  }
  if (!q0->boundary) {
    if (auto pt = accept(x, *q0, source)) return pt;
  }
  for (int attempt = 0; attempt < options.max_retries; ++attempt) {
    Vector xp = x + delta * rng.unit_sphere(static_cast<int>(x.size()));
    if (keep_in_domain) xp = ds.domain.reflect_inside(xp);
    const auto q = oracle.query(xp);
    if (!q || q->boundary) continue;
    if (auto pt = accept(xp, *q, SampleSource::perturbed)) return pt;
  }
  if (why) *why = "perturbation failed after retries";
  return std::nullopt;
}

int restore_uo_interior(const LawOracle& oracle, SampleDataset& ds, std::vector<bool> flagged, double delta,
                        bool keep_in_domain, const SamplerOptions& options, std::uint64_t stream_base) {
  flagged.resize(ds.points.size(), false);
  std::vector<std::uint64_t> ids(ds.points.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  std::vector<bool> moved(ds.points.size(), false);
  int moved_count = 0;

  for (int pass = 0; pass < 50; ++pass) {
    bool changed = false;
    std::vector<bool> drop(ds.points.size(), false);
    for (std::size_t i = 0; i < ds.points.size(); ++i) {
      SamplePoint& pt = ds.points[i];
      if (!flagged[i] && uo_interior(ds.literals, pt.x, pt.u_value)) continue;
      CounterRng rng(options.seed, mix64(stream_base ^ mix64(ids[i])) + static_cast<std::uint64_t>(pass));
      bool accepted = false;
      for (int attempt = 0; attempt < options.max_retries && !accepted; ++attempt) {
        Vector x = pt.x + delta * rng.unit_sphere(ds.n_x());
        if (keep_in_domain) x = ds.domain.reflect_inside(x);
        const auto q = oracle.query(x);
        if (!q || q->boundary) continue;
        std::vector<AffineLaw> trial = ds.literals;
        const int idx = dedup_law(trial, q->law, options.dedup_tol);
        if (!uo_interior(trial, x, q->value)) continue;
        if (idx == static_cast<int>(ds.literals.size())) ds.literals.push_back(q->law);
        pt.x = x;
        pt.law_index = idx;
        pt.u_value = q->value;
        pt.source = SampleSource::perturbed;
        accepted = true;
      }
      flagged[i] = false;
      if (accepted) {
        changed = true;
        if (!moved[i]) {
          moved[i] = true;
          ++moved_count;
        }
      } else {
        drop[i] = true;
        ds.stats.skipped.push_back({pt.x, "perturbation failed after retries"});
        changed = true;
      }
    }
    if (std::find(drop.begin(), drop.end(), true) != drop.end()) {
      std::size_t out = 0;
      for (std::size_t i = 0; i < ds.points.size(); ++i) {
        if (drop[i]) continue;
        ds.points[out] = ds.points[i];
        ids[out] = ids[i];
        moved[out] = moved[i];
        flagged[out] = flagged[i];
        ++out;
      }
      ds.points.resize(out);
      ids.resize(out);
      moved.resize(out);
      flagged.resize(out);
    }
    if (!changed) break;
  }
  ds.stats.perturbed += moved_count;
  return moved_count;
}

SampleDataset sample_grid(const LawOracle& oracle, const Box& domain, const std::vector<int>& counts,
                          const SamplerOptions& options) {
  if (static_cast<int>(counts.size()) != domain.dim() || oracle.n_x() != domain.dim()) {
    throw InvalidInput("sample_grid: dimension mismatch");
  }
  for (int c : counts) {
    if (c < 2) throw InvalidInput("sample_grid: at least two grid points per dimension");
  }
  const std::vector<Vector> pts = grid_points(domain, counts);
  std::vector<std::optional<LawQuery>> results(pts.size());
  parallel_for(static_cast<int>(pts.size()), [&](int i) { results[i] = oracle.query(pts[i]); });

  SampleDataset ds;
  ds.domain = domain;
  ds.stats.raw_points = static_cast<int>(pts.size());
  std::vector<bool> flagged;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!results[i]) {
      ++ds.stats.infeasible;
      continue;
    }
    const int idx = dedup_law(ds.literals, results[i]->law, options.dedup_tol);
    ds.points.push_back({pts[i], idx, results[i]->value, SampleSource::grid});
    flagged.push_back(results[i]->boundary);
  }
  double step = std::numeric_limits<double>::infinity();
  for (int d = 0; d < domain.dim(); ++d) step = std::min(step, (domain.hi[d] - domain.lo[d]) / (counts[d] - 1));
  restore_uo_interior(oracle, ds, flagged, options.perturb_fraction * step, true, options, 0);
  return ds;
}

SampleDataset sample_trajectories(const LawOracle& oracle, const Matrix& A, const Matrix& B, const Box& domain,
                                  int n_init, int steps, const SamplerOptions& options) {
  if (oracle.n_x() != domain.dim() || A.rows() != domain.dim() || B.rows() != domain.dim()) {
    throw InvalidInput("sample_trajectories: dimension mismatch");
  }
  if (n_init < 0 || steps < 0) throw InvalidInput("sample_trajectories: negative counts");
  struct Visit {
    Vector x;
    LawQuery q;
  };
  std::vector<std::vector<Visit>> runs(n_init);
  std::vector<int> resamples(n_init, 0);
  constexpr int kMaxDraws = 100000;
  parallel_for(n_init, [&](int i) {
    CounterRng rng(options.seed, 0x7261'6a00ULL + static_cast<std::uint64_t>(i));
    std::optional<LawQuery> q;
    Vector x;
    for (int draw = 0; draw < kMaxDraws; ++draw) {
      x = rng.uniform_in(domain);
      q = oracle.query(x);
      if (q) break;
      ++resamples[i];
    }
    if (!q) throw SolverFailure("sample_trajectories: no feasible initial state found");
    for (int k = 0; k <= steps; ++k) {
      runs[i].push_back({x, *q});
      if (k == steps) break;
      Vector u(B.cols());
      u.setZero();
      u[0] = q->value;
      if (q->law.full_K) {
        const Vector U = *q->law.full_K * x + q->law.k;
        u = U.head(B.cols());
      }
      x = A * x + B * u;
      q = oracle.query(x);
      if (!q) break;
    }
  });

  SampleDataset ds;
  ds.domain = domain;
  std::vector<bool> flagged;
  for (int i = 0; i < n_init; ++i) {
    ds.stats.resampled_initial += resamples[i];
    for (const auto& v : runs[i]) {
      const int idx = dedup_law(ds.literals, v.q.law, options.dedup_tol);
      ds.points.push_back({v.x, idx, v.q.value, SampleSource::trajectory});
      flagged.push_back(v.q.boundary);
    }
  }
  ds.stats.raw_points = static_cast<int>(ds.points.size());
  const double delta = options.trajectory_perturb_fraction * domain.width().minCoeff();
  restore_uo_interior(oracle, ds, flagged, delta, false, options, 0x5452'4a00ULL);
  return ds;
}

}  // namespace latmpc
