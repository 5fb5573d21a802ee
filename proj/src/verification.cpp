#include "latmpc/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "latmpc/dense_solvers.hpp"

namespace latmpc {
namespace {

double box_min(const AffineLaw& l, const Box& box) {
  double v = l.b;
  for (int i = 0; i < box.dim(); ++i) v += std::min(l.a[i] * box.lo[i], l.a[i] * box.hi[i]);
  return v;
}

double box_max(const AffineLaw& l, const Box& box) {
  double v = l.b;
  for (int i = 0; i < box.dim(); ++i) v += std::max(l.a[i] * box.lo[i], l.a[i] * box.hi[i]);
  return v;
}

double widen(double v, bool up) {
  const double pad = 1e-6 * (1.0 + std::abs(v));
  return up ? v + pad : v - pad;
}

}  // namespace

LpScanReport lp_scan(const LatticeForm& form_c, const LatticeForm& form_d, const Box& domain, double tol) {
  if (form_c.kind() != LatticeKind::conjunctive || form_d.kind() != LatticeKind::disjunctive) {
    throw InvalidInput("lp_scan: expects a conjunctive and a disjunctive form");
  }
  if (form_c.n_x() != domain.dim() || form_d.n_x() != domain.dim()) throw InvalidInput("lp_scan: dimension mismatch");
  const int n = domain.dim();
  const int nc = form_c.num_terms();
  const int nd = form_d.num_terms();
  std::vector<LpSolution> sols(static_cast<std::size_t>(nc) * nd);

  parallel_for(nc * nd, [&](int pair) {
    const IndexList& Jc = form_c.terms()[pair / nd];
    const IndexList& Jd = form_d.terms()[pair % nd];
    const int rows = static_cast<int>(Jc.size() + Jd.size());
    Matrix A = Matrix::Zero(rows, n + 2);
    Vector b(rows);
    double y1_lo = -std::numeric_limits<double>::infinity(), y1_hi = y1_lo;
    double y2_lo = y1_lo, y2_hi = y1_lo;
    int r = 0;
    for (int j : Jc) {
      const AffineLaw& l = form_c.literals()[j];
      A.row(r).head(n) = l.a.transpose();
      A(r, n) = -1.0;
      b[r++] = -l.b;
      y1_lo = std::max(y1_lo, box_min(l, domain));
      y1_hi = std::max(y1_hi, box_max(l, domain));
    }
    for (int j : Jd) {
      const AffineLaw& l = form_d.literals()[j];
      A.row(r).head(n) = -l.a.transpose();
      A(r, n + 1) = -1.0;
      b[r++] = l.b;
      y2_lo = std::max(y2_lo, -box_max(l, domain));
      y2_hi = std::max(y2_hi, -box_min(l, domain));
    }
    Vector lo(n + 2), hi(n + 2);
    lo << domain.lo, widen(y1_lo, false), widen(y2_lo, false);
    hi << domain.hi, widen(y1_hi, true), widen(y2_hi, true);
    Vector c = Vector::Zero(n + 2);
    c[n] = 1.0;
    c[n + 1] = 1.0;
    sols[pair] = solve_lp(c, A, b, Box(lo, hi));
  });

  LpScanReport report;
  report.min_objective = std::numeric_limits<double>::infinity();
  for (int pair = 0; pair < nc * nd; ++pair) {
    const LpSolution& s = sols[pair];
    if (s.status != LpStatus::optimal) throw SolverFailure("lp_scan: epigraph LP did not reach an optimum");
    ++report.pairs_checked;
    report.min_objective = std::min(report.min_objective, s.objective);
    if (s.objective < -tol) {
      const int i = pair / nd;
      const int k = pair % nd;
      report.witnesses.push_back({s.x.head(n), i, k, form_c.anchors()[i], form_d.anchors()[k], s.objective});
    }
  }
  if (report.pairs_checked == 0) report.min_objective = 0.0;
  return report;
}

double hoeffding_confidence(long long n_v, double epsilon) {
  return 1.0 - 2.0 * std::exp(-2.0 * static_cast<double>(n_v) * epsilon * epsilon);
}

ValidationReport hoeffding_validate(const LatticeForm& form_d, const LatticeForm& form_c, const Box& domain,
                                    long long n_v, double epsilon, std::uint64_t seed, double tol_eq,
                                    const PointFilter& filter) {
  if (n_v < 1) throw InvalidInput("hoeffding_validate: N_v must be positive");
  if (!(epsilon > 0.0)) throw InvalidInput("hoeffding_validate: epsilon must be positive");
  constexpr long long kChunk = 4096;
  constexpr std::size_t kMaxStored = 1000;
  const long long chunks = (n_v + kChunk - 1) / kChunk;

  struct ChunkResult {
    long long mismatches = 0;
    long long ordering = 0;
    std::vector<Mismatch> stored;
  };
  std::vector<ChunkResult> results(chunks);
  parallel_for(static_cast<int>(chunks), [&](int c) {
    CounterRng rng(seed, static_cast<std::uint64_t>(c));
    const long long count = std::min(kChunk, n_v - c * kChunk);
    ChunkResult& out = results[c];
    for (long long t = 0; t < count; ++t) {
      Vector x = rng.uniform_in(domain);
      if (filter) {
        while (!filter(x)) x = rng.uniform_in(domain);
      }
      const double fd = form_d.evaluate(x);
      const double fc = form_c.evaluate(x);
      if (fd > fc + tol_eq) ++out.ordering;
      if (std::abs(fd - fc) > tol_eq) {
        ++out.mismatches;
        if (out.stored.size() < kMaxStored) out.stored.push_back({x, fd, fc});
      }
    }
  });

  ValidationReport rep;
  rep.N_v = n_v;
  rep.epsilon = epsilon;
  rep.seed = seed;
  for (auto& r : results) {
    rep.mismatch_count += r.mismatches;
    rep.ordering_violations += r.ordering;
    for (auto& m : r.stored) {
      if (rep.mismatches.size() < kMaxStored) rep.mismatches.push_back(std::move(m));
    }
  }
  rep.I_bar = static_cast<double>(n_v - rep.mismatch_count) / static_cast<double>(n_v);
  rep.confidence = hoeffding_confidence(n_v, epsilon);
  return rep;
}

SandwichReport sandwich_check(const LatticeForm& form_d, const LatticeForm& form_c, const LawOracle& oracle,
                              const Box& domain, int n_points, std::uint64_t seed) {
  SandwichReport rep;
  rep.epsilon_hat = -std::numeric_limits<double>::infinity();
  const long long max_draws = 100LL * std::max(n_points, 1);
  constexpr int kBatch = 256;
  CounterRng rng(seed, 0x5357'4943ULL);
  long long draws = 0;
  while (rep.checked < n_points && draws < max_draws) {
    std::vector<Vector> xs(kBatch);
    for (auto& x : xs) x = rng.uniform_in(domain);
    draws += kBatch;
    std::vector<std::optional<LawQuery>> qs(kBatch);
    parallel_for(kBatch, [&](int i) { qs[i] = oracle.query(xs[i]); });
    for (int i = 0; i < kBatch && rep.checked < n_points; ++i) {
      if (!qs[i]) {
        ++rep.infeasible_skipped;
        continue;
      }
      const double u = qs[i]->value;
      const double fd = form_d.evaluate(xs[i]);
      const double fc = form_c.evaluate(xs[i]);
      rep.max_lower_violation = std::max(rep.max_lower_violation, fd - u);
      rep.max_upper_violation = std::max(rep.max_upper_violation, u - fc);
      rep.epsilon_hat = std::max(rep.epsilon_hat, fc - fd);
      rep.max_abs_error = std::max({rep.max_abs_error, std::abs(fd - u), std::abs(fc - u)});
      ++rep.checked;
    }
  }
  if (rep.checked == 0) rep.epsilon_hat = 0.0;
  return rep;
}

}  // namespace latmpc
