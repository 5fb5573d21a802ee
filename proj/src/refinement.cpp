#include "latmpc/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace latmpc {
namespace {

struct TermGroup {
  IndexList term;
  int owner;
};

std::vector<TermGroup> unique_terms(const SampleDataset& ds, const Matrix& V, LatticeKind kind) {
  std::vector<TermGroup> groups;
  std::map<IndexList, int> seen;
  for (int i = 0; i < static_cast<int>(ds.points.size()); ++i) {
    IndexList t = lattice_term(V.row(i).transpose(), ds.points[i].law_index, kind);
    if (seen.emplace(t, i).second) groups.push_back({std::move(t), i});
  }
  return groups;
}

int sign_with_tol(double t, double tol) {
  if (std::abs(t) <= tol) return 0;
  return t > 0.0 ? 1 : -1;
}

bool has_point(const SampleDataset& ds, const Vector& x, double tol) {
  return std::any_of(ds.points.begin(), ds.points.end(),
                     [&](const SamplePoint& p) { return (p.x - x).cwiseAbs().maxCoeff() <= tol; });
}

}  // namespace

std::vector<ViolationRecord> check_assumption(const SampleDataset& ds, double tol_violation) {
  const int n = static_cast<int>(ds.points.size());
  if (n == 0) return {};
  const Matrix V = ds.value_matrix();
  Vector u(n);
  for (int k = 0; k < n; ++k) u[k] = V(k, ds.points[k].law_index);

  std::vector<ViolationRecord> out;
  for (LatticeKind kind : {LatticeKind::disjunctive, LatticeKind::conjunctive}) {
    const auto groups = unique_terms(ds, V, kind);
    std::vector<std::vector<ViolationRecord>> found(groups.size());
    parallel_for(static_cast<int>(groups.size()), [&](int g) {
      const auto& term = groups[g].term;
      for (int k = 0; k < n; ++k) {
        double gap;
        if (kind == LatticeKind::disjunctive) {
          double lo = V(k, term[0]);
          for (int j : term) lo = std::min(lo, V(k, j));
          gap = lo - u[k];
        } else {
          double hi = V(k, term[0]);
          for (int j : term) hi = std::max(hi, V(k, j));
          gap = u[k] - hi;
        }
        if (gap > tol_violation) found[g].push_back({groups[g].owner, k, kind, gap});
      }
    });
    for (auto& f : found) out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

SegmentResult refine_segment(const LawOracle& oracle, SampleDataset& ds, int a, int b, CounterRng& rng,
                             const RefineOptions& options) {
  struct Node {
    Vector x;
    int law;
    int depth;
  };
  SegmentResult result;
  if (a < 0 || b < 0 || a >= static_cast<int>(ds.points.size()) || b >= static_cast<int>(ds.points.size())) {
    throw InvalidInput("refine_segment: endpoint index out of range");
  }
  const Vector xa = ds.points[a].x;
  const Vector xb = ds.points[b].x;
  const double delta = options.tube_fraction * (xb - xa).norm();
  std::vector<Node> nodes{{xa, ds.points[a].law_index, 0}, {xb, ds.points[b].law_index, 0}};

  bool inserted = true;
  while (inserted) {
    inserted = false;
    for (std::size_t s = 0; s + 1 < nodes.size(); ++s) {
      const Node& p = nodes[s];
      const Node& q = nodes[s + 1];
      if (p.law == q.law) continue;
      const AffineLaw& lp = ds.literals[p.law];
      const AffineLaw& lq = ds.literals[q.law];
      const double up = lp(p.x);
      const double uq = lq(q.x);
      const int s1 = sign_with_tol(up - lq(p.x), tie_tolerance(up));
      const int s2 = sign_with_tol(lp(q.x) - uq, tie_tolerance(uq));
      if (s1 == 0 || s2 == 0 || s1 != s2) continue;
      const int depth = std::max(p.depth, q.depth) + 1;
      if (depth > options.depth_cap) {
        result.diagnostic = "depth cap reached";
        continue;
      }
      const Vector mid = 0.5 * (p.x + q.x);
      std::string why;
      const auto pt = settle_sample(oracle, ds, mid, SampleSource::resampled, delta, true, rng, options.sampler, &why);
      if (!pt) {
        result.aborted = true;
        result.diagnostic = "midpoint rejected: " + why;
        return result;
      }
      if (!has_point(ds, pt->x, options.point_dedup_tol)) {
        ds.points.push_back(*pt);
        result.inserted.push_back(static_cast<int>(ds.points.size()) - 1);
      }
      result.depth_reached = std::max(result.depth_reached, depth);
      nodes.insert(nodes.begin() + static_cast<std::ptrdiff_t>(s) + 1, Node{pt->x, pt->law_index, depth});
      inserted = true;
      ++s;  // skip the freshly created pair; it is examined on the next sweep
    }
  }
  return result;
}

RefineReport refine_until_valid(const LawOracle& oracle, SampleDataset& ds, const RefineOptions& options) {
  RefineReport report;
  const std::size_t points0 = ds.points.size();
  const std::size_t literals0 = ds.literals.size();
  CounterRng rng(options.sampler.seed, 0x5245'4649ULL);
  for (int it = 0; it < options.max_iterations; ++it) {
    auto violations = check_assumption(ds, options.tol_violation);
    if (violations.empty()) {
      report.converged = true;
      break;
    }
    ++report.iterations;
    std::set<std::pair<int, int>> done;
    bool grew = false;
    for (const auto& v : violations) {
      const auto key = std::minmax(v.i, v.k);
      if (v.i == v.k || !done.insert(key).second) continue;
      const std::size_t before = ds.literals.size();
      const SegmentResult seg = refine_segment(oracle, ds, v.i, v.k, rng, options);
      if (!seg.diagnostic.empty()) report.diagnostics.push_back(seg.diagnostic);
      grew = grew || !seg.inserted.empty() || ds.literals.size() > before;
    }
    const double delta = options.restore_fraction * ds.domain.width().minCoeff();
    restore_uo_interior(oracle, ds, {}, delta, true, options.sampler, 0x5253'0000ULL + static_cast<std::uint64_t>(it));
    if (!grew) {
      report.remaining = std::move(violations);
      report.diagnostics.push_back("no segment produced new samples");
      break;
    }
  }
  if (!report.converged && report.remaining.empty()) {
    report.remaining = check_assumption(ds, options.tol_violation);
    report.converged = report.remaining.empty();
  }
  report.points_added = static_cast<int>(ds.points.size()) - static_cast<int>(points0);
  report.literals_added = static_cast<int>(ds.literals.size() - literals0);
  return report;
}

RepairResult lemma16_repair(const LawOracle& oracle, SampleDataset& ds, const Vector& x_gamma, int owner_c,
                            int owner_d, CounterRng& rng, const RefineOptions& options) {
  RepairResult r;
  const int n = static_cast<int>(ds.points.size());
  if (owner_c < 0 || owner_d < 0 || owner_c >= n || owner_d >= n) {
    throw InvalidInput("lemma16_repair: owner index out of range");
  }
  const Matrix V = ds.value_matrix();
  const IndexList Jc = lattice_term(V.row(owner_c).transpose(), ds.points[owner_c].law_index, LatticeKind::conjunctive);
  const IndexList Jd = lattice_term(V.row(owner_d).transpose(), ds.points[owner_d].law_index, LatticeKind::disjunctive);
  double max_c = -std::numeric_limits<double>::infinity();
  double min_d = std::numeric_limits<double>::infinity();
  for (int j : Jc) max_c = std::max(max_c, ds.literals[j](x_gamma));
  for (int j : Jd) min_d = std::min(min_d, ds.literals[j](x_gamma));
  if (max_c - min_d >= -options.tol_violation) return r;
  r.applied = true;

  const auto q = oracle.query(x_gamma);
  if (!q) {
    r.inconsistent = true;
    r.diagnostic = "witness is infeasible";
    return r;
  }
  const double u_star = q->value;
  r.disjunctive_side = min_d > u_star + tie_tolerance(u_star);
  r.conjunctive_side = max_c < u_star - tie_tolerance(u_star);
  if (!r.disjunctive_side && !r.conjunctive_side) {
    r.inconsistent = true;
    r.diagnostic = "neither term misjudges u* at the witness";
    return r;
  }

  const std::size_t points0 = ds.points.size();
  const std::size_t literals0 = ds.literals.size();
  const double delta = options.restore_fraction * ds.domain.width().minCoeff();
  std::string why;
  const auto pt = settle_sample(oracle, ds, x_gamma, SampleSource::resampled, delta, true, rng, options.sampler, &why);
  if (!pt) {
    r.diagnostic = "witness rejected: " + why;
    return r;
  }
  int g = -1;
  for (int i = 0; i < static_cast<int>(ds.points.size()); ++i) {
    if ((ds.points[i].x - pt->x).cwiseAbs().maxCoeff() <= options.point_dedup_tol) g = i;
  }
  if (g < 0) {
    ds.points.push_back(*pt);
    g = static_cast<int>(ds.points.size()) - 1;
  }
  if (r.disjunctive_side && owner_d != g) {
    const auto seg = refine_segment(oracle, ds, owner_d, g, rng, options);
    if (!seg.diagnostic.empty()) r.diagnostic = seg.diagnostic;
  }
  if (r.conjunctive_side && owner_c != g) {
    const auto seg = refine_segment(oracle, ds, owner_c, g, rng, options);
    if (!seg.diagnostic.empty()) r.diagnostic = seg.diagnostic;
  }
  r.points_added = static_cast<int>(ds.points.size() - points0);
  r.literals_added = static_cast<int>(ds.literals.size() - literals0);
  return r;
}

}  // namespace latmpc
