#include "latmpc/lattice.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>

namespace latmpc {

const char* to_string(LatticeKind kind) {
  return kind == LatticeKind::disjunctive ? "disjunctive" : "conjunctive";
}

LatticeKind lattice_kind_from_string(const std::string& s) {
  if (s == "disjunctive") return LatticeKind::disjunctive;
  if (s == "conjunctive") return LatticeKind::conjunctive;
  throw InvalidInput("unknown lattice kind '" + s + "'");
}

LatticeForm::LatticeForm(LatticeKind kind, std::vector<AffineLaw> literals, std::vector<IndexList> terms,
                         std::vector<int> anchors)
    : kind_(kind), literals_(std::move(literals)), terms_(std::move(terms)), anchors_(std::move(anchors)) {
  if (literals_.empty()) throw InvalidInput("lattice form needs at least one literal");
  const int n = static_cast<int>(literals_[0].a.size());
  const int m = static_cast<int>(literals_.size());
  coeffs_.resize(m, n);
  offsets_.resize(m);
  for (int j = 0; j < m; ++j) {
    if (literals_[j].a.size() != n) throw InvalidInput("lattice literals differ in dimension");
    coeffs_.row(j) = literals_[j].a.transpose();
    offsets_[j] = literals_[j].b;
  }
  for (auto& t : terms_) {
    if (t.empty()) throw InvalidInput("lattice term is empty");
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    for (int j : t) {
      if (j < 0 || j >= m) throw InvalidInput("lattice term references a missing literal");
    }
  }
  if (anchors_.empty()) anchors_.assign(terms_.size(), -1);
  if (anchors_.size() != terms_.size()) throw InvalidInput("lattice anchors do not match terms");
}

double LatticeForm::evaluate_values(const Vector& v) const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (kind_ == LatticeKind::disjunctive) {
    double best = -inf;
    for (const auto& t : terms_) {
      double inner = inf;
      for (int j : t) {
        inner = std::min(inner, v[j]);
        if (inner <= best) break;
      }
      best = std::max(best, inner);
    }
    return best;
  }
  double best = inf;
  for (const auto& t : terms_) {
    double inner = -inf;
    for (int j : t) {
      inner = std::max(inner, v[j]);
      if (inner >= best) break;
    }
    best = std::min(best, inner);
  }
  return best;
}

double LatticeForm::evaluate(const Vector& x) const {
  thread_local Vector values;
  values.noalias() = coeffs_ * x;
  values += offsets_;
  return evaluate_values(values);
}

double evaluate(const LatticeForm& form, const Vector& x) { return form.evaluate(x); }

IndexList lattice_term(const Eigen::Ref<const Vector>& values, int own_law, LatticeKind kind) {
  const double u = values[own_law];
  const double tol = tie_tolerance(u);
  IndexList term;
  for (int j = 0; j < values.size(); ++j) {
    const bool enters = kind == LatticeKind::disjunctive ? values[j] > u + tol : values[j] < u - tol;
    if (j == own_law || enters) term.push_back(j);
  }
  return term;
}

LatticeForm build_lattice(const SampleDataset& ds, LatticeKind kind) {
  if (ds.points.empty()) throw InvalidInput("build_lattice: empty dataset");
  const Matrix V = ds.value_matrix();
  std::vector<IndexList> terms;
  std::vector<int> anchors;
  std::map<IndexList, int> seen;
  for (std::size_t i = 0; i < ds.points.size(); ++i) {
    IndexList term = lattice_term(V.row(i).transpose(), ds.points[i].law_index, kind);
    if (seen.emplace(term, static_cast<int>(terms.size())).second) {
      terms.push_back(std::move(term));
      anchors.push_back(static_cast<int>(i));
    }
  }
  return LatticeForm(kind, ds.literals, std::move(terms), std::move(anchors));
}

LatticeForm simplify(const LatticeForm& form) {
  const auto& terms = form.terms();
  std::vector<int> order(terms.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (terms[a].size() != terms[b].size()) return terms[a].size() < terms[b].size();
    return terms[a] < terms[b];
  });
  std::vector<IndexList> kept;
  std::vector<int> anchors;
  for (int idx : order) {
    const IndexList& t = terms[idx];
    const bool absorbed = std::any_of(kept.begin(), kept.end(), [&](const IndexList& k) {
      return std::includes(t.begin(), t.end(), k.begin(), k.end());
    });
    if (!absorbed) {
      kept.push_back(t);
      anchors.push_back(form.anchors()[idx]);
    }
  }
  return LatticeForm(form.kind(), form.literals(), std::move(kept), std::move(anchors));
}

LatticeForm prune_dominated(const LatticeForm& form, const Box& domain) {
  if (domain.dim() != form.n_x()) throw InvalidInput("prune_dominated: dimension mismatch");
  const auto& lits = form.literals();
  // max over the box of u_k - u_j
  auto max_gap = [&](int k, int j) {
    double v = lits[k].b - lits[j].b;
    for (int i = 0; i < domain.dim(); ++i) {
      const double c = lits[k].a[i] - lits[j].a[i];
      v += std::max(c * domain.lo[i], c * domain.hi[i]);
    }
    return v;
  };
  const bool disjunctive = form.kind() == LatticeKind::disjunctive;
  std::vector<IndexList> terms;
  for (const auto& t : form.terms()) {
    IndexList kept = t;
    for (int j : t) {
      const bool dominated = std::any_of(kept.begin(), kept.end(), [&](int k) {
        return k != j && (disjunctive ? max_gap(k, j) <= 0.0 : max_gap(j, k) <= 0.0);
      });
      if (dominated) kept.erase(std::find(kept.begin(), kept.end(), j));
    }
    terms.push_back(std::move(kept));
  }
  return simplify(LatticeForm(form.kind(), lits, std::move(terms), form.anchors()));
}

StorageStats storage_stats(const LatticeForm& form) {
  StorageStats s;
  s.M = form.num_literals();
  s.N_terms = form.num_terms();
  s.reals = (form.n_x() + 1) * s.M;
  for (const auto& t : form.terms()) s.integers += static_cast<int>(t.size());
  s.total_params = s.reals + s.integers;
  return s;
}

}  // namespace latmpc
