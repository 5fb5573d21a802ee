#include <cmath>

#include "doctest.h"

#include "latmpc/lattice.hpp"
#include "latmpc/refinement.hpp"
#include "support/test_support.hpp"

using namespace latmpc;
using testing::example1_numbering;
using testing::terms_in_numbering;

namespace {

// Example 1 with l2 present: the four printed samples plus one point on l2.
SampleDataset example1_full() {
  const auto oracle = testing::example1_oracle();
  return testing::dataset_at(oracle, oracle.domain(), {0.5, 2.4, 3.75, 4.5, 1.2});
}

std::vector<AffineLaw> example1_literals() {
  const auto oracle = testing::example1_oracle();
  std::vector<AffineLaw> pool;
  for (const auto& p : oracle.pieces()) pool.push_back({Vector::Constant(1, p.slope), p.offset, std::nullopt, Vector(), {}});
  return pool;
}

// 1-based paper numbering to 0-based indices into example1_literals()
std::vector<IndexList> zero_based(const std::vector<IndexList>& terms) {
  std::vector<IndexList> out;
  for (auto t : terms) {
    for (int& j : t) --j;
    out.push_back(t);
  }
  return out;
}

SampleDataset random_dataset(std::uint64_t seed, int n_x, int n_lit, int n_pts) {
  CounterRng rng(seed, 0);
  SampleDataset ds;
  ds.domain = Box(Vector::Constant(n_x, -1.0), Vector::Constant(n_x, 1.0));
  for (int j = 0; j < n_lit; ++j) {
    AffineLaw l;
    l.a = Vector(n_x);
    for (int i = 0; i < n_x; ++i) l.a[i] = rng.normal();
    l.b = rng.normal();
    ds.literals.push_back(l);
  }
  for (int k = 0; k < n_pts; ++k) {
    const Vector x = rng.uniform_in(ds.domain);
    const int own = static_cast<int>(rng.uniform() * n_lit) % n_lit;
    ds.points.push_back({x, own, ds.literals[own](x), SampleSource::grid});
  }
  return ds;
}

}  // namespace

TEST_CASE("build_lattice: Example 1 terms at single points") {
  const SampleDataset ds = example1_full();
  const auto num = example1_numbering(ds.literals);
  REQUIRE(std::find(num.begin(), num.end(), -1) == num.end());
  const Matrix V = ds.value_matrix();
  // x = 2.4 owns l3
  const IndexList d = lattice_term(V.row(1).transpose(), ds.points[1].law_index, LatticeKind::disjunctive);
  IndexList expect_d{num[1], num[2], num[3]};
  std::sort(expect_d.begin(), expect_d.end());
  CHECK(d == expect_d);
  // x = 0.5 owns l1
  const IndexList c = lattice_term(V.row(0).transpose(), ds.points[0].law_index, LatticeKind::conjunctive);
  IndexList expect_c{num[0], num[1]};
  std::sort(expect_c.begin(), expect_c.end());
  CHECK(c == expect_c);
}

TEST_CASE("build_lattice: single point dataset") {
  const auto oracle = testing::example1_oracle();
  SampleDataset ds = testing::dataset_at(oracle, oracle.domain(), {2.4});
  ds.literals = example1_literals();
  ds.points[0].law_index = 2;
  const LatticeForm f = build_lattice(ds, LatticeKind::disjunctive);
  REQUIRE(f.num_terms() == 1);
  CHECK(f.terms()[0] == IndexList{1, 2, 3});
  CHECK(f.anchors() == std::vector<int>{0});
}

TEST_CASE("build_lattice: empty dataset rejected") {
  SampleDataset ds;
  ds.domain = Box(Vector::Zero(1), Vector::Ones(1));
  CHECK_THROWS_AS(build_lattice(ds, LatticeKind::disjunctive), InvalidInput);
}

TEST_CASE("simplify: Example 1 disjunctive and conjunctive") {
  const auto lits = example1_literals();
  const LatticeForm d(LatticeKind::disjunctive, lits,
                      zero_based({{1, 3, 4, 5}, {2, 3, 4, 5}, {2, 3, 4}, {1, 2, 3, 4}, {1, 2, 3, 5}}));
  const LatticeForm ds = simplify(d);
  CHECK(ds.terms() == zero_based({{2, 3, 4}, {1, 2, 3, 5}, {1, 3, 4, 5}}));
  const LatticeForm c(LatticeKind::conjunctive, lits, zero_based({{1, 2}, {1, 2}, {1, 3, 5}, {4, 5}, {4, 5}}));
  const LatticeForm cs = simplify(c);
  CHECK(cs.terms() == zero_based({{1, 2}, {4, 5}, {1, 3, 5}}));
  // idempotent
  CHECK(simplify(ds).terms() == ds.terms());
  CHECK(simplify(cs).terms() == cs.terms());
}

TEST_CASE("evaluate: Example 1 printed values") {
  const auto lits = example1_literals();
  const LatticeForm d(LatticeKind::disjunctive, lits, zero_based({{1, 3, 4, 5}, {2, 3, 4}, {1, 2, 3, 5}}));
  const LatticeForm c(LatticeKind::conjunctive, lits, zero_based({{1, 2}, {1, 3, 5}, {4, 5}}));
  CHECK(std::abs(d.evaluate(Vector::Constant(1, 4.5)) - 0.75) <= 1e-15);
  CHECK(std::abs(c.evaluate(Vector::Constant(1, 1.2)) - 1.4) <= 1e-15);
  CHECK(evaluate(d, Vector::Constant(1, 4.5)) == d.evaluate(Vector::Constant(1, 4.5)));
  const LatticeForm one(LatticeKind::conjunctive, {lits[3]}, {{0}});
  CHECK(one.evaluate(Vector::Constant(1, 0.7)) == lits[3](Vector::Constant(1, 0.7)));
}

TEST_CASE("storage_stats: counts") {
  const auto lits = example1_literals();
  const LatticeForm d(LatticeKind::disjunctive, lits, zero_based({{1, 3, 4, 5}, {2, 3, 4}, {1, 2, 3, 5}}));
  const StorageStats s = storage_stats(d);
  CHECK(s.M == 5);
  CHECK(s.N_terms == 3);
  CHECK(s.reals == 10);
  CHECK(s.integers == 11);
  CHECK(s.total_params == 21);
  AffineLaw l{Vector::Ones(4), 0.5, std::nullopt, Vector(), {}};
  const StorageStats one = storage_stats(LatticeForm(LatticeKind::disjunctive, {l}, {{0}}));
  CHECK(one.total_params == 4 + 1 + 1);
  // 13 literals in 4-D with 6 terms holding all of them
  const int M = 13, n = 4, Nt = 6;
  CHECK((n + 1) * M + Nt * M == 143);
}

TEST_CASE("LatticeForm: rejects malformed terms") {
  const auto lits = example1_literals();
  CHECK_THROWS_AS(LatticeForm(LatticeKind::disjunctive, lits, {{}}), InvalidInput);
  CHECK_THROWS_AS(LatticeForm(LatticeKind::disjunctive, lits, {{0, 7}}), InvalidInput);
}

TEST_CASE("simplify: soundness at 1e4 points") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SampleDataset ds = random_dataset(seed, 3, 12, 200);
    for (auto kind : {LatticeKind::disjunctive, LatticeKind::conjunctive}) {
      const LatticeForm f = build_lattice(ds, kind);
      const LatticeForm s = simplify(f);
      CHECK(s.num_terms() <= f.num_terms());
      CounterRng rng(seed, 77);
      double worst = 0.0;
      for (int i = 0; i < 10000; ++i) {
        const Vector x = rng.uniform_in(ds.domain);
        worst = std::max(worst, std::abs(f.evaluate(x) - s.evaluate(x)));
      }
      CHECK(worst <= 1e-12);
      // no term contains another
      for (std::size_t i = 0; i < s.terms().size(); ++i)
        for (std::size_t j = 0; j < s.terms().size(); ++j)
          if (i != j)
            CHECK_FALSE(std::includes(s.terms()[i].begin(), s.terms()[i].end(), s.terms()[j].begin(),
                                      s.terms()[j].end()));
    }
  }
}

TEST_CASE("build_lattice: duality under negation") {
  const SampleDataset ds = random_dataset(9, 2, 8, 100);
  SampleDataset neg = ds;
  for (auto& l : neg.literals) {
    l.a = -l.a;
    l.b = -l.b;
  }
  for (auto& p : neg.points) p.u_value = -p.u_value;
  const LatticeForm d = build_lattice(ds, LatticeKind::disjunctive);
  const LatticeForm c = build_lattice(neg, LatticeKind::conjunctive);
  CHECK(d.terms() == c.terms());
  CounterRng rng(9, 1);
  for (int i = 0; i < 1000; ++i) {
    const Vector x = rng.uniform_in(ds.domain);
    CHECK(c.evaluate(x) == -d.evaluate(x));
  }
}

TEST_CASE("terms: adding a literal never raises the inner min") {
  const SampleDataset ds = random_dataset(4, 2, 6, 1);
  CounterRng rng(4, 2);
  for (int i = 0; i < 500; ++i) {
    const Vector x = rng.uniform_in(ds.domain);
    double prev = std::numeric_limits<double>::infinity();
    IndexList term;
    for (int j = 0; j < 6; ++j) {
      term.push_back(j);
      const double v = LatticeForm(LatticeKind::disjunctive, ds.literals, {term}).evaluate(x);
      CHECK(v <= prev);
      prev = v;
    }
  }
}

TEST_CASE("interpolation at sample points, double integrator") {
  const ProblemSpec spec = testing::load_problem("double_integrator.json");
  const CondensedQp qp = condense(spec.problem);
  const MpcLawOracle oracle(qp);
  const auto ds = sample_grid(oracle, spec.domain, {21, 21});
  REQUIRE(check_assumption(ds).empty());
  for (auto kind : {LatticeKind::disjunctive, LatticeKind::conjunctive}) {
    const LatticeForm f = simplify(build_lattice(ds, kind));
    CHECK(f.num_terms() == 3);
    for (const auto& pt : ds.points) CHECK(std::abs(f.evaluate(pt.x) - pt.u_value) <= 1e-9);
  }
}

TEST_CASE("prune_dominated: double integrator reaches the printed structures") {
  const ProblemSpec spec = testing::load_problem("double_integrator.json");
  const CondensedQp qp = condense(spec.problem);
  const MpcLawOracle oracle(qp);
  const auto ds = sample_grid(oracle, spec.domain, {21, 21});
  // literal numbering by value signature: u4 = -1, u5 = +1, u1 through the origin, u2/u3 offsets -/+ 2.6667
  int u[6] = {-1, -1, -1, -1, -1, -1};
  for (int j = 0; j < static_cast<int>(ds.literals.size()); ++j) {
    const auto& l = ds.literals[j];
    if (l.a.norm() < 1e-9) u[l.b > 0 ? 5 : 4] = j;
    else if (std::abs(l.b) < 1e-9) u[1] = j;
    else u[l.b > 0 ? 3 : 2] = j;
  }
  auto sorted = [](IndexList t) {
    std::sort(t.begin(), t.end());
    return t;
  };
  const LatticeForm d = prune_dominated(simplify(build_lattice(ds, LatticeKind::disjunctive)), ds.domain);
  const LatticeForm c = prune_dominated(simplify(build_lattice(ds, LatticeKind::conjunctive)), ds.domain);
  // max{u2, u4, min(u1, u3, u5)} and min{max(u1, u2, u4), u3, u5}
  std::vector<IndexList> want_d{{u[2]}, {u[4]}, sorted({u[1], u[3], u[5]})};
  std::vector<IndexList> want_c{sorted({u[1], u[2], u[4]}), {u[3]}, {u[5]}};
  std::vector<IndexList> got_d = d.terms(), got_c = c.terms();
  std::sort(want_d.begin(), want_d.end());
  std::sort(want_c.begin(), want_c.end());
  std::sort(got_d.begin(), got_d.end());
  std::sort(got_c.begin(), got_c.end());
  CHECK(got_d == want_d);
  CHECK(got_c == want_c);
  const LatticeForm d0 = simplify(build_lattice(ds, LatticeKind::disjunctive));
  CounterRng rng(3, 3);
  for (int i = 0; i < 10000; ++i) {
    const Vector x = rng.uniform_in(ds.domain);
    CHECK(std::abs(d.evaluate(x) - d0.evaluate(x)) <= 1e-12);
  }
}
