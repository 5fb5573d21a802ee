#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "latmpc/refinement.hpp"
#include "latmpc/verification.hpp"
#include "support/test_support.hpp"

using namespace latmpc;

namespace {

struct DoubleIntegratorFixture {
  ProblemSpec spec = testing::load_problem("double_integrator.json");
  CondensedQp qp = condense(spec.problem);
  MpcLawOracle oracle{qp};
  SampleDataset ds = sample_grid(oracle, spec.domain, {21, 21});
  LatticeForm d = simplify(build_lattice(ds, LatticeKind::disjunctive));
  LatticeForm c = simplify(build_lattice(ds, LatticeKind::conjunctive));
};

std::vector<AffineLaw> example1_literals() {
  std::vector<AffineLaw> pool;
  const auto oracle = testing::example1_oracle();
  for (const auto& p : oracle.pieces())
    pool.push_back({Vector::Constant(1, p.slope), p.offset, std::nullopt, Vector(), {}});
  return pool;
}

// max over the conjunctive term minus min over the disjunctive term
double pair_objective(const std::vector<AffineLaw>& lits, const IndexList& tc, const IndexList& td, const Vector& x) {
  double hi = -1e300, lo = 1e300;
  for (int j : tc) hi = std::max(hi, lits[j](x));
  for (int j : td) lo = std::min(lo, lits[j](x));
  return hi - lo;
}

LatticeForm without_literal(const LatticeForm& f, int j) {
  std::vector<IndexList> terms;
  for (auto t : f.terms()) {
    t.erase(std::remove(t.begin(), t.end(), j), t.end());
    if (!t.empty()) terms.push_back(t);
  }
  return LatticeForm(f.kind(), f.literals(), terms);
}

}  // namespace

TEST_CASE("lp_scan: double integrator forms are pairwise nonnegative") {
  DoubleIntegratorFixture f;
  const auto rep = lp_scan(f.c, f.d, f.spec.domain);
  CHECK(rep.pairs_checked == f.c.num_terms() * f.d.num_terms());
  CHECK(rep.min_objective >= -1e-9);
  CHECK(rep.witnesses.empty());
}

TEST_CASE("lp_scan: shared literal gives a nonnegative objective") {
  const auto lits = example1_literals();
  const LatticeForm c(LatticeKind::conjunctive, lits, {{0, 2}});
  const LatticeForm d(LatticeKind::disjunctive, lits, {{0, 4}});
  const auto rep = lp_scan(c, d, testing::example1_oracle().domain());
  CHECK(rep.pairs_checked == 1);
  CHECK(rep.min_objective >= -1e-9);
}

TEST_CASE("lp_scan: Example 1 with l2 deleted has a negative pair on [1, 1.5]") {
  const auto oracle = testing::example1_oracle();
  auto ds = testing::dataset_at(oracle, oracle.domain(), {0.5, 2.4, 3.75, 4.5});
  REQUIRE(refine_until_valid(oracle, ds).converged);
  const int l2 = testing::literal_index(ds.literals, 2.0, -1.0);
  REQUIRE(l2 >= 0);
  const LatticeForm c = without_literal(simplify(build_lattice(ds, LatticeKind::conjunctive)), l2);
  const LatticeForm d = without_literal(simplify(build_lattice(ds, LatticeKind::disjunctive)), l2);
  const auto rep = lp_scan(c, d, ds.domain);
  CHECK(rep.min_objective < -1e-9);
  REQUIRE(!rep.witnesses.empty());
  bool negative_on_band = false;
  for (const auto& w : rep.witnesses) {
    CHECK(w.objective < -1e-9);
    CHECK(ds.domain.contains(w.x, 1e-12));
    const auto& tc = c.terms()[w.term_c];
    const auto& td = d.terms()[w.term_d];
    CHECK(std::abs(pair_objective(ds.literals, tc, td, w.x) - w.objective) <= 1e-9);
    // grid oracle: the LP optimum is a vertex, the band check looks at the pair on [1, 1.5]
    bool band = false;
    for (int g = 0; g <= 50; ++g) {
      const Vector x = Vector::Constant(1, 1.0 + 0.01 * g);
      const double v = pair_objective(ds.literals, tc, td, x);
      CHECK(v >= w.objective - 1e-9);
      band = band || v < -1e-9;
    }
    negative_on_band = negative_on_band || band;
  }
  CHECK(negative_on_band);
}

TEST_CASE("hoeffding_confidence: closed form") {
  const double c = hoeffding_confidence(5000000, 1e-3);
  CHECK(std::abs(c - (1.0 - 2.0 * std::exp(-10.0))) <= 1e-15);
  CHECK(c > 0.9999);
  CHECK(std::abs(hoeffding_confidence(100000, 5e-3) - (1.0 - 2.0 * std::exp(-5.0))) <= 1e-15);
}

TEST_CASE("hoeffding_validate: identical forms") {
  DoubleIntegratorFixture f;
  for (std::uint64_t seed : {1u, 17u}) {
    const auto rep = hoeffding_validate(f.d, f.d, f.spec.domain, 20000, 5e-3, seed);
    CHECK(rep.I_bar == 1.0);
    CHECK(rep.mismatch_count == 0);
    CHECK(rep.seed == seed);
    CHECK(std::abs(rep.confidence - hoeffding_confidence(20000, 5e-3)) <= 1e-15);
  }
}

TEST_CASE("hoeffding_validate: Example 1 printed forms deviate") {
  const auto lits = example1_literals();
  const LatticeForm d(LatticeKind::disjunctive, lits, {{0, 2, 3, 4}, {1, 2, 3}, {0, 1, 2, 4}});
  const LatticeForm c(LatticeKind::conjunctive, lits, {{0, 1}, {0, 2, 4}, {3, 4}});
  const Box dom = testing::example1_oracle().domain();
  const auto rep = hoeffding_validate(d, c, dom, 20000, 1e-2, 5);
  CHECK(rep.I_bar < 1.0);
  CHECK(rep.mismatch_count > 0);
  CHECK(rep.I_bar == doctest::Approx(static_cast<double>(rep.N_v - rep.mismatch_count) / rep.N_v));
  CHECK(rep.mismatches.size() == static_cast<std::size_t>(std::min<long long>(rep.mismatch_count, 1000)));
  for (const auto& m : rep.mismatches) {
    CHECK(std::abs(d.evaluate(m.x) - c.evaluate(m.x)) > 1e-9);
    CHECK(m.f_d == d.evaluate(m.x));
    CHECK(m.f_c == c.evaluate(m.x));
  }
}

TEST_CASE("hoeffding_validate: deterministic and filtered") {
  DoubleIntegratorFixture f;
  const auto a = hoeffding_validate(f.d, f.c, f.spec.domain, 5000, 5e-3, 3);
  const auto b = hoeffding_validate(f.d, f.c, f.spec.domain, 5000, 5e-3, 3);
  CHECK(a.I_bar == b.I_bar);
  CHECK(a.ordering_violations == 0);
  const auto half = hoeffding_validate(f.d, f.c, f.spec.domain, 5000, 5e-3, 3, 1e-9,
                                       [](const Vector& x) { return x[0] > 0.0; });
  CHECK(half.N_v == 5000);
  CHECK(half.I_bar == 1.0);
}

TEST_CASE("sandwich_check: double integrator forms equal u*") {
  DoubleIntegratorFixture f;
  const auto rep = sandwich_check(f.d, f.c, f.oracle, f.spec.domain, 10000, 1);
  CHECK(rep.checked == 10000);
  CHECK(rep.max_lower_violation <= 1e-7);
  CHECK(rep.max_upper_violation <= 1e-7);
  CHECK(rep.epsilon_hat <= 1e-9);
  // both forms match the QP wherever they agree with each other
  CHECK(rep.max_abs_error <= 1e-7);
}

TEST_CASE("sandwich_check: Example 1 printed forms bound u* with a gap") {
  const auto oracle = testing::example1_oracle();
  const auto lits = example1_literals();
  const LatticeForm d(LatticeKind::disjunctive, lits, {{0, 2, 3, 4}, {1, 2, 3}, {0, 1, 2, 4}});
  const LatticeForm c(LatticeKind::conjunctive, lits, {{0, 1}, {0, 2, 4}, {3, 4}});
  const auto rep = sandwich_check(d, c, oracle, oracle.domain(), 5000, 2);
  CHECK(rep.max_lower_violation <= 1e-12);
  CHECK(rep.max_upper_violation <= 1e-12);
  CHECK(rep.epsilon_hat > 0.0);
}

TEST_CASE("sandwich_check: single literal is exact") {
  const testing::PwaOracle1D line({{0.0, 1.0, 3.0, -1.0}});
  std::vector<AffineLaw> pool{{Vector::Constant(1, 3.0), -1.0, std::nullopt, Vector(), {}}};
  const LatticeForm d(LatticeKind::disjunctive, pool, {{0}});
  const LatticeForm c(LatticeKind::conjunctive, pool, {{0}});
  const auto rep = sandwich_check(d, c, line, line.domain(), 1000, 3);
  CHECK(rep.max_abs_error == 0.0);
  CHECK(rep.epsilon_hat == 0.0);
}

TEST_CASE("ordering after a clean scan, Example 1 refined") {
  const auto oracle = testing::example1_oracle();
  auto ds = testing::dataset_at(oracle, oracle.domain(), {0.5, 2.4, 3.75, 4.5});
  REQUIRE(refine_until_valid(oracle, ds).converged);
  const LatticeForm c = simplify(build_lattice(ds, LatticeKind::conjunctive));
  const LatticeForm d = simplify(build_lattice(ds, LatticeKind::disjunctive));
  REQUIRE(lp_scan(c, d, ds.domain).witnesses.empty());
  const auto rep = hoeffding_validate(d, c, ds.domain, 20000, 1e-2, 9);
  CHECK(rep.ordering_violations == 0);
}
