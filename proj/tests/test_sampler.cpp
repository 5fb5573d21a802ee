#include <cmath>
#include <limits>

#include "doctest.h"

#include "latmpc/sampler.hpp"
#include "support/test_support.hpp"

using namespace latmpc;

namespace {

// u = -K x law of the double integrator per the printed u_1..u_5
struct PrintedLaw {
  double a1, a2, b;
};
const PrintedLaw kDoubleIntegratorLaws[5] = {
    {-0.8082, -1.1559, 0.0},     // u1
    {0.0, -3.3333, -2.6667},     // u2
    {0.0, -3.3333, 2.6667},      // u3
    {0.0, 0.0, -1.0},            // u4
    {0.0, 0.0, 1.0},             // u5
};

int match_printed(const AffineLaw& law) {
  for (int i = 0; i < 5; ++i) {
    const auto& p = kDoubleIntegratorLaws[i];
    if (std::abs(law.a[0] - p.a1) <= 1e-3 && std::abs(law.a[1] - p.a2) <= 1e-3 && std::abs(law.b - p.b) <= 1e-3)
      return i;
  }
  return -1;
}

MpcProblem unconstrained_scalar() {
  MpcProblem p;
  p.A = Matrix::Constant(1, 1, 0.5);
  p.B = Matrix::Constant(1, 1, 1.0);
  p.Q = Matrix::Constant(1, 1, 1.0);
  p.R = Matrix::Constant(1, 1, 1.0);
  p.P = Matrix::Zero(1, 1);
  p.horizon = 1;
  const double inf = std::numeric_limits<double>::infinity();
  p.x_min = Vector::Constant(1, -inf);
  p.x_max = Vector::Constant(1, inf);
  p.u_min = Vector::Constant(1, -10.0);
  p.u_max = Vector::Constant(1, 10.0);
  return p;
}

void check_dataset_invariants(const SampleDataset& ds, const LawOracle& oracle) {
  for (const auto& pt : ds.points) {
    REQUIRE(pt.law_index >= 0);
    REQUIRE(pt.law_index < static_cast<int>(ds.literals.size()));
    CHECK(std::abs(ds.literals[pt.law_index](pt.x) - pt.u_value) <= 1e-8);
    const auto q = oracle.query(pt.x);
    REQUIRE(q);
    CHECK(std::abs(q->value - pt.u_value) <= 1e-8);
    CHECK(uo_interior(ds.literals, pt.x, pt.u_value));
  }
  for (std::size_t i = 0; i < ds.literals.size(); ++i) {
    for (std::size_t j = i + 1; j < ds.literals.size(); ++j) {
      const double d = (ds.literals[i].a - ds.literals[j].a).cwiseAbs().maxCoeff() +
                       std::abs(ds.literals[i].b - ds.literals[j].b);
      CHECK(d > 1e-6);
    }
  }
}

}  // namespace

TEST_CASE("extract_affine_law: empty active set gives the LQR law u1") {
  const ProblemSpec spec = testing::load_problem("double_integrator.json");
  const CondensedQp qp = condense(spec.problem);
  Vector x(2);
  x << 0.1, -0.05;
  const auto sol = solve_qp(qp, x);
  REQUIRE(sol.status == QpStatus::optimal);
  REQUIRE(sol.active_set.empty());
  const AffineLaw law = extract_affine_law(qp, sol);
  CHECK(match_printed(law) == 0);
  const Matrix lqr = -qp.Hinv_Ft;
  CHECK((*law.full_K - lqr).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(law.k.cwiseAbs().maxCoeff() == 0.0);
  CHECK(std::abs(law(x) - qp.inputs_from_shifted(sol.z, x)[0]) <= 1e-12);
}

TEST_CASE("extract_affine_law: saturated first input gives the constant law u5") {
  const ProblemSpec spec = testing::load_problem("double_integrator.json");
  const CondensedQp qp = condense(spec.problem);
  Vector x(2);
  x << -1.0, -0.3;
  const auto sol = solve_qp(qp, x);
  REQUIRE(sol.status == QpStatus::optimal);
  const AffineLaw law = extract_affine_law(qp, sol);
  CHECK(match_printed(law) == 4);
  CHECK(std::abs(law(x) - 1.0) <= 1e-12);
  // first row of the full map is (a, b)
  CHECK((law.full_K->row(0).transpose() - law.a).norm() == 0.0);
  CHECK(law.k[0] == law.b);
}

TEST_CASE("extract_affine_law: duplicated constraint rows leave the law unchanged") {
  const ProblemSpec spec = testing::load_problem("double_integrator.json");
  const CondensedQp qp = condense(spec.problem);
  Vector x(2);
  x << -1.0, -0.3;
  const auto sol = solve_qp(qp, x);
  REQUIRE(sol.status == QpStatus::optimal);
  REQUIRE(!sol.active_set.empty());
  const AffineLaw law = extract_affine_law(qp, sol);

  CondensedQp dup = qp;
  const int p = qp.num_rows();
  const int extra = sol.active_set.front();
  dup.G.conservativeResize(p + 1, Eigen::NoChange);
  dup.G.row(p) = qp.G.row(extra);
  dup.E.conservativeResize(p + 1, Eigen::NoChange);
  dup.E.row(p) = qp.E.row(extra);
  dup.S.conservativeResize(p + 1, Eigen::NoChange);
  dup.S.row(p) = qp.S.row(extra);
  dup.w.conservativeResize(p + 1);
  dup.w[p] = qp.w[extra];
  const auto sol2 = solve_qp(dup, x);
  REQUIRE(sol2.status == QpStatus::optimal);
  CHECK(sol2.active_set.size() == sol.active_set.size() + 1);
  const AffineLaw law2 = extract_affine_law(dup, sol2);
  CHECK((law2.a - law.a).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(std::abs(law2.b - law.b) <= 1e-12);
}

TEST_CASE("dedup_law: examples") {
  std::vector<AffineLaw> pool;
  AffineLaw plus{Vector::Zero(2), 1.0, std::nullopt, Vector(), {}};
  AffineLaw minus{Vector::Zero(2), -1.0, std::nullopt, Vector(), {}};
  CHECK(dedup_law(pool, plus) == 0);
  CHECK(dedup_law(pool, plus) == 0);
  AffineLaw near = plus;
  near.a[1] += 1e-9;
  CHECK(dedup_law(pool, near) == 0);
  CHECK(dedup_law(pool, minus) == 1);
  CHECK(pool.size() == 2);
}

TEST_CASE("uo_interior: detects ties among pool literals") {
  std::vector<AffineLaw> pool(2);
  pool[0] = {Vector::Constant(1, 1.0), 0.0, std::nullopt, Vector(), {}};
  pool[1] = {Vector::Constant(1, -1.0), 0.0, std::nullopt, Vector(), {}};
  CHECK_FALSE(uo_interior(pool, Vector::Zero(1), 0.0));
  CHECK(uo_interior(pool, Vector::Constant(1, 1e-3), 1e-3));
  CHECK(tie_tolerance(0.5) == 1e-9);
  CHECK(tie_tolerance(-20.0) == doctest::Approx(2e-8));
}

TEST_CASE("sample_grid: unconstrained 1-D problem") {
  const CondensedQp qp = condense(unconstrained_scalar());
  const MpcLawOracle oracle(qp);
  const Box domain(Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
  const auto ds = sample_grid(oracle, domain, {2});
  CHECK(ds.literals.size() == 1);
  CHECK(ds.points.size() == 2);
  check_dataset_invariants(ds, oracle);
}

TEST_CASE("sample_grid: double integrator 21x21 has the five printed laws") {
  const ProblemSpec spec = testing::load_problem("double_integrator.json");
  const CondensedQp qp = condense(spec.problem);
  const MpcLawOracle oracle(qp);
  const auto ds = sample_grid(oracle, spec.domain, {21, 21});
  REQUIRE(ds.literals.size() == 5);
  std::vector<int> seen(5, 0);
  for (const auto& l : ds.literals) {
    const int m = match_printed(l);
    REQUIRE(m >= 0);
    seen[m]++;
  }
  CHECK(seen == std::vector<int>{1, 1, 1, 1, 1});
  CHECK(ds.stats.raw_points == 441);
  CHECK(ds.stats.skipped.empty());
  check_dataset_invariants(ds, oracle);
}

TEST_CASE("sample_grid: double integrator perturbation count near the printed 68") {
  const ProblemSpec spec = testing::load_problem("double_integrator.json");
  const CondensedQp qp = condense(spec.problem);
  const MpcLawOracle oracle(qp);
  const auto ds = sample_grid(oracle, spec.domain, {21, 21});
  MESSAGE("perturbed points: " << ds.stats.perturbed);
  CHECK(std::abs(ds.stats.perturbed - 68) <= 10);
}

TEST_CASE("sample_grid: deterministic and independent of worker count") {
  const ProblemSpec spec = testing::load_problem("double_integrator.json");
  const CondensedQp qp = condense(spec.problem);
  const MpcLawOracle oracle(qp);
  const auto a = sample_grid(oracle, spec.domain, {15, 15});
  const auto b = sample_grid(oracle, spec.domain, {15, 15});
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK((a.points[i].x - b.points[i].x).norm() == 0.0);
    CHECK(a.points[i].law_index == b.points[i].law_index);
  }
}

TEST_CASE("sample_grid: pendulum 8^4 grid yields 13 literals") {
  const ProblemSpec spec = testing::load_problem("pendulum.json");
  const CondensedQp qp = condense(spec.problem);
  const MpcLawOracle oracle(qp);
  const auto ds = sample_grid(oracle, spec.domain, {8, 8, 8, 8});
  CHECK(ds.literals.size() == 13);
  CHECK(ds.stats.raw_points == 4096);
  CHECK(ds.stats.infeasible + static_cast<int>(ds.points.size()) + static_cast<int>(ds.stats.skipped.size()) == 4096);
  check_dataset_invariants(ds, oracle);
}

TEST_CASE("sample_trajectories: origin stays put") {
  const ProblemSpec spec = testing::load_problem("double_integrator.json");
  const CondensedQp qp = condense(spec.problem);
  const MpcLawOracle oracle(qp);
  const Box origin(Vector::Zero(2), Vector::Zero(2));
  const auto ds = sample_trajectories(oracle, spec.problem.A, spec.problem.B, origin, 1, 5);
  CHECK(ds.literals.size() == 1);
  CHECK(match_printed(ds.literals[0]) == 0);
  CHECK(ds.points.size() == 6);
  for (const auto& pt : ds.points) CHECK(pt.x.norm() == 0.0);
}

TEST_CASE("sample_trajectories: states follow the closed loop") {
  const ProblemSpec spec = testing::load_problem("double_integrator.json");
  const CondensedQp qp = condense(spec.problem);
  const MpcLawOracle oracle(qp);
  SamplerOptions opt;
  opt.seed = 3;
  const auto ds = sample_trajectories(oracle, spec.problem.A, spec.problem.B, spec.domain, 4, 10, opt);
  CHECK(ds.points.size() == 44);
  check_dataset_invariants(ds, oracle);
  const auto again = sample_trajectories(oracle, spec.problem.A, spec.problem.B, spec.domain, 4, 10, opt);
  REQUIRE(again.points.size() == ds.points.size());
  for (std::size_t i = 0; i < ds.points.size(); ++i) CHECK((again.points[i].x - ds.points[i].x).norm() == 0.0);
}

TEST_CASE("sample_trajectories: chain pool from 50 runs is a subset of the 300-run pool") {
  const ProblemSpec spec = testing::load_problem("chain10.json");
  const CondensedQp qp = condense(spec.problem);
  const MpcLawOracle oracle(qp);
  const auto small = sample_trajectories(oracle, spec.problem.A, spec.problem.B, spec.domain, 50, 25);
  const auto large = sample_trajectories(oracle, spec.problem.A, spec.problem.B, spec.domain, 300, 25);
  std::vector<AffineLaw> pool = large.literals;
  for (const auto& l : small.literals) CHECK(dedup_law(pool, l) < static_cast<int>(large.literals.size()));
  CHECK(std::abs(static_cast<double>(large.points.size()) - 7802.0) <= 0.2 * 7802.0);
}
