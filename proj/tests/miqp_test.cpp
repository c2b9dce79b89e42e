#include <gtest/gtest.h>

#include <map>
#include <random>

#include "flexmarket/error.hpp"
#include "flexmarket/miqp.hpp"

namespace flexmarket {
namespace {

// Storage-like toy: per step P = P⁺ − P⁻ gated by z, a flexibility δ rewarded
// linearly and tied to P⁺ + P⁻, plus a random convex cost on P. The δ reward
// makes simultaneous P⁺ and P⁻ attractive, so the big-M rows matter.
MixedIntegerQp random_storage(std::mt19937_64& rng, int binaries) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  QpBuilder b;
  MixedIntegerQp m;
  std::vector<Index> powers;
  const double cap = 2.0 + 4.0 * u(rng);
  double soc = cap * (0.2 + 0.6 * u(rng));
  std::vector<Term> energy;
  for (int k = 0; k < binaries; ++k) {
    const double hi = 1.0 + 4.0 * u(rng);
    const double lo = -(1.0 + 4.0 * u(rng));
    const Index p = b.add_variable(lo, hi);
    const Index pp = b.add_variable(0.0, hi);
    const Index pm = b.add_variable(0.0, -lo);
    const Index z = b.add_variable(0.0, 1.0);
    const Index d = b.add_variable(0.0, kInf);
    b.add_row({{p, 1.0}, {pp, -1.0}, {pm, 1.0}}, RowSense::kEqual, 0.0);
    m.bigm_rows.push_back(b.add_row({{pp, 1.0}, {z, -hi}}, RowSense::kLessEqual, 0.0));
    m.bigm_rows.push_back(b.add_row({{pm, 1.0}, {z, -lo}}, RowSense::kLessEqual, -lo));
    b.add_row({{d, 1.0}, {pp, -0.5}, {pm, -0.5}}, RowSense::kLessEqual, 0.0);
    b.add_row({{p, 1.0}, {d, -1.0}}, RowSense::kGreaterEqual, lo);
    b.add_row({{p, 1.0}, {d, 1.0}}, RowSense::kLessEqual, hi);
    b.add_linear(d, -1.0);
    b.add_squared({{p, 1.0}}, -(lo + (hi - lo) * u(rng)), 0.05 + 0.3 * u(rng));
    energy.push_back({p, 1.0});
    b.add_row(energy, RowSense::kLessEqual, soc);
    b.add_row(energy, RowSense::kGreaterEqual, soc - cap);
    m.binary_vars.push_back(z);
    m.pairs.push_back({z, pp, pm});
    powers.push_back(p);
  }
  std::vector<Term> total;
  for (Index p : powers) total.push_back({p, 1.0});
  b.add_squared(total, 0.0, 0.02);
  m.base = b.build();
  return m;
}

struct Enumerated {
  double objective = kInf;
  std::vector<int> assignment;
};

// Oracle: every assignment solved as an independent QP.
Enumerated enumerate(const MixedIntegerQp& m) {
  Enumerated best;
  const std::size_t nb = m.binary_vars.size();
  for (unsigned mask = 0; mask < (1u << nb); ++mask) {
    QuadraticProgram qp = m.base;
    std::vector<int> a(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      a[b] = (mask >> b) & 1u;
      qp.lower[m.binary_vars[b]] = qp.upper[m.binary_vars[b]] = a[b];
    }
    const QpSolution s = solve_qp(qp);
    if (s.status == QpStatus::kOptimal && s.objective < best.objective) {
      best.objective = s.objective;
      best.assignment = a;
    }
  }
  return best;
}

TEST(Miqp, TwoBinaryToyMatchesEnumeration) {
  std::mt19937_64 rng(11);
  const MixedIntegerQp m = random_storage(rng, 2);
  const Enumerated oracle = enumerate(m);
  const MiqpResult r = solve_miqp(m);
  ASSERT_EQ(r.status, MiqpStatus::kOptimal);
  EXPECT_NEAR(r.solution.objective, oracle.objective, 1e-6 * std::max(1.0, std::abs(oracle.objective)));
  EXPECT_LE(bigm_violation(m, r.solution.x), 1e-7);
}

TEST(Miqp, IntegralRelaxationEqualsQp) {
  // Cost pushes P positive; z is free but the relaxation already has z = 1.
  QpBuilder b;
  MixedIntegerQp m;
  const Index p = b.add_variable(-2.0, 2.0);
  const Index pp = b.add_variable(0.0, 2.0);
  const Index pm = b.add_variable(0.0, 2.0);
  const Index z = b.add_variable(0.0, 1.0);
  b.add_row({{p, 1.0}, {pp, -1.0}, {pm, 1.0}}, RowSense::kEqual, 0.0);
  m.bigm_rows.push_back(b.add_row({{pp, 1.0}, {z, -2.0}}, RowSense::kLessEqual, 0.0));
  m.bigm_rows.push_back(b.add_row({{pm, 1.0}, {z, 2.0}}, RowSense::kLessEqual, 2.0));
  b.add_squared({{p, 1.0}}, -1.0, 1.0);
  b.add_linear(z, -1.0);
  m.base = b.build();
  m.binary_vars = {z};
  m.pairs = {{z, pp, pm}};
  const QpSolution relaxed = solve_qp(m.base);
  ASSERT_EQ(relaxed.status, QpStatus::kOptimal);
  ASSERT_NEAR(relaxed.x[z], 1.0, 1e-6);
  const MiqpResult r = solve_miqp(m);
  ASSERT_EQ(r.status, MiqpStatus::kOptimal);
  EXPECT_NEAR(r.solution.objective, relaxed.objective, 1e-6);
  EXPECT_NEAR(r.solution.x[p], relaxed.x[p], 1e-6);
  EXPECT_EQ(r.assignment, std::vector<int>{1});
}

TEST(Miqp, ContradictoryBoundsAreInfeasible) {
  QpBuilder b;
  MixedIntegerQp m;
  const Index x = b.add_variable(0.0, 1.0);
  const Index z = b.add_variable(0.0, 1.0);
  b.add_quadratic(x, x, 1.0);
  m.bigm_rows.push_back(b.add_row({{x, 1.0}, {z, -1.0}}, RowSense::kLessEqual, 0.0));
  b.add_row({{z, 1.0}}, RowSense::kGreaterEqual, 1.0);
  b.add_row({{z, 1.0}}, RowSense::kLessEqual, 0.0);
  m.base = b.build();
  m.binary_vars = {z};
  const MiqpResult r = solve_miqp(m);
  EXPECT_EQ(r.status, MiqpStatus::kInfeasible);
}

TEST(Miqp, ValidationRejectsBadBigMRow) {
  QpBuilder b;
  MixedIntegerQp m;
  const Index x = b.add_variable(0.0, 1.0);
  b.add_variable(0.0, 1.0);
  m.bigm_rows.push_back(b.add_row({{x, 1.0}}, RowSense::kLessEqual, 0.0));
  m.base = b.build();
  m.binary_vars = {1};
  try {
    solve_miqp(m);
    FAIL() << "expected validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kValidation);
  }
}

TEST(Miqp, NodeLimitReturnsIncumbentWithGapFlag) {
  std::mt19937_64 rng(5);
  const MixedIntegerQp m = random_storage(rng, 8);
  MiqpSettings s;
  s.node_limit = 1;
  const MiqpResult r = solve_miqp(m, s);
  EXPECT_EQ(r.nodes, 1);
  ASSERT_TRUE(r.status == MiqpStatus::kNodeLimit || r.status == MiqpStatus::kOptimal);
  EXPECT_EQ(r.status == MiqpStatus::kOptimal, r.gap_closed);
  EXPECT_LE(r.bound, r.solution.objective + 1e-9);
  EXPECT_LE(bigm_violation(m, r.solution.x), 1e-7);
}

TEST(MiqpProperty, RandomInstancesMatchEnumeration) {
  std::mt19937_64 rng(424242);
  for (int trial = 0; trial < 24; ++trial) {
    const int nb = 1 + trial % 12;
    const MixedIntegerQp m = random_storage(rng, nb);
    const Enumerated oracle = enumerate(m);
    MiqpSettings s;
    const MiqpResult r = solve_miqp(m, s);
    ASSERT_EQ(r.status, MiqpStatus::kOptimal) << "trial " << trial;
    EXPECT_LE(std::abs(r.solution.objective - oracle.objective),
              s.gap_tol * std::max(1.0, std::abs(oracle.objective)) + 1e-9)
        << "trial " << trial << " binaries " << nb;
    EXPECT_LE(bigm_violation(m, r.solution.x), 1e-7) << "trial " << trial;
    EXPECT_TRUE(check_kkt(fix_binaries(m, r.assignment), r.solution, 1e-6).pass);
  }
}

TEST(MiqpProperty, BoundsAreMonotoneDownEveryBranch) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const MixedIntegerQp m = random_storage(rng, 6 + trial % 5);
    std::vector<NodeRecord> log;
    MiqpSettings s;
    s.node_log = &log;
    solve_miqp(m, s);
    std::map<int, NodeRecord> by_id;
    for (const NodeRecord& n : log) by_id[n.id] = n;
    for (const NodeRecord& n : log) {
      if (n.parent < 0) continue;
      const NodeRecord& p = by_id.at(n.parent);
      EXPECT_GE(n.bound, p.bound);
      // Relaxations tighten as binaries get fixed, up to solver tolerance.
      if (std::isfinite(n.relaxation) && std::isfinite(p.relaxation))
        EXPECT_GE(n.relaxation, p.relaxation - 1e-5 * std::max(1.0, std::abs(p.relaxation)));
    }
  }
}

}  // namespace
}  // namespace flexmarket
