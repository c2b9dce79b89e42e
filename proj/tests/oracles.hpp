#pragma once

// Brute-force references shared by the unit tests and the acceptance binary.

#include <cmath>
#include <vector>

#include "flexmarket/operator.hpp"

namespace flexmarket::oracle {

struct Prices {
  double mu = 0.0;
  double mu_tilde = 0.0;
};

inline double total_response(const AggregateFlex& agg, double s) {
  double total = 0.0;
  for (const MemberFlex& m : agg.members) total += best_response(m.gamma, m.p0, m.p_hi, 0.0, s).p_star;
  return total;
}

// Bisection on the summed best responses for s = μ + μ̃, then budget balance
// μ̃(P̃ − P⁰) + μP̃ = πP̃ for the split. Requires P⁰ < P̃ < saturation point.
inline Prices prices_by_root_finding(const AggregateFlex& agg, double p_tilde, double pi) {
  double lo = 0.0, hi = 1.0;
  while (total_response(agg, hi) < p_tilde && hi < 1e12) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (total_response(agg, mid) < p_tilde ? lo : hi) = mid;
  }
  const double s = 0.5 * (lo + hi);
  const double dp = p_tilde - agg.p0_t;
  // μ̃·dp + (s − μ̃)·P̃ = π·P̃
  const double mu_tilde = p_tilde * (pi - s) / (dp - p_tilde);
  return {s - mu_tilde, mu_tilde};
}

// Maximum of the CMA welfare over an n-point grid of [p0, p_hi].
inline double grid_best_welfare(double gamma, double p0, double p_hi, double mu, double mu_tilde, int n) {
  double best = -INFINITY;
  for (int i = 0; i < n; ++i) {
    const double p = n == 1 ? p0 : p0 + (p_hi - p0) * i / (n - 1);
    best = std::max(best, cma_welfare(gamma, p0, p, mu, mu_tilde));
  }
  return best;
}

// Exhaustive enumeration of binary assignments, each leaf solved as a QP.
inline double enumerate_leaves(const MixedIntegerQp& m, QpSolution* best_solution = nullptr) {
  const std::size_t nb = m.binary_vars.size();
  double best = INFINITY;
  for (unsigned mask = 0; mask < (1u << nb); ++mask) {
    std::vector<int> a(nb);
    bool allowed = true;
    for (std::size_t b = 0; b < nb; ++b) {
      a[b] = (mask >> b) & 1u;
      const Index j = m.binary_vars[b];
      if (a[b] < m.base.lower[j] || a[b] > m.base.upper[j]) allowed = false;
    }
    if (!allowed) continue;
    const QpSolution s = solve_qp(fix_binaries(m, a));
    if (s.status == QpStatus::kOptimal && s.objective < best) {
      best = s.objective;
      if (best_solution) *best_solution = s;
    }
  }
  return best;
}

}  // namespace flexmarket::oracle
