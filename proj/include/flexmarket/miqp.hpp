#pragma once

#include <vector>

#include "flexmarket/qp.hpp"

namespace flexmarket {

/// A nonnegative split P = P⁺ − P⁻ gated by one binary: z = 1 allows P⁺, z = 0 allows P⁻.
struct SplitPair {
  Index binary;
  Index plus;
  Index minus;
};

/// QuadraticProgram with designated binaries. `bigm_rows` are the gating rows
/// (P⁺ − P̄·z ≤ 0 and P⁻ + |P̲|·z ≤ |P̲|); `pairs` lists the gated splits and is
/// used for the rounding heuristic and the exactness check.
struct MixedIntegerQp {
  QuadraticProgram base;
  std::vector<Index> binary_vars;
  std::vector<Index> bigm_rows;
  std::vector<SplitPair> pairs;

  /// Throws kValidation when a binary index is out of range, a binary has bounds
  /// outside [0, 1], or a big-M row does not reference exactly one binary.
  void validate() const;
};

enum class MiqpStatus { kOptimal, kInfeasible, kNodeLimit };

const char* to_string(MiqpStatus status);

/// One processed node, recorded when MiqpSettings::node_log is set.
struct NodeRecord {
  int id;
  int parent;  // -1 for the root
  int depth;
  double relaxation;  // node QP objective, -inf when not certified
  double bound;       // max(parent bound, relaxation)
};

struct MiqpSettings {
  QpSettings qp;
  int node_limit = 5000;
  /// Relative gap: (incumbent − bound) / max(1, |incumbent|).
  double gap_tol = 1e-6;
  bool heuristic = true;
  /// Passes of 1-flip local search on the incumbent when the node limit is hit.
  int local_search_passes = 1;
  std::vector<NodeRecord>* node_log = nullptr;
};

struct MiqpResult {
  QpSolution solution;
  std::vector<int> assignment;  // aligned with binary_vars
  MiqpStatus status = MiqpStatus::kInfeasible;
  double bound = -kInf;
  double gap = kInf;
  /// False when the node limit stopped the search before the gap closed.
  bool gap_closed = false;
  int nodes = 0;
};

/// Best-bound branch and bound on the most fractional binary. Every incumbent
/// comes from a leaf QP with all binaries fixed, so gated splits are exactly
/// complementary. Throws kNodeLimit if the limit is hit with no incumbent.
MiqpResult solve_miqp(const MixedIntegerQp& miqp, const MiqpSettings& settings = {});

/// The base problem with every binary fixed to `assignment` (aligned with binary_vars).
QuadraticProgram fix_binaries(const MixedIntegerQp& miqp, const std::vector<int>& assignment);

/// Largest min(P⁺, P⁻) over the pairs at `x`.
double bigm_violation(const MixedIntegerQp& miqp, const Eigen::VectorXd& x);

}  // namespace flexmarket
