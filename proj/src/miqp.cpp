#include "flexmarket/miqp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <queue>

#include "flexmarket/error.hpp"

namespace flexmarket {

void MixedIntegerQp::validate() const {
  const Index n = base.num_vars();
  std::vector<Diagnostic> diags;
  std::vector<char> is_binary(static_cast<std::size_t>(n), 0);
  for (std::size_t b = 0; b < binary_vars.size(); ++b) {
    const Index j = binary_vars[b];
    if (j < 0 || j >= n) {
      diags.push_back({"binary_vars[" + std::to_string(b) + "]", "index out of range"});
      continue;
    }
    is_binary[j] = 1;
    if (base.lower[j] < 0.0 || base.upper[j] > 1.0)
      diags.push_back({base.var_name(j), "binary bounds must lie within [0, 1]"});
  }
  const Eigen::SparseMatrix<double, Eigen::RowMajor> rows = base.rows;
  for (std::size_t k = 0; k < bigm_rows.size(); ++k) {
    const Index r = bigm_rows[k];
    if (r < 0 || r >= base.num_rows()) {
      diags.push_back({"bigm_rows[" + std::to_string(k) + "]", "index out of range"});
      continue;
    }
    int count = 0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows, r); it; ++it)
      if (is_binary[it.col()] && it.value() != 0.0) ++count;
    if (count != 1) diags.push_back({base.row_name(r), "big-M row must reference exactly one binary"});
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const SplitPair& p = pairs[k];
    if (p.binary < 0 || p.binary >= n || !is_binary[p.binary] || p.plus < 0 || p.plus >= n || p.minus < 0 ||
        p.minus >= n)
      diags.push_back({"pairs[" + std::to_string(k) + "]", "invalid split pair"});
  }
  if (!diags.empty()) throw Error(ErrorKind::kValidation, "invalid mixed-integer program", std::move(diags));
}

const char* to_string(MiqpStatus status) {
  switch (status) {
    case MiqpStatus::kOptimal: return "optimal";
    case MiqpStatus::kInfeasible: return "infeasible";
    case MiqpStatus::kNodeLimit: return "node-limit";
  }
  return "unknown";
}

QuadraticProgram fix_binaries(const MixedIntegerQp& miqp, const std::vector<int>& assignment) {
  require(assignment.size() == miqp.binary_vars.size(), ErrorKind::kDimension,
          "assignment length must match the binary count");
  QuadraticProgram qp = miqp.base;
  for (std::size_t b = 0; b < assignment.size(); ++b) {
    const Index j = miqp.binary_vars[b];
    qp.lower[j] = qp.upper[j] = assignment[b] != 0 ? 1.0 : 0.0;
  }
  return qp;
}

double bigm_violation(const MixedIntegerQp& miqp, const Eigen::VectorXd& x) {
  double worst = 0.0;
  for (const SplitPair& p : miqp.pairs) worst = std::max(worst, std::min(x[p.plus], x[p.minus]));
  return worst;
}

namespace {

struct Node {
  std::vector<signed char> fixed;  // -1 free, else 0/1
  double bound;
  int depth;
  int seq;
  int parent;
  std::shared_ptr<const QpSolution> warm;
};

struct WorseNode {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.seq > b.seq;
  }
};

class BranchAndBound {
 public:
  BranchAndBound(const MixedIntegerQp& miqp, const MiqpSettings& settings)
      : miqp_(miqp), settings_(settings), work_(miqp.base) {
    qp_settings_ = settings.qp;
    qp_settings_.skip_validation = true;
    plus_of_.assign(miqp.binary_vars.size(), -1);
    minus_of_.assign(miqp.binary_vars.size(), -1);
    for (const SplitPair& p : miqp.pairs)
      for (std::size_t b = 0; b < miqp.binary_vars.size(); ++b)
        if (miqp.binary_vars[b] == p.binary) {
          plus_of_[b] = p.plus;
          minus_of_[b] = p.minus;
        }
  }

  MiqpResult run() {
    const std::size_t nb = miqp_.binary_vars.size();
    std::priority_queue<Node, std::vector<Node>, WorseNode> open;
    std::shared_ptr<const QpSolution> root_warm;
    if (settings_.qp.warm_start) root_warm = std::make_shared<QpSolution>(*settings_.qp.warm_start);
    open.push(Node{std::vector<signed char>(nb, -1), -kInf, 0, seq_++, -1, root_warm});
    MiqpResult result;
    bool limit_hit = false;
    while (!open.empty()) {
      const Node node = open.top();
      if (node.bound >= cutoff()) break;
      if (result.nodes >= settings_.node_limit) {
        limit_hit = true;
        break;
      }
      open.pop();
      const int id = result.nodes++;

      for (std::size_t b = 0; b < nb; ++b) {
        const Index j = miqp_.binary_vars[b];
        if (node.fixed[b] < 0) {
          work_.lower[j] = miqp_.base.lower[j];
          work_.upper[j] = miqp_.base.upper[j];
        } else {
          work_.lower[j] = work_.upper[j] = node.fixed[b];
        }
      }
      QpSettings s = qp_settings_;
      s.warm_start = node.warm.get();
      auto sol = std::make_shared<QpSolution>(solve_qp(work_, s));
      if (sol->status == QpStatus::kInfeasible) {
        log(id, node, kInf, kInf);
        continue;
      }
      const double relaxation = sol->status == QpStatus::kOptimal ? sol->objective : -kInf;
      const double bound = std::max(node.bound, relaxation);
      log(id, node, relaxation, bound);
      if (bound >= cutoff()) continue;

      // Candidate leaves: plain rounding and the split-direction heuristic.
      std::vector<int> rounded(nb), heuristic(nb);
      int branch = -1;
      double best_frac = -1.0;
      for (std::size_t b = 0; b < nb; ++b) {
        const double z = sol->x[miqp_.binary_vars[b]];
        rounded[b] = node.fixed[b] >= 0 ? node.fixed[b] : (z >= 0.5 ? 1 : 0);
        heuristic[b] = rounded[b];
        if (node.fixed[b] < 0 && plus_of_[b] >= 0) {
          const double p = sol->x[plus_of_[b]], m = sol->x[minus_of_[b]];
          if (std::max(p, m) > 1e-9) heuristic[b] = p >= m ? 1 : 0;
        }
        if (node.fixed[b] < 0) {
          const double frac = std::min(std::abs(z), std::abs(1.0 - z));
          if (frac > best_frac + 1e-12) {
            best_frac = frac;
            branch = static_cast<int>(b);
          }
        }
      }
      if (branch < 0) {
        try_leaf(rounded);
        continue;
      }
      if (best_frac <= 1e-6) {
        const double leaf = try_leaf(rounded);
        if (leaf - bound <= gap_abs(leaf)) continue;
      }
      if (settings_.heuristic) try_leaf(heuristic);

      for (int v = 0; v <= 1; ++v) {
        Node child{node.fixed, bound, node.depth + 1, seq_++, id, sol};
        child.fixed[branch] = static_cast<signed char>(v);
        open.push(std::move(child));
      }
    }

    if (incumbent_ && limit_hit) improve_incumbent();
    if (!incumbent_) {
      if (limit_hit) fail(ErrorKind::kNodeLimit, "node limit reached without an integer-feasible solution");
      result.status = MiqpStatus::kInfeasible;
      result.solution.status = QpStatus::kInfeasible;
      result.solution.objective = kInf;
      return result;
    }
    result.solution = *incumbent_;
    result.assignment = incumbent_assignment_;
    const double inc = incumbent_->objective;
    result.bound = open.empty() ? inc : std::min(inc, open.top().bound);
    result.gap = std::max(0.0, inc - result.bound) / std::max(1.0, std::abs(inc));
    result.gap_closed = !limit_hit || result.gap <= settings_.gap_tol;
    result.status = result.gap_closed ? MiqpStatus::kOptimal : MiqpStatus::kNodeLimit;
    return result;
  }

 private:
  double gap_abs(double value) const { return settings_.gap_tol * std::max(1.0, std::abs(value)); }
  double cutoff() const { return incumbent_ ? incumbent_->objective - gap_abs(incumbent_->objective) : kInf; }

  void log(int id, const Node& node, double relaxation, double bound) {
    if (settings_.node_log) settings_.node_log->push_back({id, node.parent, node.depth, relaxation, bound});
  }

  double try_leaf(const std::vector<int>& assignment, const QpSolution* warm = nullptr) {
    auto it = leaves_.find(assignment);
    if (it != leaves_.end()) return it->second;
    const QuadraticProgram leaf = fix_binaries(miqp_, assignment);
    QpSettings s = qp_settings_;
    s.warm_start = warm;
    const QpSolution sol = solve_qp(leaf, s);
    const double value = sol.status == QpStatus::kOptimal ? sol.objective : kInf;
    leaves_.emplace(assignment, value);
    if (sol.status == QpStatus::kOptimal && (!incumbent_ || value < incumbent_->objective)) {
      incumbent_ = sol;
      incumbent_assignment_ = assignment;
    }
    return value;
  }

  // First-improvement 1-flip descent over the free binaries of the incumbent.
  void improve_incumbent() {
    for (int pass = 0; pass < settings_.local_search_passes; ++pass) {
      bool improved = false;
      for (std::size_t b = 0; b < miqp_.binary_vars.size(); ++b) {
        const Index j = miqp_.binary_vars[b];
        if (miqp_.base.lower[j] == miqp_.base.upper[j]) continue;
        std::vector<int> flipped = incumbent_assignment_;
        flipped[b] = 1 - flipped[b];
        const double before = incumbent_->objective;
        const QpSolution start = *incumbent_;
        try_leaf(flipped, &start);
        if (incumbent_->objective < before - gap_abs(before)) improved = true;
      }
      if (!improved) break;
    }
  }

  const MixedIntegerQp& miqp_;
  const MiqpSettings& settings_;
  QpSettings qp_settings_;
  QuadraticProgram work_;
  std::vector<Index> plus_of_, minus_of_;
  std::map<std::vector<int>, double> leaves_;
  std::optional<QpSolution> incumbent_;
  std::vector<int> incumbent_assignment_;
  int seq_ = 0;
};

}  // namespace

MiqpResult solve_miqp(const MixedIntegerQp& miqp, const MiqpSettings& settings) {
  if (!settings.qp.skip_validation) miqp.base.validate();
  miqp.validate();
  return BranchAndBound(miqp, settings).run();
}

}  // namespace flexmarket
