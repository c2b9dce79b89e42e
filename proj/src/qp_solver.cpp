// ADMM (operator splitting) solver for convex QPs.
//
// The pipeline is presolve -> Ruiz scaling -> ADMM on
//   min ½xᵀPx + qᵀx  s.t.  l ≤ Cx ≤ u
// where C stacks the surviving rows and one identity row per bounded variable
// -> active-set polish -> postsolve back to the caller's variables and duals.

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <optional>

#include "flexmarket/error.hpp"
#include "flexmarket/qp.hpp"

namespace flexmarket {
namespace {

using Vec = Eigen::VectorXd;
using RowMajorMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Upper>;

constexpr double kFixTol = 1e-12;
constexpr double kFeasTol = 1e-9;

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

// ---------------------------------------------------------------------------
// Presolve: substitute fixed variables, turn singleton rows into bounds, drop
// empty rows. Records enough to rebuild duals for the original problem.

struct Presolved {
  bool infeasible = false;
  std::string reason;

  std::vector<Index> var_map;  // original -> reduced, -1 when eliminated
  std::vector<Index> kept_vars;
  std::vector<Index> row_map;  // original -> reduced, -1 when removed
  std::vector<Index> kept_rows;
  Vec fixed_value;
  std::vector<Index> lower_source;  // -1: original box, else row id
  std::vector<Index> upper_source;
  std::vector<Index> fix_order;

  SparseMatrix P;
  Vec q;
  SparseMatrix A;
  Vec row_lo, row_hi;
  Vec var_lo, var_hi;
};

Presolved presolve(const QuadraticProgram& qp) {
  const Index n = qp.num_vars();
  const Index m = qp.num_rows();
  Presolved ps;
  ps.fixed_value = Vec::Zero(n);
  ps.lower_source.assign(n, -1);
  ps.upper_source.assign(n, -1);

  Vec lo = qp.lower;
  Vec hi = qp.upper;
  Vec lin = qp.linear;
  Vec rl(m), ru(m);
  for (Index r = 0; r < m; ++r) {
    rl[r] = qp.row_lower(r);
    ru[r] = qp.row_upper(r);
  }
  const RowMajorMatrix by_row = qp.rows;
  const SparseMatrix& by_col = qp.rows;
  std::vector<char> var_live(n, 1), row_live(m, 1);
  std::vector<Index> live_count(m);
  for (Index r = 0; r < m; ++r) live_count[r] = by_row.outerIndexPtr()[r + 1] - by_row.outerIndexPtr()[r];

  auto fix = [&](Index j, double v) {
    var_live[j] = 0;
    ps.fixed_value[j] = v;
    ps.fix_order.push_back(j);
    for (SparseMatrix::InnerIterator it(by_col, j); it; ++it) {
      const Index r = it.row();
      if (!row_live[r]) continue;
      rl[r] -= it.value() * v;
      ru[r] -= it.value() * v;
      --live_count[r];
    }
    for (SparseMatrix::InnerIterator it(qp.quadratic, j); it; ++it) {
      const Index k = it.row();
      if (k == j) continue;
      if (var_live[k]) lin[k] += it.value() * v;
    }
  };

  auto singleton = [&](Index r) {
    Index j = -1;
    double a = 0.0;
    for (RowMajorMatrix::InnerIterator it(by_row, r); it; ++it) {
      if (var_live[it.col()]) {
        j = it.col();
        a = it.value();
        break;
      }
    }
    row_live[r] = 0;
    if (j < 0) return;
    const double implied_lo = a > 0.0 ? rl[r] / a : ru[r] / a;
    const double implied_hi = a > 0.0 ? ru[r] / a : rl[r] / a;
    if (implied_lo > lo[j]) {
      lo[j] = implied_lo;
      ps.lower_source[j] = r;
    }
    if (implied_hi < hi[j]) {
      hi[j] = implied_hi;
      ps.upper_source[j] = r;
    }
  };

  bool changed = true;
  while (changed && !ps.infeasible) {
    changed = false;
    for (Index j = 0; j < n && !ps.infeasible; ++j) {
      if (!var_live[j]) continue;
      const double scale = std::max({1.0, std::abs(lo[j]) < kInf ? std::abs(lo[j]) : 0.0,
                                     std::abs(hi[j]) < kInf ? std::abs(hi[j]) : 0.0});
      if (lo[j] > hi[j] + kFeasTol * scale) {
        ps.infeasible = true;
        ps.reason = "empty bound pair on " + qp.var_name(j);
      } else if (hi[j] - lo[j] <= kFixTol * scale) {
        fix(j, lo[j] == hi[j] ? lo[j] : 0.5 * (lo[j] + hi[j]));
        changed = true;
      }
    }
    for (Index r = 0; r < m && !ps.infeasible; ++r) {
      if (!row_live[r]) continue;
      if (live_count[r] == 0) {
        const double scale = std::max({1.0, std::isinf(rl[r]) ? 0.0 : std::abs(rl[r]),
                                       std::isinf(ru[r]) ? 0.0 : std::abs(ru[r])});
        if (rl[r] > kFeasTol * scale || ru[r] < -kFeasTol * scale) {
          ps.infeasible = true;
          ps.reason = "row " + qp.row_name(r) + " cannot be satisfied by the fixed variables";
        }
        row_live[r] = 0;
      } else if (live_count[r] == 1) {
        singleton(r);
        changed = true;
      } else if (std::isinf(rl[r]) && std::isinf(ru[r])) {
        row_live[r] = 0;
      }
    }
  }
  if (ps.infeasible) return ps;

  ps.var_map.assign(n, -1);
  for (Index j = 0; j < n; ++j)
    if (var_live[j]) {
      ps.var_map[j] = static_cast<Index>(ps.kept_vars.size());
      ps.kept_vars.push_back(j);
    }
  ps.row_map.assign(m, -1);
  for (Index r = 0; r < m; ++r)
    if (row_live[r]) {
      ps.row_map[r] = static_cast<Index>(ps.kept_rows.size());
      ps.kept_rows.push_back(r);
    }

  const Index nr = static_cast<Index>(ps.kept_vars.size());
  const Index mr = static_cast<Index>(ps.kept_rows.size());
  std::vector<Eigen::Triplet<double>> trip;
  for (Index k = 0; k < qp.quadratic.outerSize(); ++k) {
    if (ps.var_map[k] < 0) continue;
    for (SparseMatrix::InnerIterator it(qp.quadratic, k); it; ++it)
      if (ps.var_map[it.row()] >= 0) trip.emplace_back(ps.var_map[it.row()], ps.var_map[k], it.value());
  }
  ps.P.resize(nr, nr);
  ps.P.setFromTriplets(trip.begin(), trip.end());
  ps.q.resize(nr);
  ps.var_lo.resize(nr);
  ps.var_hi.resize(nr);
  for (Index k = 0; k < nr; ++k) {
    ps.q[k] = lin[ps.kept_vars[k]];
    ps.var_lo[k] = lo[ps.kept_vars[k]];
    ps.var_hi[k] = hi[ps.kept_vars[k]];
  }
  trip.clear();
  ps.row_lo.resize(mr);
  ps.row_hi.resize(mr);
  for (Index k = 0; k < mr; ++k) {
    const Index r = ps.kept_rows[k];
    ps.row_lo[k] = rl[r];
    ps.row_hi[k] = ru[r];
    for (RowMajorMatrix::InnerIterator it(by_row, r); it; ++it)
      if (ps.var_map[it.col()] >= 0) trip.emplace_back(k, ps.var_map[it.col()], it.value());
  }
  ps.A.resize(mr, nr);
  ps.A.setFromTriplets(trip.begin(), trip.end());
  return ps;
}

// Maps a reduced-space primal/dual triple back to the original problem.
QpSolution postsolve(const QuadraticProgram& qp, const Presolved& ps, const Vec& xr, const Vec& yr, const Vec& wr) {
  const Index n = qp.num_vars();
  const Index m = qp.num_rows();
  QpSolution sol;
  sol.x = ps.fixed_value;
  for (std::size_t k = 0; k < ps.kept_vars.size(); ++k) sol.x[ps.kept_vars[k]] = xr[static_cast<Index>(k)];
  sol.row_duals = Vec::Zero(m);
  sol.bound_duals = Vec::Zero(n);
  for (std::size_t k = 0; k < ps.kept_rows.size(); ++k) sol.row_duals[ps.kept_rows[k]] = yr[static_cast<Index>(k)];

  auto coefficient = [&](Index r, Index j) { return qp.rows.coeff(r, j); };
  auto distribute = [&](Index j) {
    double& w = sol.bound_duals[j];
    const Index src = w > 0.0 ? ps.upper_source[j] : (w < 0.0 ? ps.lower_source[j] : -1);
    if (src < 0) return;
    sol.row_duals[src] = w / coefficient(src, j);
    w = 0.0;
  };

  for (std::size_t k = 0; k < ps.kept_vars.size(); ++k) {
    const Index j = ps.kept_vars[k];
    sol.bound_duals[j] = wr[static_cast<Index>(k)];
    distribute(j);
  }
  for (auto it = ps.fix_order.rbegin(); it != ps.fix_order.rend(); ++it) {
    const Index j = *it;
    double g = qp.linear[j];
    for (SparseMatrix::InnerIterator q(qp.quadratic, j); q; ++q) g += q.value() * sol.x[q.row()];
    for (SparseMatrix::InnerIterator a(qp.rows, j); a; ++a) g += a.value() * sol.row_duals[a.row()];
    sol.bound_duals[j] = -g;
    distribute(j);
  }
  sol.objective = qp.objective(sol.x);
  return sol;
}

// ---------------------------------------------------------------------------
// ADMM core on l ≤ Cx ≤ u, in Ruiz-scaled coordinates.

enum class AdmmOutcome { kConverged, kIterationLimit, kPrimalInfeasible, kDualInfeasible };

class Admm {
 public:
  Admm(const SparseMatrix& P, const Vec& q, const SparseMatrix& C, const Vec& l, const Vec& u,
       const QpSettings& settings)
      : settings_(settings), n_(P.rows()), m_(C.rows()) {
    P_ = P;
    q_ = q;
    C_ = C;
    l_ = l;
    u_ = u;
    D_ = Vec::Ones(n_);
    E_ = Vec::Ones(m_);
    if (settings.scaling) scale();
    rho_vec_.resize(m_);
    set_rho(settings.rho);
    x_ = Vec::Zero(n_);
    z_ = Vec::Zero(m_);
    y_ = Vec::Zero(m_);
    factor();
  }

  void warm(const Vec& x, const Vec& y) {
    x_ = x.cwiseQuotient(D_);
    y_ = (y.cwiseQuotient(E_)) * cost_;
    z_ = (C_ * x_).cwiseMax(l_).cwiseMin(u_);
  }

  AdmmOutcome run(double eps, int max_iter, int& used) {
    const double alpha = settings_.alpha;
    Vec rhs(n_ + m_);
    Vec x_prev, y_prev;
    for (int k = 0; k < max_iter; ++k) {
      ++used;
      rhs.head(n_) = settings_.sigma * x_ - q_;
      rhs.tail(m_) = z_ - y_.cwiseQuotient(rho_vec_);
      const Vec sol = ldlt_.solve(rhs);
      const Vec x_tilde = sol.head(n_);
      const Vec z_tilde = z_ + (sol.tail(m_) - y_).cwiseQuotient(rho_vec_);
      x_prev = x_;
      y_prev = y_;
      x_ = alpha * x_tilde + (1.0 - alpha) * x_;
      const Vec z_relaxed = alpha * z_tilde + (1.0 - alpha) * z_;
      z_ = (z_relaxed + y_.cwiseQuotient(rho_vec_)).cwiseMax(l_).cwiseMin(u_);
      y_ += rho_vec_.cwiseProduct(z_relaxed - z_);

      if (k % 5 != 4 && k + 1 != max_iter) continue;
      const Residuals r = residuals();
      if (r.prim <= eps + eps * r.prim_scale && r.dual <= eps + eps * r.dual_scale) return AdmmOutcome::kConverged;
      if (primal_infeasible(y_ - y_prev)) return AdmmOutcome::kPrimalInfeasible;
      if (dual_infeasible(x_ - x_prev)) return AdmmOutcome::kDualInfeasible;
      if (k % 50 == 49) adapt_rho(r);
    }
    return AdmmOutcome::kIterationLimit;
  }

  Vec x() const { return x_.cwiseProduct(D_); }
  Vec y() const { return y_.cwiseProduct(E_) / cost_; }

  /// Solves the equality-constrained QP on the active set guessed from the ADMM
  /// iterate, then repairs the guess: first constraints whose multiplier has the
  /// wrong sign are released, then violated ones are added. Every round's point
  /// is returned; the caller keeps the best one.
  std::vector<std::pair<Vec, Vec>> polish() const {
    // side: 0 inactive, -1 at lower, +1 at upper, 2 equality.
    // Constraints sitting on a bound with a negligible multiplier are left out:
    // at degenerate vertices they are implied by the others.
    std::vector<int> side(static_cast<std::size_t>(m_), 0);
    const double ytol = 1e-7 * std::max(1.0, inf_norm(y_));
    for (Index i = 0; i < m_; ++i) {
      if (l_[i] == u_[i]) side[i] = 2;
      else if (y_[i] < -ytol && z_[i] - l_[i] < -y_[i]) side[i] = -1;
      else if (y_[i] > ytol && u_[i] - z_[i] < y_[i]) side[i] = 1;
    }
    const double delta = 1e-6;
    const RowMajorMatrix c_rows = C_;
    std::vector<Eigen::Triplet<double>> p_upper;
    for (Index k = 0; k < P_.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(P_, k); it; ++it)
        if (it.row() <= it.col()) p_upper.emplace_back(it.row(), it.col(), it.value());

    std::vector<std::pair<Vec, Vec>> out;
    for (int round = 0; round < 25; ++round) {
      std::vector<Index> active;
      for (Index i = 0; i < m_; ++i)
        if (side[i] != 0) active.push_back(i);
      const Index na = static_cast<Index>(active.size());
      std::vector<Eigen::Triplet<double>> reg = p_upper, exact = p_upper;
      for (Index j = 0; j < n_; ++j) reg.emplace_back(j, j, delta);
      Vec rhs(n_ + na);
      rhs.head(n_) = -q_;
      for (Index a = 0; a < na; ++a) {
        const Index i = active[a];
        for (RowMajorMatrix::InnerIterator it(c_rows, i); it; ++it) {
          reg.emplace_back(it.col(), n_ + a, it.value());
          exact.emplace_back(it.col(), n_ + a, it.value());
        }
        reg.emplace_back(n_ + a, n_ + a, -delta);
        rhs[n_ + a] = side[i] == 1 ? u_[i] : l_[i];
      }
      SparseMatrix k_reg(n_ + na, n_ + na), k_exact(n_ + na, n_ + na);
      k_reg.setFromTriplets(reg.begin(), reg.end());
      k_exact.setFromTriplets(exact.begin(), exact.end());
      Ldlt solver(k_reg);
      if (solver.info() != Eigen::Success) break;
      Vec sol = solver.solve(rhs);
      for (int refine = 0; refine < 10; ++refine) {
        const Vec residual = rhs - k_exact.selfadjointView<Eigen::Upper>() * sol;
        if (inf_norm(residual) < 1e-14 * std::max(1.0, inf_norm(rhs))) break;
        sol += solver.solve(residual);
      }
      if (!sol.allFinite()) break;
      Vec y = Vec::Zero(m_);
      for (Index a = 0; a < na; ++a) y[active[a]] = sol[n_ + a];
      const Vec x = sol.head(n_);
      out.emplace_back(x.cwiseProduct(D_), y.cwiseProduct(E_) / cost_);

      const Vec cx = C_ * x;
      const double feas_tol = 1e-9 * std::max(1.0, inf_norm(cx));
      const double sign_tol = 1e-9 * std::max(1.0, inf_norm(y));
      // Degenerate vertices make releasing several constraints at once unsafe,
      // so only the worst offender changes per round.
      Index worst = -1;
      double worst_val = sign_tol;
      for (Index i = 0; i < m_; ++i) {
        const double wrong = side[i] == -1 ? y[i] : side[i] == 1 ? -y[i] : 0.0;
        if (wrong > worst_val) {
          worst_val = wrong;
          worst = i;
        }
      }
      if (worst >= 0) {
        side[worst] = 0;
        continue;
      }
      worst_val = feas_tol;
      int worst_side = 0;
      for (Index i = 0; i < m_; ++i) {
        if (side[i] != 0) continue;
        if (l_[i] - cx[i] > worst_val) {
          worst_val = l_[i] - cx[i];
          worst = i;
          worst_side = -1;
        } else if (cx[i] - u_[i] > worst_val) {
          worst_val = cx[i] - u_[i];
          worst = i;
          worst_side = 1;
        }
      }
      if (worst < 0) break;
      side[worst] = worst_side;
    }
    return out;
  }

 private:
  struct Residuals {
    double prim, dual, prim_scale, dual_scale;
  };

  Residuals residuals() const {
    const Vec cx = (C_ * x_).cwiseQuotient(E_);
    const Vec z = z_.cwiseQuotient(E_);
    const Vec px = (P_ * x_).cwiseQuotient(D_) / cost_;
    const Vec cty = (C_.transpose() * y_).cwiseQuotient(D_) / cost_;
    const Vec q = q_.cwiseQuotient(D_) / cost_;
    Residuals r;
    r.prim = inf_norm(cx - z);
    r.dual = inf_norm(px + q + cty);
    r.prim_scale = std::max(inf_norm(cx), inf_norm(z));
    r.dual_scale = std::max({inf_norm(px), inf_norm(cty), inf_norm(q)});
    return r;
  }

  bool primal_infeasible(const Vec& dy) const {
    const double eps = 1e-6;
    const Vec unscaled = dy.cwiseProduct(E_);
    const double norm = inf_norm(unscaled);
    if (norm < 1e-12) return false;
    const Vec d = dy / norm;
    if (inf_norm((C_.transpose() * d).cwiseQuotient(D_)) >= eps) return false;
    double support = 0.0;
    for (Index i = 0; i < m_; ++i) {
      if (d[i] > 0.0) {
        if (std::isinf(u_[i])) {
          if (d[i] * E_[i] > eps) return false;
        } else {
          support += u_[i] * d[i];
        }
      } else if (d[i] < 0.0) {
        if (std::isinf(l_[i])) {
          if (-d[i] * E_[i] > eps) return false;
        } else {
          support += l_[i] * d[i];
        }
      }
    }
    return support < -eps;
  }

  bool dual_infeasible(const Vec& dx) const {
    const double eps = 1e-6;
    const double norm = inf_norm(dx.cwiseProduct(D_));
    if (norm < 1e-12) return false;
    const Vec d = dx / norm;
    if (inf_norm((P_ * d).cwiseQuotient(D_)) / cost_ >= eps) return false;
    if (q_.dot(d) / cost_ >= -eps) return false;
    const Vec cd = (C_ * d).cwiseQuotient(E_);
    for (Index i = 0; i < m_; ++i) {
      if (!std::isinf(u_[i]) && cd[i] > eps) return false;
      if (!std::isinf(l_[i]) && cd[i] < -eps) return false;
    }
    return true;
  }

  void scale() {
    for (int iter = 0; iter < 15; ++iter) {
      Vec col = Vec::Zero(n_);
      Vec row = Vec::Zero(m_);
      for (Index k = 0; k < P_.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(P_, k); it; ++it) col[k] = std::max(col[k], std::abs(it.value()));
      for (Index k = 0; k < C_.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(C_, k); it; ++it) {
          col[k] = std::max(col[k], std::abs(it.value()));
          row[it.row()] = std::max(row[it.row()], std::abs(it.value()));
        }
      auto factor = [](double norm) {
        if (norm < 1e-4) return 1.0;
        return std::clamp(1.0 / std::sqrt(norm), 1e-4, 1e4);
      };
      Vec d(n_), e(m_);
      for (Index j = 0; j < n_; ++j) d[j] = factor(col[j]);
      for (Index i = 0; i < m_; ++i) e[i] = factor(row[i]);
      P_ = d.asDiagonal() * P_ * d.asDiagonal();
      C_ = e.asDiagonal() * C_ * d.asDiagonal();
      q_ = q_.cwiseProduct(d);
      D_ = D_.cwiseProduct(d);
      E_ = E_.cwiseProduct(e);
    }
    double mean_col = 0.0;
    for (Index k = 0; k < P_.outerSize(); ++k) {
      double c = 0.0;
      for (SparseMatrix::InnerIterator it(P_, k); it; ++it) c = std::max(c, std::abs(it.value()));
      mean_col += c;
    }
    mean_col = n_ > 0 ? mean_col / static_cast<double>(n_) : 0.0;
    double scale_c = std::max(mean_col, inf_norm(q_));
    scale_c = scale_c < 1e-4 ? 1.0 : std::clamp(1.0 / scale_c, 1e-4, 1e4);
    P_ *= scale_c;
    q_ *= scale_c;
    cost_ = scale_c;
    l_ = l_.cwiseProduct(E_);
    u_ = u_.cwiseProduct(E_);
  }

  void set_rho(double rho) {
    rho_ = std::clamp(rho, 1e-6, 1e6);
    for (Index i = 0; i < m_; ++i) {
      if (l_[i] == u_[i]) rho_vec_[i] = 1e3 * rho_;
      else if (std::isinf(l_[i]) && std::isinf(u_[i])) rho_vec_[i] = 1e-6;
      else rho_vec_[i] = rho_;
    }
  }

  void factor() {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(P_.nonZeros() + C_.nonZeros() + n_ + m_));
    for (Index k = 0; k < P_.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(P_, k); it; ++it)
        if (it.row() <= it.col()) trip.emplace_back(it.row(), it.col(), it.value());
    for (Index j = 0; j < n_; ++j) trip.emplace_back(j, j, settings_.sigma);
    for (Index k = 0; k < C_.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(C_, k); it; ++it) trip.emplace_back(k, n_ + it.row(), it.value());
    for (Index i = 0; i < m_; ++i) trip.emplace_back(n_ + i, n_ + i, -1.0 / rho_vec_[i]);
    SparseMatrix kkt(n_ + m_, n_ + m_);
    kkt.setFromTriplets(trip.begin(), trip.end());
    if (!analyzed_) {
      ldlt_.analyzePattern(kkt);
      analyzed_ = true;
    }
    ldlt_.factorize(kkt);
    if (ldlt_.info() != Eigen::Success) fail(ErrorKind::kNotPsd, "ADMM linear system could not be factored");
  }

  void adapt_rho(const Residuals& r) {
    const double prim = r.prim / (r.prim_scale + 1e-30);
    const double dual = r.dual / (r.dual_scale + 1e-30);
    if (prim <= 0.0 || dual <= 0.0) return;
    const double candidate = std::clamp(rho_ * std::sqrt(prim / dual), 1e-6, 1e6);
    if (candidate > 5.0 * rho_ || candidate < 0.2 * rho_) {
      set_rho(candidate);
      factor();
    }
  }

  QpSettings settings_;
  Index n_, m_;
  SparseMatrix P_, C_;
  Vec q_, l_, u_;
  Vec D_, E_;
  double cost_ = 1.0;
  double rho_ = 0.1;
  Vec rho_vec_;
  Vec x_, z_, y_;
  Ldlt ldlt_;
  bool analyzed_ = false;
};

struct Stacked {
  SparseMatrix C;
  Vec l, u;
  std::vector<Index> bound_var;  // reduced var index of each bound row
};

Stacked stack_constraints(const Presolved& ps) {
  const Index nr = ps.P.rows();
  const Index mr = ps.A.rows();
  Stacked s;
  for (Index j = 0; j < nr; ++j)
    if (!std::isinf(ps.var_lo[j]) || !std::isinf(ps.var_hi[j])) s.bound_var.push_back(j);
  const Index nb = static_cast<Index>(s.bound_var.size());
  std::vector<Eigen::Triplet<double>> trip;
  for (Index k = 0; k < ps.A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(ps.A, k); it; ++it) trip.emplace_back(it.row(), k, it.value());
  for (Index b = 0; b < nb; ++b) trip.emplace_back(mr + b, s.bound_var[b], 1.0);
  s.C.resize(mr + nb, nr);
  s.C.setFromTriplets(trip.begin(), trip.end());
  s.l.resize(mr + nb);
  s.u.resize(mr + nb);
  s.l.head(mr) = ps.row_lo;
  s.u.head(mr) = ps.row_hi;
  for (Index b = 0; b < nb; ++b) {
    s.l[mr + b] = ps.var_lo[s.bound_var[b]];
    s.u[mr + b] = ps.var_hi[s.bound_var[b]];
  }
  return s;
}

QpSolution from_stacked(const QuadraticProgram& qp, const Presolved& ps, const Stacked& s, const Vec& x,
                        const Vec& y) {
  const Index mr = ps.A.rows();
  Vec wr = Vec::Zero(ps.P.rows());
  for (std::size_t b = 0; b < s.bound_var.size(); ++b) wr[s.bound_var[b]] = y[mr + static_cast<Index>(b)];
  return postsolve(qp, ps, x, y.head(mr), wr);
}

}  // namespace

QpSolution solve_qp(const QuadraticProgram& qp, const QpSettings& settings) {
  if (!settings.skip_validation) qp.validate();
  const Presolved ps = presolve(qp);
  if (ps.infeasible) {
    QpSolution sol;
    sol.x = Vec::Zero(qp.num_vars());
    sol.row_duals = Vec::Zero(qp.num_rows());
    sol.bound_duals = Vec::Zero(qp.num_vars());
    sol.status = QpStatus::kInfeasible;
    sol.note = ps.reason;
    sol.objective = kInf;
    return sol;
  }

  const Stacked stacked = stack_constraints(ps);
  const Index nr = ps.P.rows();
  if (nr == 0) {
    QpSolution sol = from_stacked(qp, ps, stacked, Vec::Zero(0), Vec::Zero(stacked.C.rows()));
    sol.status = check_kkt(qp, sol, settings.tol).pass ? QpStatus::kOptimal : QpStatus::kIterationLimit;
    return sol;
  }

  Admm admm(ps.P, ps.q, stacked.C, stacked.l, stacked.u, settings);
  if (settings.warm_start != nullptr && settings.warm_start->x.size() == qp.num_vars()) {
    const QpSolution& w = *settings.warm_start;
    const Index mr = ps.A.rows();
    Vec x0(nr), y0 = Vec::Zero(stacked.C.rows());
    for (Index k = 0; k < nr; ++k) x0[k] = w.x[ps.kept_vars[k]];
    if (w.row_duals.size() == qp.num_rows())
      for (Index k = 0; k < mr; ++k) y0[k] = w.row_duals[ps.kept_rows[k]];
    if (w.bound_duals.size() == qp.num_vars())
      for (std::size_t b = 0; b < stacked.bound_var.size(); ++b)
        y0[mr + static_cast<Index>(b)] = w.bound_duals[ps.kept_vars[stacked.bound_var[b]]];
    admm.warm(x0, y0);
  }

  int used = 0;
  // Polish usually succeeds from a coarse iterate, so start loose and tighten.
  double eps = settings.polish ? std::max(settings.tol, 1e-3) : std::max(settings.tol, 1e-12);
  std::optional<QpSolution> best;
  double best_worst = kInf;
  while (true) {
    const AdmmOutcome outcome = admm.run(eps, settings.max_iter - used, used);
    if (outcome == AdmmOutcome::kPrimalInfeasible || outcome == AdmmOutcome::kDualInfeasible) {
      QpSolution sol = from_stacked(qp, ps, stacked, admm.x(), admm.y());
      sol.status = outcome == AdmmOutcome::kPrimalInfeasible ? QpStatus::kInfeasible : QpStatus::kUnbounded;
      sol.note = outcome == AdmmOutcome::kPrimalInfeasible ? "primal infeasibility certificate"
                                                           : "dual infeasibility certificate";
      sol.iterations = used;
      if (sol.status == QpStatus::kInfeasible) sol.objective = kInf;
      return sol;
    }
    QpSolution candidate = from_stacked(qp, ps, stacked, admm.x(), admm.y());
    double worst = check_kkt(qp, candidate, settings.tol).worst();
    if (settings.polish) {
      for (const auto& [px, py] : admm.polish()) {
        QpSolution p = from_stacked(qp, ps, stacked, px, py);
        const double pw = check_kkt(qp, p, settings.tol).worst();
        if (pw < worst) {
          p.polished = true;
          candidate = std::move(p);
          worst = pw;
        }
        if (worst <= settings.tol) break;
      }
    }
    if (worst < best_worst) {
      best_worst = worst;
      best = std::move(candidate);
    }
    if (best_worst <= settings.tol) {
      best->status = QpStatus::kOptimal;
      break;
    }
    if (used >= settings.max_iter || eps <= 1e-13) {
      best->status = QpStatus::kIterationLimit;
      break;
    }
    eps = std::max(eps * 0.1, 1e-13);
  }
  best->iterations = used;
  return *best;
}

QpSolution solve_qp(const QuadraticProgram& qp, double tol, int max_iter) {
  QpSettings settings;
  settings.tol = tol;
  settings.max_iter = max_iter;
  return solve_qp(qp, settings);
}

}  // namespace flexmarket
