#include "flexmarket/qp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <tuple>

#include "flexmarket/error.hpp"

namespace flexmarket {

double QuadraticProgram::row_lower(Index r) const {
  switch (senses[r]) {
    case RowSense::kLessEqual: return -kInf;
    case RowSense::kGreaterEqual:
    case RowSense::kEqual: return rhs[r];
  }
  return -kInf;
}

double QuadraticProgram::row_upper(Index r) const {
  switch (senses[r]) {
    case RowSense::kGreaterEqual: return kInf;
    case RowSense::kLessEqual:
    case RowSense::kEqual: return rhs[r];
  }
  return kInf;
}

double QuadraticProgram::objective(const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(quadratic * x) + linear.dot(x) + constant;
}

std::string QuadraticProgram::var_name(Index j) const {
  if (j < static_cast<Index>(var_names.size()) && !var_names[j].empty()) return var_names[j];
  return "x" + std::to_string(j);
}

std::string QuadraticProgram::row_name(Index r) const {
  if (r < static_cast<Index>(row_names.size()) && !row_names[r].empty()) return row_names[r];
  return "r" + std::to_string(r);
}

void QuadraticProgram::validate() const {
  const Index n = num_vars();
  const Index m = num_rows();
  require(quadratic.rows() == n && quadratic.cols() == n, ErrorKind::kDimension,
          "quadratic term must be n x n");
  require(lower.size() == n && upper.size() == n, ErrorKind::kDimension, "bound vectors must have length n");
  require(rows.rows() == m && rows.cols() == n, ErrorKind::kDimension, "row matrix must be m x n");
  require(static_cast<Index>(senses.size()) == m, ErrorKind::kDimension, "one sense per row required");
  for (Index j = 0; j < n; ++j) {
    if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j]) {
      throw Error(ErrorKind::kValidation, "invalid variable bounds",
                  {{var_name(j), "lower bound exceeds upper bound"}});
    }
  }
  if (n == 0) return;

  const SparseMatrix asym = SparseMatrix(quadratic.transpose()) - quadratic;
  double scale = 1.0;
  for (Index k = 0; k < quadratic.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(quadratic, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
  for (Index k = 0; k < asym.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(asym, k); it; ++it)
      if (std::abs(it.value()) > 1e-10 * scale)
        throw Error(ErrorKind::kValidation, "quadratic term is not symmetric");

  // PSD test: Q + εI must admit an LDLᵀ factorization with positive pivots.
  SparseMatrix shifted = quadratic;
  SparseMatrix identity(n, n);
  identity.setIdentity();
  shifted += (1e-9 * scale) * identity;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(shifted);
  bool ok = ldlt.info() == Eigen::Success;
  if (ok) {
    const Eigen::VectorXd d = ldlt.vectorD();
    ok = (d.array() > 0.0).all();
  }
  if (!ok) fail(ErrorKind::kNotPsd, "quadratic term is not positive semidefinite");
}

Index QpBuilder::add_variable(double lower, double upper, std::string name) {
  lower_.push_back(lower);
  upper_.push_back(upper);
  linear_.push_back(0.0);
  var_names_.push_back(std::move(name));
  return static_cast<Index>(lower_.size()) - 1;
}

void QpBuilder::set_bounds(Index var, double lower, double upper) {
  lower_.at(var) = lower;
  upper_.at(var) = upper;
}

void QpBuilder::add_linear(Index var, double coef) { linear_.at(var) += coef; }

void QpBuilder::add_quadratic(Index i, Index j, double coef) {
  if (i == j) {
    quad_.emplace_back(i, i, 2.0 * coef);
  } else {
    quad_.emplace_back(i, j, coef);
    quad_.emplace_back(j, i, coef);
  }
}

void QpBuilder::add_squared(const std::vector<Term>& terms, double offset, double weight) {
  for (const auto& a : terms) {
    for (const auto& b : terms) quad_.emplace_back(a.var, b.var, 2.0 * weight * a.coef * b.coef);
    linear_.at(a.var) += 2.0 * weight * offset * a.coef;
  }
  constant_ += weight * offset * offset;
}

Index QpBuilder::add_row(const std::vector<Term>& terms, RowSense sense, double rhs, std::string name) {
  const Index r = num_rows();
  for (const auto& t : terms) {
    require(t.var >= 0 && t.var < num_vars(), ErrorKind::kDimension, "row references unknown variable");
    if (t.coef != 0.0) row_entries_.emplace_back(r, t.var, t.coef);
  }
  rhs_.push_back(rhs);
  senses_.push_back(sense);
  row_names_.push_back(std::move(name));
  return r;
}

QuadraticProgram QpBuilder::build() const {
  const Index n = num_vars();
  const Index m = num_rows();
  QuadraticProgram qp;
  qp.quadratic.resize(n, n);
  qp.quadratic.setFromTriplets(quad_.begin(), quad_.end());
  qp.quadratic.prune(0.0);
  qp.linear = Eigen::Map<const Eigen::VectorXd>(linear_.data(), n);
  qp.constant = constant_;
  qp.lower = Eigen::Map<const Eigen::VectorXd>(lower_.data(), n);
  qp.upper = Eigen::Map<const Eigen::VectorXd>(upper_.data(), n);
  qp.rows.resize(m, n);
  qp.rows.setFromTriplets(row_entries_.begin(), row_entries_.end());
  qp.rows.prune(0.0);
  qp.rhs = Eigen::Map<const Eigen::VectorXd>(rhs_.data(), m);
  qp.senses = senses_;
  qp.var_names = var_names_;
  qp.row_names = row_names_;
  return qp;
}

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kInfeasible: return "infeasible";
    case QpStatus::kIterationLimit: return "iteration-limit";
    case QpStatus::kUnbounded: return "unbounded";
  }
  return "unknown";
}

double KktReport::worst() const { return std::max({stationarity, primal, dual, complementarity}); }

namespace {

// Accumulates sign and complementarity residuals for one constraint with
// value `v`, range [lo, hi] and multiplier `y` (positive = upper side).
void accumulate(double v, double lo, double hi, double y, KktReport& r) {
  r.primal = std::max({r.primal, lo - v, v - hi});
  if (y > 0.0) {
    if (std::isinf(hi)) r.dual = std::max(r.dual, y);
    else r.complementarity = std::max(r.complementarity, y * std::abs(hi - v));
  } else if (y < 0.0) {
    if (std::isinf(lo)) r.dual = std::max(r.dual, -y);
    else r.complementarity = std::max(r.complementarity, -y * std::abs(v - lo));
  }
}

}  // namespace

KktReport check_kkt(const QuadraticProgram& qp, const QpSolution& sol, double tol) {
  const Index n = qp.num_vars();
  const Index m = qp.num_rows();
  require(sol.x.size() == n && sol.bound_duals.size() == n && sol.row_duals.size() == m, ErrorKind::kDimension,
          "solution dimensions do not match the problem");
  KktReport report;
  const Eigen::VectorXd ax = qp.rows * sol.x;
  const Eigen::VectorXd grad =
      qp.quadratic * sol.x + qp.linear + qp.rows.transpose() * sol.row_duals + sol.bound_duals;
  report.stationarity = n > 0 ? grad.lpNorm<Eigen::Infinity>() : 0.0;
  for (Index r = 0; r < m; ++r) accumulate(ax[r], qp.row_lower(r), qp.row_upper(r), sol.row_duals[r], report);
  for (Index j = 0; j < n; ++j) accumulate(sol.x[j], qp.lower[j], qp.upper[j], sol.bound_duals[j], report);
  report.pass = report.worst() <= tol;
  return report;
}

void write_listing(const QuadraticProgram& qp, std::ostream& out) {
  const auto old_flags = out.flags();
  const auto old_precision = out.precision();
  out << std::setprecision(17);
  out << "qp vars " << qp.num_vars() << " rows " << qp.num_rows() << "\n";
  out << "constant " << qp.constant << "\n";
  for (Index j = 0; j < qp.num_vars(); ++j)
    out << "var " << j << " " << qp.var_name(j) << " lo " << qp.lower[j] << " hi " << qp.upper[j] << " c "
        << qp.linear[j] << "\n";
  std::vector<std::tuple<Index, Index, double>> q;
  for (Index k = 0; k < qp.quadratic.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(qp.quadratic, k); it; ++it)
      if (it.row() <= it.col()) q.emplace_back(it.row(), it.col(), it.value());
  std::sort(q.begin(), q.end());
  for (const auto& [i, j, v] : q) out << "Q " << i << " " << j << " " << v << "\n";

  const Eigen::SparseMatrix<double, Eigen::RowMajor> rows = qp.rows;
  for (Index r = 0; r < qp.num_rows(); ++r) {
    const char* sense = qp.senses[r] == RowSense::kLessEqual ? "<=" : qp.senses[r] == RowSense::kGreaterEqual ? ">=" : "==";
    out << "row " << r << " " << qp.row_name(r) << " " << sense << " " << qp.rhs[r] << " :";
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows, r); it; ++it)
      out << " " << it.col() << ":" << it.value();
    out << "\n";
  }
  out.flags(old_flags);
  out.precision(old_precision);
}

}  // namespace flexmarket
