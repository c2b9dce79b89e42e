#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace flexmarket {

using Index = Eigen::Index;
using SparseMatrix = Eigen::SparseMatrix<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense { kLessEqual, kGreaterEqual, kEqual };

struct Term {
  Index var;
  double coef;
};

/// min ½xᵀQx + cᵀx + constant  s.t.  lower ≤ x ≤ upper,  rows·x (sense) rhs.
///
/// `quadratic` holds the full symmetric matrix (both triangles). Bounds may be
/// infinite. Names are optional and only used for diagnostics and listings.
struct QuadraticProgram {
  SparseMatrix quadratic;
  Eigen::VectorXd linear;
  double constant = 0.0;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  SparseMatrix rows;
  Eigen::VectorXd rhs;
  std::vector<RowSense> senses;
  std::vector<std::string> var_names;
  std::vector<std::string> row_names;

  Index num_vars() const { return linear.size(); }
  Index num_rows() const { return rhs.size(); }

  double row_lower(Index r) const;
  double row_upper(Index r) const;
  double objective(const Eigen::VectorXd& x) const;

  std::string var_name(Index j) const;
  std::string row_name(Index r) const;

  /// Throws kDimension on inconsistent sizes, kValidation on lower > upper or an
  /// asymmetric quadratic term, kNotPsd when Q + εI fails to factor.
  void validate() const;
};

/// Incremental construction of a QuadraticProgram.
class QpBuilder {
 public:
  Index add_variable(double lower, double upper, std::string name = {});
  void set_bounds(Index var, double lower, double upper);

  void add_linear(Index var, double coef);
  void add_constant(double value) { constant_ += value; }
  /// Adds coef·x_i·x_j to the objective.
  void add_quadratic(Index i, Index j, double coef);
  /// Adds weight·(Σ coef·x + offset)² to the objective.
  void add_squared(const std::vector<Term>& terms, double offset, double weight);

  Index add_row(const std::vector<Term>& terms, RowSense sense, double rhs, std::string name = {});

  Index num_vars() const { return static_cast<Index>(lower_.size()); }
  Index num_rows() const { return static_cast<Index>(rhs_.size()); }

  QuadraticProgram build() const;

 private:
  std::vector<double> lower_, upper_, linear_;
  std::vector<std::string> var_names_;
  std::vector<Eigen::Triplet<double>> quad_;
  std::vector<Eigen::Triplet<double>> row_entries_;
  std::vector<double> rhs_;
  std::vector<RowSense> senses_;
  std::vector<std::string> row_names_;
  double constant_ = 0.0;
};

enum class QpStatus { kOptimal, kInfeasible, kIterationLimit, kUnbounded };

const char* to_string(QpStatus status);

/// Dual sign convention: stationarity reads Qx + c + rowsᵀy + w = 0, with
/// y_r ≥ 0 when row r is active at its upper side and ≤ 0 at its lower side
/// (same for the bound multipliers w).
struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd row_duals;
  Eigen::VectorXd bound_duals;
  double objective = 0.0;
  QpStatus status = QpStatus::kIterationLimit;
  int iterations = 0;
  bool polished = false;
  std::string note;
};

struct QpSettings {
  double tol = 1e-6;
  int max_iter = 20000;
  bool polish = true;
  bool scaling = true;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  /// Optional starting point (same dimensions as the problem). Branch and
  /// bound passes the parent node's solution here.
  const QpSolution* warm_start = nullptr;
  /// Skip QuadraticProgram::validate(); callers that already validated set this.
  bool skip_validation = false;
};

struct KktReport {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
  bool pass = false;

  double worst() const;
};

/// Operator-splitting (ADMM) QP solver with presolve and active-set polish.
/// Status kOptimal is only reported once check_kkt() passes at `settings.tol`.
QpSolution solve_qp(const QuadraticProgram& qp, const QpSettings& settings = {});
QpSolution solve_qp(const QuadraticProgram& qp, double tol, int max_iter);

KktReport check_kkt(const QuadraticProgram& qp, const QpSolution& solution, double tol);

/// Plain-text canonical listing, one item per line, for external cross-checks.
void write_listing(const QuadraticProgram& qp, std::ostream& out);

}  // namespace flexmarket
