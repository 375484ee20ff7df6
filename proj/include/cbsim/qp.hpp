#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <limits>
#include <string>
#include <vector>

namespace cbsim::qp {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class SolveStatus { optimal, infeasible, unbounded, iteration_limit };

const char* to_string(SolveStatus s);

/// Convex quadratic program
///   min 1/2 x'Qx + c'x
///   s.t. A_eq x = b_eq,  A_in x <= b_in,  lower <= x <= upper,
/// with an optional subset of variables restricted to {0,1}.
struct QuadraticProgram {
  Eigen::SparseMatrix<double> q_matrix;  // n x n symmetric PSD
  Eigen::VectorXd c_vector;              // n
  Eigen::SparseMatrix<double> eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::SparseMatrix<double> ineq_matrix;
  Eigen::VectorXd ineq_rhs;
  Eigen::VectorXd lower, upper;  // +-inf allowed
  std::vector<int> binary_indices;
  double big_m = 0.0;  // bookkeeping for complementarity builders

  int num_vars() const { return static_cast<int>(c_vector.size()); }

  /// Checks dimensions, numerical positive semi-definiteness of q_matrix
  /// (smallest eigenvalue >= -1e-9; O(n) for diagonal costs) and that every
  /// binary index has [0,1]-compatible bounds. Throws on violation.
  void validate() const;

  double objective_value(const Eigen::VectorXd& x) const;
};

struct SolveResult {
  Eigen::VectorXd x;
  Eigen::VectorXd dual;  // row multipliers ordered [eq; ineq; bounds]
  double objective = 0.0;
  SolveStatus status = SolveStatus::iteration_limit;
  double kkt_residual = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  int nodes_explored = 0;
};

struct SolverOptions {
  double eps_abs = 1e-9;
  double eps_rel = 1e-9;
  int max_iterations = 200000;
  int max_binaries = 64;
  double integrality_tol = 1e-5;
  double kkt_tolerance = 1e-6;
  bool verify_psd = true;
};

/// Operator-splitting (ADMM) solve of the continuous relaxation with an
/// active-set polish step; binaries, if present, must already be fixed via
/// their bounds. Detects primal and dual infeasibility from the iterates'
/// difference certificates.
SolveResult solve_continuous(const QuadraticProgram& qp, const SolverOptions& opts = {});

/// Branch-and-bound over the binary variables with continuous-relaxation
/// bounding. Branching picks the most fractional relaxation value, ties by
/// lowest index; a round-and-fix probe at each node supplies incumbents
/// early so that instances whose relaxation is already complementarity-
/// feasible terminate at the root.
SolveResult solve_with_binaries(const QuadraticProgram& qp, const SolverOptions& opts = {});

/// Max KKT violation of a point: primal feasibility plus the best-fit
/// stationarity residual over sign-correct multipliers on the active set.
/// Exactly 0 at an unconstrained minimum of a diagonal quadratic.
double verify_kkt(const QuadraticProgram& qp, const Eigen::VectorXd& x);

}  // namespace cbsim::qp
