#include "cbsim/qp.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbsim::qp {

namespace {

constexpr double kSigma = 1e-6;   // proximal regularization
constexpr double kAlpha = 1.6;    // over-relaxation
constexpr double kEqRhoScale = 1e3;
constexpr double kInfeasTol = 1e-9;

bool is_diagonal(const Eigen::SparseMatrix<double>& m) {
  for (int k = 0; k < m.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it) {
      if (it.row() != it.col() && it.value() != 0.0) return false;
    }
  }
  return true;
}

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::iteration_limit: return "iteration-limit";
  }
  return "unknown";
}

void QuadraticProgram::validate() const {
  const int n = num_vars();
  if (q_matrix.rows() != n || q_matrix.cols() != n) {
    throw std::invalid_argument("QuadraticProgram: q_matrix dimension mismatch");
  }
  if (lower.size() != n || upper.size() != n) {
    throw std::invalid_argument("QuadraticProgram: bound dimension mismatch");
  }
  if (eq_matrix.rows() != eq_rhs.size() || (eq_matrix.rows() > 0 && eq_matrix.cols() != n)) {
    throw std::invalid_argument("QuadraticProgram: equality block mismatch");
  }
  if (ineq_matrix.rows() != ineq_rhs.size() ||
      (ineq_matrix.rows() > 0 && ineq_matrix.cols() != n)) {
    throw std::invalid_argument("QuadraticProgram: inequality block mismatch");
  }
  for (int j : binary_indices) {
    if (j < 0 || j >= n) throw std::invalid_argument("QuadraticProgram: binary index out of range");
    if (lower[j] > 1.0 || upper[j] < 0.0) {
      throw std::invalid_argument("QuadraticProgram: binary variable bounds exclude {0,1}");
    }
  }
  // PSD check: O(n) for diagonal costs (the production problems), dense
  // eigen-solve otherwise (small test instances only).
  if (is_diagonal(q_matrix)) {
    for (int k = 0; k < q_matrix.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(q_matrix, k); it; ++it) {
        if (it.value() < -1e-9) {
          throw std::invalid_argument("QuadraticProgram: cost matrix not PSD");
        }
      }
    }
  } else {
    Eigen::MatrixXd dense = Eigen::MatrixXd(q_matrix);
    dense = 0.5 * (dense + dense.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-9) {
      throw std::invalid_argument("QuadraticProgram: cost matrix not PSD");
    }
  }
}

double QuadraticProgram::objective_value(const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(q_matrix * x) + c_vector.dot(x);
}

namespace {

/// Operator-splitting engine over the row form  l <= Cx <= u  with
/// C = [A_eq; A_in; I]. The KKT factorization depends only on (Q, C, rho),
/// so branch-and-bound nodes that merely pin variable bounds reuse it.
class AdmmEngine {
 public:
  AdmmEngine(const QuadraticProgram& qp, const SolverOptions& opts)
      : opts_(opts), n_(qp.num_vars()) {
    m_eq_ = static_cast<int>(qp.eq_matrix.rows());
    m_in_ = static_cast<int>(qp.ineq_matrix.rows());
    m_ = m_eq_ + m_in_ + n_;

    q_mat_ = qp.q_matrix;
    q_vec_ = qp.c_vector;

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(qp.eq_matrix.nonZeros() +
                                           qp.ineq_matrix.nonZeros() + n_));
    for (int k = 0; k < qp.eq_matrix.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(qp.eq_matrix, k); it; ++it) {
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
      }
    }
    for (int k = 0; k < qp.ineq_matrix.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(qp.ineq_matrix, k); it; ++it) {
        trips.emplace_back(m_eq_ + static_cast<int>(it.row()), static_cast<int>(it.col()),
                           it.value());
      }
    }
    for (int j = 0; j < n_; ++j) trips.emplace_back(m_eq_ + m_in_ + j, j, 1.0);
    c_mat_.resize(m_, n_);
    c_mat_.setFromTriplets(trips.begin(), trips.end());
    c_mat_t_ = c_mat_.transpose();

    l_.resize(m_);
    u_.resize(m_);
    for (int i = 0; i < m_eq_; ++i) l_[i] = u_[i] = qp.eq_rhs[i];
    for (int i = 0; i < m_in_; ++i) {
      l_[m_eq_ + i] = -kInf;
      u_[m_eq_ + i] = qp.ineq_rhs[i];
    }
    for (int j = 0; j < n_; ++j) {
      l_[m_eq_ + m_in_ + j] = qp.lower[j];
      u_[m_eq_ + m_in_ + j] = qp.upper[j];
    }

    x_.setZero(n_);
    z_.setZero(m_);
    y_.setZero(m_);
    rho_bar_ = 0.1;
    build_rho();
    factorize();
  }

  void set_variable_bound(int var, double lo, double hi) {
    l_[m_eq_ + m_in_ + var] = lo;
    u_[m_eq_ + m_in_ + var] = hi;
  }

  void warm_start(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& z) {
    x_ = x;
    y_ = y;
    z_ = z;
  }

  const Eigen::VectorXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::VectorXd& z() const { return z_; }
  const Eigen::VectorXd& row_lower() const { return l_; }
  const Eigen::VectorXd& row_upper() const { return u_; }
  int rows() const { return m_; }
  int eq_rows() const { return m_eq_; }
  int ineq_rows() const { return m_in_; }

  SolveResult run() {
    SolveResult res;
    next_polish_ = 200;
    Eigen::VectorXd x_prev = x_, y_prev = y_;
    Eigen::VectorXd rhs(n_ + m_), sol(n_ + m_), xt(n_), zt(m_), z_cand(m_);

    int it = 0;
    for (; it < opts_.max_iterations; ++it) {
      rhs.head(n_) = kSigma * x_ - q_vec_;
      rhs.tail(m_) = z_ - y_.cwiseQuotient(rho_);
      sol = ldlt_.solve(rhs);
      xt = sol.head(n_);
      zt = z_ + (sol.tail(m_) - y_).cwiseQuotient(rho_);

      x_prev = x_;
      y_prev = y_;
      x_ = kAlpha * xt + (1.0 - kAlpha) * x_;
      z_cand = kAlpha * zt + (1.0 - kAlpha) * z_;  // pre-projection combination
      z_ = (z_cand + y_.cwiseQuotient(rho_)).cwiseMax(l_).cwiseMin(u_);
      y_ = y_ + rho_.cwiseProduct(z_cand - z_);

      if ((it + 1) % 10 == 0 || it + 1 == opts_.max_iterations) {
        const Eigen::VectorXd cx = c_mat_ * x_;
        const Eigen::VectorXd qx = q_mat_ * x_;
        const Eigen::VectorXd cty = c_mat_t_ * y_;
        const double rp = inf_norm(cx - z_);
        const double rd = inf_norm(qx + q_vec_ + cty);
        const double sp = opts_.eps_abs +
                          opts_.eps_rel * std::max(inf_norm(cx), inf_norm(z_));
        const double sd = opts_.eps_abs +
                          opts_.eps_rel * std::max({inf_norm(qx), inf_norm(cty), inf_norm(q_vec_)});
        if (rp <= sp && rd <= sd) {
          res.status = SolveStatus::optimal;
          break;
        }
        if (check_primal_infeasible(y_ - y_prev)) {
          res.status = SolveStatus::infeasible;
          res.iterations = it + 1;
          return res;
        }
        if (check_dual_infeasible(x_ - x_prev)) {
          res.status = SolveStatus::unbounded;
          res.iterations = it + 1;
          return res;
        }
        // Degenerate linear programs reach the optimal face long before the
        // residuals settle; once the iterate is close, an active-set polish
        // usually lands the exact solution.
        if (it + 1 >= next_polish_ && rp <= 1e-4 * std::max(1.0, inf_norm(z_))) {
          polish();
          if (kkt_residual() <= 1e-8) {
            res.status = SolveStatus::optimal;
            res.iterations = it + 1;
            res.x = x_;
            res.dual = y_;
            res.kkt_residual = kkt_residual();
            return res;
          }
          next_polish_ = it + 1 + 500;
        }
        // adaptive step-size rebalancing
        if ((it + 1) % 50 == 0 && rp > 0 && rd > 0) {
          const double ratio = std::sqrt((rp / std::max(sp, 1e-30)) /
                                         (rd / std::max(sd, 1e-30)));
          if (ratio > 2.0 || ratio < 0.5) {
            rho_bar_ = std::clamp(rho_bar_ * ratio, 1e-6, 1e6);
            build_rho();
            factorize();
          }
        }
      }
    }
    res.iterations = std::min(it + 1, opts_.max_iterations);
    if (res.status != SolveStatus::optimal) res.status = SolveStatus::iteration_limit;

    polish();
    res.x = x_;
    res.dual = y_;
    res.kkt_residual = kkt_residual();
    if (res.status == SolveStatus::iteration_limit &&
        res.kkt_residual <= opts_.kkt_tolerance) {
      res.status = SolveStatus::optimal;  // polish rescued a slow tail
    }
    return res;
  }

  /// Direct KKT residual of the current (x, y, z) triple: stationarity,
  /// primal feasibility, dual sign and complementary slackness.
  double kkt_residual() const {
    const Eigen::VectorXd cx = c_mat_ * x_;
    double r = inf_norm(q_mat_ * x_ + q_vec_ + c_mat_t_ * y_);
    for (int i = 0; i < m_; ++i) {
      r = std::max(r, cx[i] - u_[i]);
      r = std::max(r, l_[i] - cx[i]);
      if (l_[i] < u_[i]) {
        if (y_[i] > 0.0) {
          r = std::max(r, std::isfinite(u_[i]) ? y_[i] * std::abs(u_[i] - cx[i])
                                               : y_[i]);
        } else if (y_[i] < 0.0) {
          r = std::max(r, std::isfinite(l_[i]) ? -y_[i] * std::abs(cx[i] - l_[i])
                                               : -y_[i]);
        }
      }
    }
    return r;
  }

 private:
  void build_rho() {
    rho_.resize(m_);
    for (int i = 0; i < m_; ++i) {
      const bool eq = std::isfinite(l_[i]) && std::isfinite(u_[i]) && l_[i] == u_[i];
      rho_[i] = (i < m_eq_ || eq) ? rho_bar_ * kEqRhoScale : rho_bar_;
    }
  }

  void factorize() {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(q_mat_.nonZeros() + c_mat_.nonZeros() + n_ + m_));
    for (int k = 0; k < q_mat_.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(q_mat_, k); it; ++it) {
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
      }
    }
    for (int j = 0; j < n_; ++j) trips.emplace_back(j, j, kSigma);
    for (int k = 0; k < c_mat_.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(c_mat_, k); it; ++it) {
        trips.emplace_back(n_ + static_cast<int>(it.row()), static_cast<int>(it.col()),
                           it.value());
        trips.emplace_back(static_cast<int>(it.col()), n_ + static_cast<int>(it.row()),
                           it.value());
      }
    }
    for (int i = 0; i < m_; ++i) trips.emplace_back(n_ + i, n_ + i, -1.0 / rho_[i]);
    Eigen::SparseMatrix<double> kkt(n_ + m_, n_ + m_);
    kkt.setFromTriplets(trips.begin(), trips.end());
    ldlt_.compute(kkt);
    if (ldlt_.info() != Eigen::Success) {
      throw std::runtime_error("qp: KKT factorization failed");
    }
  }

  bool check_primal_infeasible(const Eigen::VectorXd& dy) const {
    const double norm = inf_norm(dy);
    if (norm < 1e-14) return false;
    const Eigen::VectorXd d = dy / norm;
    if (inf_norm(c_mat_t_ * d) > kInfeasTol) return false;
    double support = 0.0;
    for (int i = 0; i < m_; ++i) {
      const double dp = std::max(d[i], 0.0), dm = std::min(d[i], 0.0);
      if (dp > kInfeasTol && !std::isfinite(u_[i])) return false;
      if (dm < -kInfeasTol && !std::isfinite(l_[i])) return false;
      if (std::isfinite(u_[i])) support += u_[i] * dp;
      if (std::isfinite(l_[i])) support += l_[i] * dm;
    }
    return support < -kInfeasTol;
  }

  bool check_dual_infeasible(const Eigen::VectorXd& dx) const {
    const double norm = inf_norm(dx);
    if (norm < 1e-14) return false;
    const Eigen::VectorXd d = dx / norm;
    if (inf_norm(q_mat_ * d) > kInfeasTol) return false;
    if (q_vec_.dot(d) > -kInfeasTol) return false;
    const Eigen::VectorXd cd = c_mat_ * d;
    for (int i = 0; i < m_; ++i) {
      if (std::isfinite(u_[i]) && cd[i] > kInfeasTol) return false;
      if (std::isfinite(l_[i]) && cd[i] < -kInfeasTol) return false;
    }
    return true;
  }

  /// Solve the equality-constrained KKT system on the detected active set
  /// and keep the result when it lowers the measured residual. Wrong-signed
  /// multipliers drop their rows and the reduced set is re-solved, a few
  /// passes of a miniature active-set cleanup.
  void polish() {
    const Eigen::VectorXd cx = c_mat_ * x_;
    std::vector<int> act_rows;
    std::vector<double> act_rhs;
    std::vector<int> side;  // -1 lower, +1 upper, 0 equality
    for (int i = 0; i < m_; ++i) {
      const bool eq = std::isfinite(l_[i]) && std::isfinite(u_[i]) && l_[i] == u_[i];
      if (eq) {
        act_rows.push_back(i);
        act_rhs.push_back(u_[i]);
        side.push_back(0);
        continue;
      }
      const double span = std::max(1.0, std::max(std::abs(l_[i]), std::abs(u_[i])));
      if (std::isfinite(l_[i]) && (y_[i] < -1e-9 || cx[i] - l_[i] <= 1e-8 * span)) {
        act_rows.push_back(i);
        act_rhs.push_back(l_[i]);
        side.push_back(-1);
      } else if (std::isfinite(u_[i]) && (y_[i] > 1e-9 || u_[i] - cx[i] <= 1e-8 * span)) {
        act_rows.push_back(i);
        act_rhs.push_back(u_[i]);
        side.push_back(1);
      }
    }

    Eigen::SparseMatrix<double, Eigen::RowMajor> c_rm(c_mat_);
    const double reg = 1e-11;

    for (int pass = 0; pass < 4; ++pass) {
      const int ma = static_cast<int>(act_rows.size());
      std::vector<Eigen::Triplet<double>> trips;
      for (int k = 0; k < q_mat_.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(q_mat_, k); it; ++it) {
          trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        }
      }
      for (int j = 0; j < n_; ++j) trips.emplace_back(j, j, reg);
      for (int a = 0; a < ma; ++a) {
        const int i = act_rows[static_cast<std::size_t>(a)];
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(c_rm, i); it; ++it) {
          trips.emplace_back(n_ + a, static_cast<int>(it.col()), it.value());
          trips.emplace_back(static_cast<int>(it.col()), n_ + a, it.value());
        }
        trips.emplace_back(n_ + a, n_ + a, -reg);
      }
      Eigen::SparseMatrix<double> kkt(n_ + ma, n_ + ma);
      kkt.setFromTriplets(trips.begin(), trips.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> fact(kkt);
      if (fact.info() != Eigen::Success) return;

      Eigen::VectorXd rhs(n_ + ma);
      rhs.head(n_) = -q_vec_;
      for (int a = 0; a < ma; ++a) rhs[n_ + a] = act_rhs[static_cast<std::size_t>(a)];
      Eigen::VectorXd sol = fact.solve(rhs);
      for (int refine = 0; refine < 3; ++refine) {
        Eigen::VectorXd resid = rhs - kkt * sol;
        resid.head(n_) -= reg * sol.head(n_);  // undo the +-reg perturbation
        if (ma > 0) resid.tail(ma) += reg * sol.tail(ma);
        sol += fact.solve(resid);
      }

      std::vector<std::size_t> wrong;
      for (int a = 0; a < ma; ++a) {
        const double mult = sol[n_ + a];
        if ((side[static_cast<std::size_t>(a)] == -1 && mult > 1e-7) ||
            (side[static_cast<std::size_t>(a)] == 1 && mult < -1e-7)) {
          wrong.push_back(static_cast<std::size_t>(a));
        }
      }
      if (wrong.empty()) {
        Eigen::VectorXd y_new = Eigen::VectorXd::Zero(m_);
        for (int a = 0; a < ma; ++a) y_new[act_rows[static_cast<std::size_t>(a)]] = sol[n_ + a];
        const Eigen::VectorXd x_old = x_, y_old = y_, z_old = z_;
        const double before = kkt_residual();
        x_ = sol.head(n_);
        y_ = y_new;
        z_ = (c_mat_ * x_).cwiseMax(l_).cwiseMin(u_);
        if (kkt_residual() > before) {
          x_ = x_old;
          y_ = y_old;
          z_ = z_old;
        }
        return;
      }
      for (auto it = wrong.rbegin(); it != wrong.rend(); ++it) {
        act_rows.erase(act_rows.begin() + static_cast<long>(*it));
        act_rhs.erase(act_rhs.begin() + static_cast<long>(*it));
        side.erase(side.begin() + static_cast<long>(*it));
      }
    }
  }

  SolverOptions opts_;
  int n_ = 0, m_eq_ = 0, m_in_ = 0, m_ = 0;
  Eigen::SparseMatrix<double> q_mat_, c_mat_, c_mat_t_;
  Eigen::VectorXd q_vec_;
  Eigen::VectorXd l_, u_;
  Eigen::VectorXd x_, z_, y_;
  Eigen::VectorXd rho_;
  double rho_bar_ = 0.1;
  int next_polish_ = 200;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

}  // namespace

SolveResult solve_continuous(const QuadraticProgram& qp, const SolverOptions& opts) {
  if (opts.verify_psd) qp.validate();
  AdmmEngine engine(qp, opts);
  SolveResult res = engine.run();
  if (res.status == SolveStatus::optimal || res.status == SolveStatus::iteration_limit) {
    res.objective = qp.objective_value(res.x);
  }
  return res;
}

namespace {

struct Node {
  std::vector<int> fixed;  // -1 free, 0 or 1
  Eigen::VectorXd x, y, z;
};

}  // namespace

SolveResult solve_with_binaries(const QuadraticProgram& qp, const SolverOptions& opts) {
  if (qp.binary_indices.empty()) return solve_continuous(qp, opts);
  if (static_cast<int>(qp.binary_indices.size()) > opts.max_binaries) {
    throw std::invalid_argument("solve_with_binaries: binary count " +
                                std::to_string(qp.binary_indices.size()) +
                                " exceeds limit " + std::to_string(opts.max_binaries));
  }
  if (opts.verify_psd) qp.validate();

  const int nb = static_cast<int>(qp.binary_indices.size());
  AdmmEngine engine(qp, opts);

  const auto apply = [&](const std::vector<int>& fixed) {
    for (int b = 0; b < nb; ++b) {
      const int var = qp.binary_indices[static_cast<std::size_t>(b)];
      if (fixed[static_cast<std::size_t>(b)] < 0) {
        engine.set_variable_bound(var, std::max(0.0, qp.lower[var]),
                                  std::min(1.0, qp.upper[var]));
      } else {
        const double v = static_cast<double>(fixed[static_cast<std::size_t>(b)]);
        engine.set_variable_bound(var, v, v);
      }
    }
  };

  SolveResult best;
  bool have_best = false;
  bool any_feasible_leaf = false;
  int nodes = 0;

  std::vector<Node> stack;
  stack.push_back({std::vector<int>(static_cast<std::size_t>(nb), -1),
                   Eigen::VectorXd(), Eigen::VectorXd(), Eigen::VectorXd()});

  while (!stack.empty()) {
    Node node = std::move(stack.back());
    stack.pop_back();
    apply(node.fixed);
    if (node.x.size() > 0) engine.warm_start(node.x, node.y, node.z);
    SolveResult rel = engine.run();
    ++nodes;
    if (rel.status == SolveStatus::infeasible) continue;
    if (rel.status == SolveStatus::unbounded) {
      rel.nodes_explored = nodes;
      return rel;  // a relaxation without a finite bound: report as-is
    }
    const double bound = qp.objective_value(rel.x);
    if (have_best && bound >= best.objective - 1e-9) continue;

    int branch = -1;
    double worst_frac = opts.integrality_tol;
    for (int b = 0; b < nb; ++b) {
      if (node.fixed[static_cast<std::size_t>(b)] >= 0) continue;
      const double v = rel.x[qp.binary_indices[static_cast<std::size_t>(b)]];
      const double frac = std::abs(v - std::round(v));
      if (frac > worst_frac + 1e-12) {
        worst_frac = frac;
        branch = b;
      }
    }

    if (branch < 0) {
      // integral relaxation: candidate incumbent
      any_feasible_leaf = true;
      if (!have_best || bound < best.objective - 1e-12) {
        best = rel;
        best.objective = bound;
        have_best = true;
      }
      continue;
    }

    // probe: fix every free binary to its rounded value for an early incumbent
    {
      std::vector<int> rounded = node.fixed;
      for (int b = 0; b < nb; ++b) {
        if (rounded[static_cast<std::size_t>(b)] < 0) {
          rounded[static_cast<std::size_t>(b)] = static_cast<int>(
              std::round(rel.x[qp.binary_indices[static_cast<std::size_t>(b)]]));
        }
      }
      apply(rounded);
      engine.warm_start(rel.x, rel.dual, engine.z());
      SolveResult probe = engine.run();
      ++nodes;
      if (probe.status == SolveStatus::optimal) {
        any_feasible_leaf = true;
        const double obj = qp.objective_value(probe.x);
        if (!have_best || obj < best.objective - 1e-12) {
          best = probe;
          best.objective = obj;
          have_best = true;
        }
      }
    }

    const int preferred = static_cast<int>(
        std::round(rel.x[qp.binary_indices[static_cast<std::size_t>(branch)]]));
    for (int v : {1 - preferred, preferred}) {  // preferred explored first (LIFO)
      Node child;
      child.fixed = node.fixed;
      child.fixed[static_cast<std::size_t>(branch)] = v;
      child.x = rel.x;
      child.y = rel.dual;
      child.z = engine.z();
      stack.push_back(std::move(child));
    }
  }

  if (!have_best) {
    SolveResult res;
    res.status = any_feasible_leaf ? SolveStatus::iteration_limit : SolveStatus::infeasible;
    res.nodes_explored = nodes;
    return res;
  }
  best.nodes_explored = nodes;
  return best;
}

double verify_kkt(const QuadraticProgram& qp, const Eigen::VectorXd& x) {
  const int n = qp.num_vars();
  if (x.size() != n) throw std::invalid_argument("verify_kkt: dimension mismatch");

  double primal = 0.0;
  const Eigen::VectorXd eq_res =
      qp.eq_matrix.rows() > 0 ? Eigen::VectorXd(qp.eq_matrix * x - qp.eq_rhs)
                              : Eigen::VectorXd();
  for (int i = 0; i < eq_res.size(); ++i) primal = std::max(primal, std::abs(eq_res[i]));
  const Eigen::VectorXd in_val =
      qp.ineq_matrix.rows() > 0 ? Eigen::VectorXd(qp.ineq_matrix * x) : Eigen::VectorXd();
  for (int i = 0; i < in_val.size(); ++i) {
    primal = std::max(primal, in_val[i] - qp.ineq_rhs[i]);
  }
  for (int j = 0; j < n; ++j) {
    primal = std::max(primal, qp.lower[j] - x[j]);
    primal = std::max(primal, x[j] - qp.upper[j]);
  }

  // Active-set stationarity: fit multipliers by least squares, then clamp
  // wrong-sign inequality duals and measure the remaining gradient.
  const double act_tol = 1e-7;
  struct ActiveGrad {
    Eigen::VectorXd g;
    bool signed_dual;  // true: multiplier must be >= 0
  };
  std::vector<ActiveGrad> act;
  for (int i = 0; i < qp.eq_matrix.rows(); ++i) {
    act.push_back({Eigen::VectorXd(qp.eq_matrix.row(i).transpose()), false});
  }
  for (int i = 0; i < qp.ineq_matrix.rows(); ++i) {
    const double scale = std::max(1.0, std::abs(qp.ineq_rhs[i]));
    if (std::abs(in_val[i] - qp.ineq_rhs[i]) <= act_tol * scale) {
      act.push_back({Eigen::VectorXd(qp.ineq_matrix.row(i).transpose()), true});
    }
  }
  for (int j = 0; j < n; ++j) {
    const double scale = std::max(1.0, std::abs(x[j]));
    if (std::isfinite(qp.lower[j]) && std::abs(x[j] - qp.lower[j]) <= act_tol * scale) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
      g[j] = -1.0;
      act.push_back({std::move(g), true});
    }
    if (std::isfinite(qp.upper[j]) && std::abs(x[j] - qp.upper[j]) <= act_tol * scale) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
      g[j] = 1.0;
      act.push_back({std::move(g), true});
    }
  }

  const Eigen::VectorXd grad = qp.q_matrix * x + qp.c_vector;
  if (act.empty()) return std::max(primal, inf_norm(grad));

  const int ma = static_cast<int>(act.size());
  Eigen::MatrixXd basis(n, ma);
  for (int a = 0; a < ma; ++a) basis.col(a) = act[static_cast<std::size_t>(a)].g;

  Eigen::VectorXd mult = basis.colPivHouseholderQr().solve(-grad);
  // one clamping pass: drop negative inequality multipliers and re-fit
  std::vector<int> keep;
  for (int a = 0; a < ma; ++a) {
    if (!act[static_cast<std::size_t>(a)].signed_dual || mult[a] > -1e-10) keep.push_back(a);
  }
  if (static_cast<int>(keep.size()) != ma) {
    Eigen::MatrixXd sub(n, static_cast<int>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) sub.col(static_cast<int>(k)) = basis.col(keep[k]);
    Eigen::VectorXd sub_mult = sub.colPivHouseholderQr().solve(-grad);
    Eigen::VectorXd fitted = grad + sub * sub_mult;
    double stat = inf_norm(fitted);
    for (std::size_t k = 0; k < keep.size(); ++k) {
      if (act[static_cast<std::size_t>(keep[k])].signed_dual) {
        stat = std::max(stat, -std::min(sub_mult[static_cast<int>(k)], 0.0));
      }
    }
    return std::max(primal, stat);
  }
  Eigen::VectorXd fitted = grad + basis * mult;
  double stat = inf_norm(fitted);
  for (int a = 0; a < ma; ++a) {
    if (act[static_cast<std::size_t>(a)].signed_dual) {
      stat = std::max(stat, -std::min(mult[a], 0.0));
    }
  }
  return std::max(primal, stat);
}

}  // namespace cbsim::qp
