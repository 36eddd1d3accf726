#pragma once

#include "hcbf/common.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <optional>
#include <string_view>
#include <vector>

namespace hcbf {

/**
 * Dense strictly convex QP
 *
 *   minimize    1/2 x^T H x + f^T x
 *   subject to  G x >= g,  lb <= x <= ub.
 *
 * Box entries equal to kUnbounded (either sign) are absent.
 */
struct QpProblem
{
  MatX H;
  VecX f;
  MatX G;
  VecX g;
  VecX lb;
  VecX ub;

  Eigen::Index num_vars() const { return H.rows(); }
  Eigen::Index num_rows() const { return G.rows(); }

  /// Problem with no inequality rows and an unbounded box.
  static QpProblem unconstrained(MatX h, VecX f)
  {
    const auto m = h.rows();
    return {std::move(h), std::move(f), MatX(0, m), VecX(0), VecX::Constant(m, -kUnbounded),
            VecX::Constant(m, kUnbounded)};
  }
};

enum class QpStatus { Optimal, Infeasible, IterationLimit };

inline std::string_view to_string(QpStatus s)
{
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::IterationLimit: return "iteration_limit";
  }
  return "iteration_limit";
}

struct QpSolution
{
  VecX x;
  QpStatus status = QpStatus::IterationLimit;
  double kkt_residual = kUnbounded;
  int iterations = 0;
  double objective = kUnbounded;
  VecX lambda;     ///< multipliers of G x >= g (>= 0)
  VecX box_lower;  ///< multipliers of x >= lb (>= 0)
  VecX box_upper;  ///< multipliers of x <= ub (>= 0)
};

struct QpSettings
{
  double kkt_tol = 1e-6;
  double feas_tol = 1e-8;
  int max_iter = 2000;
};

/// max(||Hx + f - G^T lambda - box_lower + box_upper||_inf, violation, |complementarity|, -min multiplier)
inline double kkt_residual(const QpProblem& p, const QpSolution& s)
{
  const VecX stat = p.H * s.x + p.f - p.G.transpose() * s.lambda - s.box_lower + s.box_upper;
  double res = stat.lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < p.num_rows(); ++i) {
    const double slack = p.G.row(i).dot(s.x) - p.g[i];
    res = std::max({res, -slack, std::abs(s.lambda[i] * slack), -s.lambda[i]});
  }
  for (Eigen::Index i = 0; i < p.num_vars(); ++i) {
    if (!is_unbounded(p.lb[i])) {
      const double slack = s.x[i] - p.lb[i];
      res = std::max({res, -slack, std::abs(s.box_lower[i] * slack), -s.box_lower[i]});
    }
    if (!is_unbounded(p.ub[i])) {
      const double slack = p.ub[i] - s.x[i];
      res = std::max({res, -slack, std::abs(s.box_upper[i] * slack), -s.box_upper[i]});
    }
  }
  return res;
}

/**
 * Goldfarb-Idnani dual active-set solver.
 *
 * Starts from the unconstrained minimizer and adds violated constraints one at a time while
 * keeping the active multipliers dual feasible. A violated constraint whose normal lies in the
 * span of the active set with no positive dual direction is a Farkas certificate of
 * infeasibility. Active-set factors are refreshed by a dense QR of L^-1 N_A after each change.
 *
 * Holds scratch storage; one instance per thread.
 */
class QpSolver
{
public:
  explicit QpSolver(QpSettings settings = {}) : settings_(settings) {}

  const QpSettings& settings() const { return settings_; }

  QpSolution solve(const QpProblem& problem, const std::optional<VecX>& warm_start = std::nullopt)
  {
    validate(problem);
    const auto m = problem.num_vars();
    load_constraints(problem);

    QpSolution sol;
    sol.lambda = VecX::Zero(problem.num_rows());
    sol.box_lower = VecX::Zero(m);
    sol.box_upper = VecX::Zero(m);

    if (trivially_infeasible_) {
      sol.x = VecX::Zero(m);
      sol.status = QpStatus::Infeasible;
      return sol;
    }

    Eigen::LLT<MatX> llt(problem.H);
    if (llt.info() != Eigen::Success) throw ArgumentError("QP cost matrix is not positive definite");
    const MatX l_factor = llt.matrixL();
    if (!(l_factor.diagonal().array() > 0.0).all()) {
      throw ArgumentError("QP cost matrix is not positive definite");
    }
    l_inv_ = l_factor.triangularView<Eigen::Lower>().solve(MatX::Identity(m, m));

    VecX x = -llt.solve(problem.f);
    active_.clear();
    mult_.clear();
    refactor(m);

    const auto total = normals_.cols();
    std::vector<char> preferred(static_cast<std::size_t>(total), 0);
    if (warm_start && warm_start->size() == m && warm_start->allFinite()) {
      const VecX s0 = normals_.transpose() * (*warm_start) - bounds_;
      for (Eigen::Index i = 0; i < total; ++i) preferred[static_cast<std::size_t>(i)] = std::abs(s0[i]) <= 1e-9;
    }
    std::vector<char> skipped(static_cast<std::size_t>(total), 0);

    int iterations = 0;
    bool optimal = false;
    bool infeasible = false;
    while (iterations < settings_.max_iter) {
      const int p = pick_violated(x, preferred, skipped);
      if (p < 0) {
        optimal = true;
        break;
      }
      double u_new = 0.0;
      const VecX n_p = normals_.col(p);
      bool added = false;
      while (!added && iterations < settings_.max_iter) {
        ++iterations;
        const auto q = static_cast<Eigen::Index>(active_.size());
        const VecX d = q_.transpose() * (l_inv_ * n_p);
        const VecX d2 = d.tail(m - q);
        const VecX z = l_inv_.transpose() * (q_.rightCols(m - q) * d2);
        VecX r(q);
        if (q > 0) r = r_.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));

        double t1 = kUnbounded;
        int drop = -1;
        const double r_tol = 1e-14 * (1.0 + (q > 0 ? r.lpNorm<Eigen::Infinity>() : 0.0));
        for (Eigen::Index j = 0; j < q; ++j) {
          if (r[j] > r_tol) {
            const double ratio = mult_[static_cast<std::size_t>(j)] / r[j];
            if (ratio < t1) {
              t1 = ratio;
              drop = static_cast<int>(j);
            }
          }
        }
        const double s_p = n_p.dot(x) - bounds_[p];
        const double zn = z.dot(n_p);
        const bool step_in_primal = d2.norm() > 1e-11 * std::max(1.0, d.norm()) && zn > 0.0;
        const double t2 = step_in_primal ? -s_p / zn : kUnbounded;

        if (is_unbounded(t1) && is_unbounded(t2)) {
          if (s_p < -settings_.feas_tol) {
            infeasible = true;
          } else {
            skipped[static_cast<std::size_t>(p)] = 1;
          }
          break;
        }
        if (is_unbounded(t2)) {
          for (Eigen::Index j = 0; j < q; ++j) mult_[static_cast<std::size_t>(j)] -= t1 * r[j];
          u_new += t1;
          remove_active(drop, m);
          continue;
        }
        const double t = std::min(t1, t2);
        x += t * z;
        for (Eigen::Index j = 0; j < q; ++j) mult_[static_cast<std::size_t>(j)] -= t * r[j];
        u_new += t;
        if (t2 <= t1) {
          active_.push_back(p);
          mult_.push_back(u_new);
          refactor(m);
          added = true;
        } else {
          remove_active(drop, m);
        }
      }
      if (infeasible) break;
    }

    sol.iterations = iterations;
    if (infeasible) {
      sol.x = x;
      sol.status = QpStatus::Infeasible;
      sol.objective = objective(problem, x);
      return sol;
    }
    if (!optimal) {
      sol.x = x;
      sol.status = QpStatus::IterationLimit;
      sol.objective = objective(problem, x);
      return sol;
    }

    refine(problem, x);
    sol.x = x;
    for (std::size_t j = 0; j < active_.size(); ++j) {
      const int c = active_[j];
      const double u = std::max(0.0, mult_[j]) / scale_[c];
      const int src = source_[c];
      if (src < problem.num_rows()) {
        sol.lambda[src] = u;
      } else if (src < problem.num_rows() + m) {
        sol.box_lower[src - problem.num_rows()] = u;
      } else {
        sol.box_upper[src - problem.num_rows() - m] = u;
      }
    }
    sol.objective = objective(problem, x);
    sol.kkt_residual = kkt_residual(problem, sol);
    sol.status = sol.kkt_residual <= settings_.kkt_tol ? QpStatus::Optimal : QpStatus::IterationLimit;
    return sol;
  }

private:
  static double objective(const QpProblem& p, const VecX& x) { return 0.5 * x.dot(p.H * x) + p.f.dot(x); }

  static void validate(const QpProblem& p)
  {
    const auto m = p.H.rows();
    if (m == 0 || p.H.cols() != m) throw ArgumentError("QP cost matrix must be square and non-empty");
    if (p.f.size() != m || p.lb.size() != m || p.ub.size() != m) {
      throw ArgumentError("QP vector sizes do not match the cost matrix");
    }
    if (p.G.cols() != m || p.G.rows() != p.g.size()) throw ArgumentError("QP inequality block has bad shape");
    if (!p.H.allFinite() || !p.f.allFinite() || !p.G.allFinite() || !p.g.allFinite()) {
      throw ArgumentError("QP data contains NaN or infinite entries");
    }
    if (p.lb.hasNaN() || p.ub.hasNaN()) throw ArgumentError("QP box bounds contain NaN");
    for (Eigen::Index i = 0; i < m; ++i) {
      if (p.lb[i] > p.ub[i]) throw ArgumentError("QP box bound lb > ub at index " + std::to_string(i));
      if (p.lb[i] == kUnbounded || p.ub[i] == -kUnbounded) {
        throw ArgumentError("QP box bound points the wrong way at index " + std::to_string(i));
      }
    }
    const double hnorm = std::max(1.0, p.H.lpNorm<Eigen::Infinity>());
    if ((p.H - p.H.transpose()).lpNorm<Eigen::Infinity>() > 1e-10 * hnorm) {
      throw ArgumentError("QP cost matrix is not symmetric");
    }
  }

  void load_constraints(const QpProblem& p)
  {
    const auto m = p.num_vars();
    const auto k = p.num_rows();
    trivially_infeasible_ = false;
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < m; ++i) count += !is_unbounded(p.lb[i]) + !is_unbounded(p.ub[i]);
    normals_.resize(m, k + count);
    bounds_.resize(k + count);
    scale_.clear();
    source_.clear();
    Eigen::Index col = 0;
    for (Eigen::Index r = 0; r < k; ++r) {
      const double nrm = p.G.row(r).norm();
      if (nrm == 0.0) {
        if (p.g[r] > settings_.feas_tol) trivially_infeasible_ = true;
        continue;
      }
      normals_.col(col) = p.G.row(r).transpose() / nrm;
      bounds_[col] = p.g[r] / nrm;
      scale_.push_back(nrm);
      source_.push_back(static_cast<int>(r));
      ++col;
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!is_unbounded(p.lb[i])) {
        normals_.col(col) = VecX::Unit(m, i);
        bounds_[col] = p.lb[i];
        scale_.push_back(1.0);
        source_.push_back(static_cast<int>(k + i));
        ++col;
      }
      if (!is_unbounded(p.ub[i])) {
        normals_.col(col) = -VecX::Unit(m, i);
        bounds_[col] = -p.ub[i];
        scale_.push_back(1.0);
        source_.push_back(static_cast<int>(k + m + i));
        ++col;
      }
    }
    normals_.conservativeResize(m, col);
    bounds_.conservativeResize(col);
  }

  int pick_violated(const VecX& x, const std::vector<char>& preferred, const std::vector<char>& skipped) const
  {
    const VecX s = normals_.transpose() * x - bounds_;
    constexpr double kSelectTol = 1e-11;
    int best = -1;
    int best_pref = -1;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const auto ui = static_cast<std::size_t>(i);
      if (skipped[ui] || s[i] >= -kSelectTol * (1.0 + std::abs(bounds_[i]))) continue;
      if (std::find(active_.begin(), active_.end(), static_cast<int>(i)) != active_.end()) continue;
      if (best < 0 || s[i] < s[best]) best = static_cast<int>(i);
      if (preferred[ui] && (best_pref < 0 || s[i] < s[best_pref])) best_pref = static_cast<int>(i);
    }
    return best_pref >= 0 ? best_pref : best;
  }

  void refactor(Eigen::Index m)
  {
    const auto q = static_cast<Eigen::Index>(active_.size());
    if (q == 0) {
      q_ = MatX::Identity(m, m);
      r_.resize(0, 0);
      return;
    }
    MatX b(m, q);
    for (Eigen::Index j = 0; j < q; ++j) b.col(j) = l_inv_ * normals_.col(active_[static_cast<std::size_t>(j)]);
    Eigen::HouseholderQR<MatX> qr(b);
    q_ = qr.householderQ() * MatX::Identity(m, m);
    r_ = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
  }

  void remove_active(int j, Eigen::Index m)
  {
    active_.erase(active_.begin() + j);
    mult_.erase(mult_.begin() + j);
    refactor(m);
  }

  /// Re-solve the KKT system of the final active set to shed drift accumulated over the steps.
  void refine(const QpProblem& p, VecX& x)
  {
    const auto m = p.num_vars();
    const auto q = static_cast<Eigen::Index>(active_.size());
    if (q == 0) {
      x = -p.H.ldlt().solve(p.f);
      return;
    }
    MatX kkt = MatX::Zero(m + q, m + q);
    VecX rhs(m + q);
    kkt.topLeftCorner(m, m) = p.H;
    for (Eigen::Index j = 0; j < q; ++j) {
      const auto& n = normals_.col(active_[static_cast<std::size_t>(j)]);
      kkt.block(0, m + j, m, 1) = -n;
      kkt.block(m + j, 0, 1, m) = n.transpose();
      rhs[m + j] = bounds_[active_[static_cast<std::size_t>(j)]];
    }
    rhs.head(m) = -p.f;
    const VecX sol = kkt.fullPivLu().solve(rhs);
    if (!sol.allFinite()) return;
    const VecX xr = sol.head(m);
    const VecX ur = sol.tail(q);
    const VecX s_new = normals_.transpose() * xr - bounds_;
    const VecX s_old = normals_.transpose() * x - bounds_;
    const double viol_new = s_new.size() ? std::max(0.0, -s_new.minCoeff()) : 0.0;
    const double viol_old = s_old.size() ? std::max(0.0, -s_old.minCoeff()) : 0.0;
    if (ur.minCoeff() < -settings_.kkt_tol || viol_new > std::max(viol_old, settings_.feas_tol)) return;
    x = xr;
    for (Eigen::Index j = 0; j < q; ++j) mult_[static_cast<std::size_t>(j)] = std::max(0.0, ur[j]);
  }

  QpSettings settings_;
  MatX normals_;
  VecX bounds_;
  std::vector<double> scale_;
  std::vector<int> source_;
  bool trivially_infeasible_ = false;
  MatX l_inv_;
  MatX q_;
  MatX r_;
  std::vector<int> active_;
  std::vector<double> mult_;
};

/// One-shot convenience wrapper around QpSolver.
inline QpSolution solve_qp(const QpProblem& problem, const std::optional<VecX>& warm_start = std::nullopt,
                           QpSettings settings = {})
{
  QpSolver solver(settings);
  return solver.solve(problem, warm_start);
}

}  // namespace hcbf
