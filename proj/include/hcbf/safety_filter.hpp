#pragma once

#include "hcbf/barrier.hpp"
#include "hcbf/qp_solver.hpp"

#include <chrono>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

namespace hcbf {

enum class FilterMode { Strict, Relaxed };
enum class EmergencyPolicy { Stop };
enum class FilterStatus { Nominal, Relaxing, Emergency };
enum class EmergencyReason { None, Infeasible, IterationLimit, DegenerateDirection };

inline std::string_view to_string(FilterMode m) { return m == FilterMode::Strict ? "strict" : "relaxed"; }

inline std::string_view to_string(FilterStatus s)
{
  switch (s) {
    case FilterStatus::Nominal: return "nominal";
    case FilterStatus::Relaxing: return "relaxing";
    case FilterStatus::Emergency: return "emergency";
  }
  return "emergency";
}

inline std::string_view to_string(EmergencyReason r)
{
  switch (r) {
    case EmergencyReason::None: return "none";
    case EmergencyReason::Infeasible: return "infeasible";
    case EmergencyReason::IterationLimit: return "iteration_limit";
    case EmergencyReason::DegenerateDirection: return "degenerate_direction";
  }
  return "none";
}

struct FilterConfig
{
  FilterMode mode = FilterMode::Relaxed;
  double perf_weight = 200.0;
  std::vector<int> constrained_points;  ///< empty means every control point
  double epsilon = kDefaultSafetyMargin;
  EmergencyPolicy emergency_policy = EmergencyPolicy::Stop;
  QpSettings qp;
  /// When > 0, the velocity box is also limited to (j_lb - q) / H .. (j_ub - q) / H so the commanded
  /// motion never runs into a joint limit. 0 keeps the plain velocity box.
  double joint_limit_horizon = 0.0;

  std::vector<int> points_for(const KinematicChain& chain) const
  {
    return constrained_points.empty() ? all_points(chain) : constrained_points;
  }

  void validate(const KinematicChain& chain) const
  {
    if (!(perf_weight > 0.0) || !std::isfinite(perf_weight)) throw ConfigError("filter.perf_weight", "must be > 0");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("filter.epsilon", "must be >= 0");
    for (const int j : constrained_points) {
      if (j < 0 || j >= chain.num_points()) {
        throw ConfigError("filter.constrained_points", "index " + std::to_string(j) + " out of range");
      }
    }
    if (!(joint_limit_horizon >= 0.0) || !std::isfinite(joint_limit_horizon)) {
      throw ConfigError("filter.joint_limit_horizon", "must be >= 0");
    }
    if (!(qp.kkt_tol > 0.0) || !(qp.feas_tol > 0.0) || qp.max_iter < 1) {
      throw ConfigError("filter.qp", "tolerances must be > 0 and max_iter >= 1");
    }
  }
};

struct SolveStats
{
  int iterations = 0;
  double wall_us = 0.0;  ///< constraint build plus solve
};

struct SafeCommand
{
  VecX q_dot_safe;
  std::vector<double> deltas;  ///< one per obstacle, in input order; always 0 for priority 0
  FilterStatus status = FilterStatus::Nominal;
  EmergencyReason reason = EmergencyReason::None;
  std::optional<QpStatus> qp_status;
  double objective = 0.0;
  SolveStats stats;
  ConstraintSet constraints;
};

struct VelocityBox
{
  VecX lower;
  VecX upper;
};

/// Joint velocity limits, optionally shrunk so that q + H qd stays inside the joint limits.
inline VelocityBox velocity_box(const KinematicChain& chain, const Eigen::Ref<const VecX>& q, double horizon = 0.0)
{
  VelocityBox box{chain.vel_lower(), chain.vel_upper()};
  if (horizon > 0.0) {
    chain.check_configuration(q);
    const VecX lo = (chain.joint_lower() - q) / horizon;
    const VecX hi = (chain.joint_upper() - q) / horizon;
    // zero stays admissible even if q sits slightly outside a limit
    box.lower = box.lower.cwiseMax(lo.cwiseMin(0.0));
    box.upper = box.upper.cwiseMin(hi.cwiseMax(0.0));
  }
  return box;
}

/// min w ||qd - qd_perf||^2 s.t. row . qd >= rhs, box.lower <= qd <= box.upper (velocity limits by default).
inline QpProblem build_strict_qp(const Eigen::Ref<const VecX>& q_dot_perf, const ConstraintSet& cs,
                                 const KinematicChain& chain, double perf_weight = 200.0,
                                 const std::optional<VelocityBox>& box = std::nullopt)
{
  const auto n = chain.dof();
  if (q_dot_perf.size() != n) throw ArgumentError("q_dot_perf has the wrong length");
  QpProblem p;
  p.H = 2.0 * perf_weight * MatX::Identity(n, n);
  p.f = -2.0 * perf_weight * q_dot_perf;
  p.G.resize(static_cast<Eigen::Index>(cs.rows.size()), n);
  p.g.resize(static_cast<Eigen::Index>(cs.rows.size()));
  for (std::size_t r = 0; r < cs.rows.size(); ++r) {
    p.G.row(static_cast<Eigen::Index>(r)) = cs.rows[r].row.transpose();
    p.g[static_cast<Eigen::Index>(r)] = cs.rows[r].rhs;
  }
  p.lb = box ? box->lower : chain.vel_lower();
  p.ub = box ? box->upper : chain.vel_upper();
  return p;
}

/**
 * Strict problem extended by one relaxation variable per slot of `cs`.
 *
 * Variables are [qd; delta]. Cost adds beta_i delta_i^2, relaxable rows become
 * row . qd + delta_i >= rhs, and delta_i lives in [0, delta_cap_i].
 */
inline QpProblem build_relaxed_qp(const Eigen::Ref<const VecX>& q_dot_perf, const ConstraintSet& cs,
                                  const KinematicChain& chain, std::span<const Obstacle> obstacles,
                                  double perf_weight = 200.0, const std::optional<VelocityBox>& box = std::nullopt)
{
  const QpProblem strict = build_strict_qp(q_dot_perf, cs, chain, perf_weight, box);
  const auto n = chain.dof();
  const auto s = cs.num_slots();
  if (s == 0) return strict;
  const auto m = n + s;
  QpProblem p;
  p.H = MatX::Zero(m, m);
  p.H.topLeftCorner(n, n) = strict.H;
  p.f = VecX::Zero(m);
  p.f.head(n) = strict.f;
  p.lb.resize(m);
  p.ub.resize(m);
  p.lb.head(n) = strict.lb;
  p.ub.head(n) = strict.ub;
  for (int k = 0; k < s; ++k) {
    const auto& obs = obstacles[static_cast<std::size_t>(cs.slot_obstacle[static_cast<std::size_t>(k)])];
    p.H(n + k, n + k) = 2.0 * obs.beta;
    p.lb[n + k] = 0.0;
    p.ub[n + k] = obs.delta_cap;
  }
  p.G = MatX::Zero(strict.num_rows(), m);
  p.G.leftCols(n) = strict.G;
  p.g = strict.g;
  for (std::size_t r = 0; r < cs.rows.size(); ++r) {
    if (cs.rows[r].relax_slot) p.G(static_cast<Eigen::Index>(r), n + *cs.rows[r].relax_slot) = 1.0;
  }
  return p;
}

/// Plain-text dump: dimensions line, then H, f, G, g, lb, ub blocks (inf for missing bounds).
inline void write_qp(std::ostream& os, const QpProblem& p)
{
  const Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, " ", "\n");
  os << "# vars " << p.num_vars() << " rows " << p.num_rows() << "\n";
  os << "H\n" << p.H.format(fmt) << "\nf\n" << p.f.transpose().format(fmt) << "\nG\n";
  if (p.num_rows() > 0) os << p.G.format(fmt) << "\n";
  os << "g\n" << p.g.transpose().format(fmt) << "\nlb\n" << p.lb.transpose().format(fmt);
  os << "\nub\n" << p.ub.transpose().format(fmt) << "\n";
}

/// One QP per tick around a nominal command. Owns a solver workspace and the last solution.
class SafetyFilter
{
public:
  explicit SafetyFilter(FilterConfig config = {}) : config_(std::move(config)), solver_(config_.qp) {}

  const FilterConfig& config() const { return config_; }

  /// Drop the warm start, e.g. between independent snapshots.
  void reset() { warm_.reset(); }

  /// Problem solved on the last call, for --dump-qp.
  const std::optional<QpProblem>& last_problem() const { return last_problem_; }
  void keep_problems(bool on) { keep_problems_ = on; }

  SafeCommand filter(const KinematicChain& chain, const Eigen::Ref<const VecX>& q,
                     const Eigen::Ref<const VecX>& q_dot_perf, std::span<const Obstacle> obstacles)
  {
    const auto start = std::chrono::steady_clock::now();
    last_problem_.reset();
    SafeCommand out;
    out.deltas.assign(obstacles.size(), 0.0);
    const auto n = chain.dof();
    const auto points = config_.points_for(chain);

    try {
      out.constraints = build_constraints(chain, q, obstacles, points, config_.epsilon);
    } catch (const DegenerateDirection&) {
      emergency(out, n, EmergencyReason::DegenerateDirection);
      finish(out, start);
      return out;
    }

    const bool relaxed = config_.mode == FilterMode::Relaxed && out.constraints.num_slots() > 0;
    const VelocityBox box = velocity_box(chain, q, config_.joint_limit_horizon);
    QpProblem problem = relaxed
                            ? build_relaxed_qp(q_dot_perf, out.constraints, chain, obstacles, config_.perf_weight, box)
                            : build_strict_qp(q_dot_perf, out.constraints, chain, config_.perf_weight, box);
    std::optional<VecX> warm;
    if (warm_ && warm_->size() == problem.num_vars()) warm = warm_;
    const QpSolution sol = solver_.solve(problem, warm);
    if (keep_problems_) last_problem_ = problem;
    out.qp_status = sol.status;
    out.stats.iterations = sol.iterations;

    if (sol.status != QpStatus::Optimal) {
      emergency(out, n, sol.status == QpStatus::Infeasible ? EmergencyReason::Infeasible
                                                           : EmergencyReason::IterationLimit);
      warm_.reset();
      finish(out, start);
      return out;
    }

    warm_ = sol.x;
    out.objective = sol.objective;
    out.q_dot_safe = sol.x.head(n).cwiseMax(box.lower).cwiseMin(box.upper);
    bool relaxing = false;
    for (int k = 0; relaxed && k < out.constraints.num_slots(); ++k) {
      const auto oi = static_cast<std::size_t>(out.constraints.slot_obstacle[static_cast<std::size_t>(k)]);
      const double d = std::clamp(sol.x[n + k], 0.0, obstacles[oi].delta_cap) + 0.0;  // no -0 in logs
      out.deltas[oi] = d;
      if (d > 10.0 * config_.qp.kkt_tol) relaxing = true;
    }
    out.status = relaxing ? FilterStatus::Relaxing : FilterStatus::Nominal;
    finish(out, start);
    return out;
  }

private:
  void emergency(SafeCommand& out, Eigen::Index n, EmergencyReason why) const
  {
    out.status = FilterStatus::Emergency;
    out.reason = why;
    switch (config_.emergency_policy) {
      case EmergencyPolicy::Stop: out.q_dot_safe = VecX::Zero(n); break;
    }
  }

  static void finish(SafeCommand& out, std::chrono::steady_clock::time_point start)
  {
    out.stats.wall_us =
        std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
  }

  FilterConfig config_;
  QpSolver solver_;
  std::optional<VecX> warm_;
  bool keep_problems_ = false;
  std::optional<QpProblem> last_problem_;
};

}  // namespace hcbf
