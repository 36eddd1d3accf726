#pragma once

#include "hcbf/metrics.hpp"
#include "hcbf/perf_controller.hpp"
#include "hcbf/presets.hpp"
#include "hcbf/safety_filter.hpp"

#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <variant>

namespace hcbf {

// ---------------------------------------------------------------- obstacle motion

struct StaticMotion
{};

/// Piecewise-linear path through timestamped waypoints. Holds the end points outside the table.
struct ScriptedMotion
{
  std::vector<double> times;
  std::vector<Vec3> points;

  void validate(const std::string& field) const
  {
    if (times.empty() || times.size() != points.size()) {
      throw ConfigError(field, "needs matching, non-empty time and point lists");
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (!std::isfinite(times[i]) || !points[i].allFinite()) throw ConfigError(field, "non-finite waypoint");
      if (i > 0 && !(times[i] > times[i - 1])) throw ConfigError(field, "timestamps must be strictly increasing");
    }
  }

  /// Position and slope at t.
  std::pair<Vec3, Vec3> at(double t) const
  {
    if (t <= times.front()) return {points.front(), Vec3::Zero()};
    if (t >= times.back()) return {points.back(), Vec3::Zero()};
    const auto hi = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
    const auto lo = hi - 1;
    const double span = times[hi] - times[lo];
    const Vec3 slope = (points[hi] - points[lo]) / span;
    return {points[lo] + (t - times[lo]) * slope, slope};
  }
};

/// Pursuit of the end-effector: v = k (p_ee - p_obs) - b v_obs, clamped to |v| <= v_max.
struct SpringDamperMotion
{
  double k = 0.5;
  double b = 1.0;
  double v_max = 0.05;

  void validate(const std::string& field) const
  {
    if (!(k >= 0.0) || !std::isfinite(k)) throw ConfigError(field + ".k", "must be >= 0");
    if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError(field + ".b", "must be >= 0");
    if (!(v_max > 0.0) || !std::isfinite(v_max)) throw ConfigError(field + ".v_max", "must be > 0");
  }
};

/// Scripted path read from a CSV of t,x,y,z rows.
struct ReplayMotion
{
  std::string path;
  ScriptedMotion table;
};

using ObstacleMotion = std::variant<StaticMotion, ScriptedMotion, SpringDamperMotion, ReplayMotion>;

inline Vec3 spring_damper_velocity(const Vec3& p_ee, const Vec3& p_obs, const Vec3& v_obs, double k, double b,
                                   double v_max)
{
  if (!(v_max > 0.0)) throw ArgumentError("v_max must be > 0");
  Vec3 v = k * (p_ee - p_obs) - b * v_obs;
  const double n = v.norm();
  if (n > v_max) v *= v_max / n;
  return v;
}

/// Header line optional; blank lines and lines starting with '#' are skipped.
inline ScriptedMotion load_replay_csv(const std::string& path, const std::string& field)
{
  std::ifstream in(path);
  if (!in) throw ConfigError(field, "cannot open replay file '" + path + "'");
  ScriptedMotion m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double t, x, y, z;
    if (!(ss >> t >> x >> y >> z)) {
      if (m.times.empty() && lineno == 1) continue;  // header
      throw ConfigError(field, path + ":" + std::to_string(lineno) + ": expected t,x,y,z");
    }
    m.times.push_back(t);
    m.points.emplace_back(x, y, z);
  }
  m.validate(field);
  return m;
}

// ---------------------------------------------------------------- scenario description

/// Random start: uniform direction, distance uniform in [min, max] from the initial end-effector.
struct ShellPlacement
{
  double min_distance = 0.75;
  double max_distance = 1.2;
};

struct ObstacleSpec
{
  Obstacle obstacle;  ///< position is used when no placement is given
  ObstacleMotion motion = StaticMotion{};
  std::optional<ShellPlacement> placement;
};

struct SimConfig
{
  double dt = 1e-3;
  double duration = 10.0;
  std::uint64_t seed = 0;
};

struct ScenarioConfig
{
  std::string name = "custom";
  std::string chain_preset = "franka7";
  KinematicChain chain = presets::franka7();
  VecX q0 = presets::franka7_home();
  TrajectoryParams trajectory;
  bool trajectory_relative = true;  ///< center is an offset; the path passes the initial end-effector at t = 0
  PerfConfig perf;
  FilterConfig filter;
  std::vector<ObstacleSpec> obstacles;
  SimConfig sim;
  RoiRule roi_rule = RoiRule::NearOrClosing;

  std::vector<std::string> obstacle_ids() const
  {
    std::vector<std::string> ids;
    for (const auto& o : obstacles) ids.push_back(o.obstacle.id);
    return ids;
  }

  void validate() const
  {
    if (q0.size() != chain.dof()) throw ConfigError("q0", "expected " + std::to_string(chain.dof()) + " entries");
    if (!q0.allFinite()) throw ConfigError("q0", "must be finite");
    perf.validate(chain.dof());
    filter.validate(chain);
    if (!(sim.dt > 0.0) || !std::isfinite(sim.dt)) throw ConfigError("sim.dt", "must be > 0");
    if (!(sim.duration >= 0.0) || !std::isfinite(sim.duration)) throw ConfigError("sim.duration", "must be >= 0");
    if (std::llround(sim.duration / sim.dt) < 1) throw ConfigError("sim.duration", "shorter than one tick");
    if (!(trajectory.period > 0.0)) throw ConfigError("trajectory.period", "must be > 0");
    if (!(trajectory.size >= 0.0)) throw ConfigError("trajectory.size", "must be >= 0");
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
      const auto field = "obstacles[" + std::to_string(i) + "]";
      const auto& spec = obstacles[i];
      spec.obstacle.validate(field);
      for (std::size_t j = 0; j < i; ++j) {
        if (obstacles[j].obstacle.id == spec.obstacle.id) throw ConfigError(field + ".id", "duplicate id");
      }
      if (spec.placement) {
        const auto& pl = *spec.placement;
        if (!(pl.min_distance >= 0.0) || !(pl.max_distance >= pl.min_distance) || !std::isfinite(pl.max_distance)) {
          throw ConfigError(field + ".placement", "need 0 <= min_distance <= max_distance");
        }
      }
      std::visit(
          [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, ScriptedMotion>) m.validate(field + ".motion");
            if constexpr (std::is_same_v<M, SpringDamperMotion>) m.validate(field + ".motion");
            if constexpr (std::is_same_v<M, ReplayMotion>) m.table.validate(field + ".motion");
          },
          spec.motion);
    }
  }
};

// ---------------------------------------------------------------- simulator

/**
 * Closed loop of one scenario. Each step():
 *  1. sets obstacle velocities from their motion models,
 *  2. computes q_dot_perf and filters it,
 *  3. logs the tick,
 *  4. integrates q by explicit Euler and clamps it to the joint limits,
 *  5. moves the obstacles (Euler for pursuit and static, table lookup for scripted and replay).
 */
class World
{
public:
  World(const ScenarioConfig& config, std::uint64_t seed)
      : cfg_(config), filter_(config.filter), q_(config.q0), points_(config.filter.points_for(config.chain))
  {
    cfg_.validate();
    const int ee = cfg_.chain.end_effector_index();
    const Vec3 p_ee0 = forward_kinematics(cfg_.chain, q_)[static_cast<std::size_t>(ee)];
    traj_ = cfg_.trajectory;
    if (cfg_.trajectory_relative) traj_.center = p_ee0 + cfg_.trajectory.center - start_offset(cfg_.trajectory);

    std::mt19937_64 rng(seed);
    const auto positions = forward_kinematics(cfg_.chain, q_);
    for (std::size_t i = 0; i < cfg_.obstacles.size(); ++i) {
      const auto& spec = cfg_.obstacles[i];
      Obstacle o = spec.obstacle;
      if (const auto* s = std::get_if<ScriptedMotion>(&spec.motion)) o.position = s->at(0.0).first;
      if (const auto* r = std::get_if<ReplayMotion>(&spec.motion)) o.position = r->table.at(0.0).first;
      if (spec.placement) o.position = place(rng, *spec.placement, p_ee0, positions, o, i);
      o.velocity = Vec3::Zero();
      obstacles_.push_back(std::move(o));
    }
  }

  double t() const { return t_; }
  const VecX& q() const { return q_; }
  const std::vector<Obstacle>& obstacles() const { return obstacles_; }
  const TrajectoryParams& trajectory() const { return traj_; }
  SafetyFilter& filter() { return filter_; }

  StepRecord step()
  {
    const auto& chain = cfg_.chain;
    const int ee = chain.end_effector_index();
    const auto kin = kinematics(chain, q_);
    const Vec3 p_ee = kin[static_cast<std::size_t>(ee)].position;

    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
      auto& o = obstacles_[i];
      std::visit(
          [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, StaticMotion>) o.velocity = Vec3::Zero();
            if constexpr (std::is_same_v<M, SpringDamperMotion>) {
              o.velocity = spring_damper_velocity(p_ee, o.position, o.velocity, m.k, m.b, m.v_max);
            }
            if constexpr (std::is_same_v<M, ScriptedMotion>) std::tie(o.position, o.velocity) = m.at(t_);
            if constexpr (std::is_same_v<M, ReplayMotion>) std::tie(o.position, o.velocity) = m.table.at(t_);
          },
          cfg_.obstacles[i].motion);
    }

    const TrackingTarget target = sample(traj_, t_);
    const VecX qd_perf = performance_command(chain, {q_, t_}, target, cfg_.perf);
    const SafeCommand cmd = filter_.filter(chain, q_, qd_perf, obstacles_);

    StepRecord rec;
    rec.t = t_;
    rec.q = q_;
    rec.qd_safe = cmd.q_dot_safe;
    rec.qd_perf = qd_perf;
    rec.p_ee = p_ee;
    rec.v_ee = kin[static_cast<std::size_t>(ee)].jacobian * cmd.q_dot_safe;
    rec.p_desired = target.position;
    rec.status = cmd.status;
    rec.reason = cmd.reason;
    rec.qp_status = cmd.qp_status;
    rec.solve_us = cmd.stats.wall_us;
    rec.obstacles.resize(obstacles_.size());
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
      const auto& o = obstacles_[i];
      auto& s = rec.obstacles[i];
      s.position = o.position;
      s.velocity = o.velocity;
      s.delta = cmd.deltas[i];
      s.ee_distance = (p_ee - o.position).norm();
      s.h_min = kUnbounded;
      s.clearance_min = kUnbounded;
      for (const int j : points_) {
        const auto& cp = chain.control_points()[static_cast<std::size_t>(j)];
        const double dist = (kin[static_cast<std::size_t>(j)].position - o.position).norm();
        s.clearance_min = std::min(s.clearance_min, dist - cp.radius - o.radius);
        s.h_min = std::min(s.h_min, dist - cp.radius - o.radius - cfg_.filter.epsilon);
      }
    }

    const VecX next = q_ + cfg_.sim.dt * cmd.q_dot_safe;
    q_ = next.cwiseMax(chain.joint_lower()).cwiseMin(chain.joint_upper());
    rec.clamped = q_ != next;
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
      const auto& motion = cfg_.obstacles[i].motion;
      if (std::holds_alternative<SpringDamperMotion>(motion)) obstacles_[i].position += cfg_.sim.dt * obstacles_[i].velocity;
    }
    ++tick_;
    t_ = static_cast<double>(tick_) * cfg_.sim.dt;
    return rec;
  }

  /// Number of ticks covering [0, duration).
  std::size_t num_ticks() const { return static_cast<std::size_t>(std::llround(cfg_.sim.duration / cfg_.sim.dt)); }

private:
  Vec3 place(std::mt19937_64& rng, const ShellPlacement& pl, const Vec3& center, const std::vector<Vec3>& points,
             const Obstacle& o, std::size_t index) const
  {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ud(pl.min_distance, pl.max_distance);
    for (int attempt = 0; attempt < 10000; ++attempt) {
      Vec3 dir(nd(rng), nd(rng), nd(rng));
      const double n = dir.norm();
      if (!(n > 1e-12)) continue;
      const Vec3 p = center + ud(rng) * dir / n;
      bool clear = true;
      for (const int j : points_) {
        const auto& cp = cfg_.chain.control_points()[static_cast<std::size_t>(j)];
        if (barrier_value(points[static_cast<std::size_t>(j)], p, cp.radius, o.radius, cfg_.filter.epsilon) <= 0.0) {
          clear = false;
          break;
        }
      }
      if (clear) return p;
    }
    throw ConfigError("obstacles[" + std::to_string(index) + "].placement",
                      "no start position clear of the robot after 10000 draws");
  }

  ScenarioConfig cfg_;
  SafetyFilter filter_;
  VecX q_;
  std::vector<int> points_;
  TrajectoryParams traj_;
  std::vector<Obstacle> obstacles_;
  double t_ = 0.0;
  std::size_t tick_ = 0;
};

struct ScenarioResult
{
  std::vector<StepRecord> records;
  ScenarioMetrics metrics;
  std::vector<Obstacle> initial_obstacles;
};

inline ScenarioResult run_scenario(const ScenarioConfig& config, std::uint64_t seed)
{
  World world(config, seed);
  ScenarioResult out;
  out.initial_obstacles = world.obstacles();
  MetricsAccumulator acc(config.obstacle_ids(), config.roi_rule);
  const auto n = world.num_ticks();
  out.records.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.records.push_back(world.step());
    acc.add(out.records.back());
  }
  out.metrics = acc.result();
  return out;
}

// ---------------------------------------------------------------- coverage search

/// One obstacle of a coverage template: barrier value and inward speed ranges at the target point.
struct CoverageObstacle
{
  std::string id;
  int priority = 0;
  double beta = 0.0;
  double radius = 0.05;
  double gamma = 1.0;
  double h_min = 0.0;
  double h_max = 0.1;
  double speed_min = 0.0;
  double speed_max = 0.1;
};

enum class CoveragePlacement { Antipodal, Independent };

/**
 * Random snapshot generator. Each sample draws q uniformly inside the joint limits and places the
 * obstacles around control point `point` at the drawn barrier values, moving toward it at the drawn
 * speeds. Antipodal puts the first obstacle along a random direction u and every other one along -u.
 */
struct CoverageTemplate
{
  std::string chain_preset = "franka7";
  int point = -1;  ///< -1 means the end-effector
  std::vector<CoverageObstacle> obstacles;
  CoveragePlacement placement = CoveragePlacement::Antipodal;
  double epsilon = kDefaultSafetyMargin;
  double perf_weight = 200.0;
};

struct CoverageSample
{
  std::size_t index = 0;
  VecX q;
  std::vector<Obstacle> obstacles;
  QpStatus strict = QpStatus::Optimal;
  std::optional<QpStatus> relaxed;
  double priority0_margin = kUnbounded;  ///< min over priority-0 rows of row . qd - rhs in the relaxed solution
  std::vector<double> deltas;
};

struct CoverageReport
{
  std::size_t samples = 0;
  std::vector<CoverageSample> infeasible;
};

inline CoverageReport coverage_search(const KinematicChain& chain, const CoverageTemplate& tpl, std::size_t n_samples,
                                      std::uint64_t seed)
{
  if (n_samples == 0) throw ArgumentError("coverage_search needs n_samples > 0");
  if (tpl.obstacles.empty()) throw ArgumentError("coverage template has no obstacles");
  const int point = tpl.point < 0 ? chain.end_effector_index() : tpl.point;
  if (point >= chain.num_points()) throw ArgumentError("coverage point index out of range");
  const std::vector<int> points{point};
  const auto& cp = chain.control_points()[static_cast<std::size_t>(point)];

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto unit = [&] {
    Vec3 v;
    do v = Vec3(nd(rng), nd(rng), nd(rng));
    while (!(v.norm() > 1e-9));
    return Vec3(v.normalized());
  };

  QpSolver solver;
  CoverageReport report;
  report.samples = n_samples;
  VecX q(chain.dof());
  for (std::size_t s = 0; s < n_samples; ++s) {
    for (int i = 0; i < chain.dof(); ++i) {
      q[i] = chain.joint_lower()[i] + u01(rng) * (chain.joint_upper()[i] - chain.joint_lower()[i]);
    }
    const Vec3 p = forward_kinematics(chain, q)[static_cast<std::size_t>(point)];
    const Vec3 u = unit();
    std::vector<Obstacle> obs;
    for (std::size_t i = 0; i < tpl.obstacles.size(); ++i) {
      const auto& t = tpl.obstacles[i];
      const Vec3 dir = tpl.placement == CoveragePlacement::Independent ? unit() : (i == 0 ? u : Vec3(-u));
      const double h = t.h_min + u01(rng) * (t.h_max - t.h_min);
      const double speed = t.speed_min + u01(rng) * (t.speed_max - t.speed_min);
      Obstacle o;
      o.id = t.id;
      o.priority = t.priority;
      o.beta = t.beta;
      o.radius = t.radius;
      o.gamma = t.gamma;
      o.position = p + (h + cp.radius + t.radius + tpl.epsilon) * dir;
      o.velocity = -speed * dir;
      obs.push_back(std::move(o));
    }
    const auto cs = build_constraints(chain, q, obs, points, tpl.epsilon);
    const VecX qd_perf = VecX::Zero(chain.dof());
    const auto strict = solver.solve(build_strict_qp(qd_perf, cs, chain, tpl.perf_weight));
    if (strict.status != QpStatus::Infeasible) continue;

    CoverageSample cs_out;
    cs_out.index = s;
    cs_out.q = q;
    cs_out.obstacles = obs;
    cs_out.strict = strict.status;
    cs_out.deltas.assign(obs.size(), 0.0);
    if (cs.num_slots() > 0) {
      const auto relaxed = solver.solve(build_relaxed_qp(qd_perf, cs, chain, obs, tpl.perf_weight));
      cs_out.relaxed = relaxed.status;
      if (relaxed.status == QpStatus::Optimal) {
        const VecX qd = relaxed.x.head(chain.dof());
        for (const auto& row : cs.rows) {
          if (!row.relax_slot) cs_out.priority0_margin = std::min(cs_out.priority0_margin, row.row.dot(qd) - row.rhs);
        }
        for (int k = 0; k < cs.num_slots(); ++k) {
          cs_out.deltas[static_cast<std::size_t>(cs.slot_obstacle[static_cast<std::size_t>(k)])] =
              relaxed.x[chain.dof() + k];
        }
      }
    }
    report.infeasible.push_back(std::move(cs_out));
  }
  return report;
}

}  // namespace hcbf
