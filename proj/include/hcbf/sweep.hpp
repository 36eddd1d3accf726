#pragma once

// Relaxation-weight sweeps: solve the relaxed filter for a list of beta values and compare
// against the strict filter at the same states.

#include "hcbf/world.hpp"

#include <limits>

namespace hcbf {

/// Filter inputs frozen at one tick of a rollout.
struct Snapshot
{
  double t = 0.0;
  VecX q;
  VecX qd_perf;
  std::vector<Obstacle> obstacles;
};

/// Obstacles of `cfg` moved to the positions and velocities logged in `rec`.
inline std::vector<Obstacle> obstacles_at(const ScenarioConfig& cfg, const StepRecord& rec)
{
  if (rec.obstacles.size() != cfg.obstacles.size()) throw ArgumentError("record does not match the config");
  std::vector<Obstacle> out;
  for (std::size_t i = 0; i < cfg.obstacles.size(); ++i) {
    Obstacle o = cfg.obstacles[i].obstacle;
    o.position = rec.obstacles[i].position;
    o.velocity = rec.obstacles[i].velocity;
    out.push_back(std::move(o));
  }
  return out;
}

/// Rolls the scenario forward to the tick nearest `time` and returns the filter inputs of that tick.
inline Snapshot snapshot_at(const ScenarioConfig& cfg, std::uint64_t seed, double time)
{
  if (!(time >= 0.0) || !std::isfinite(time)) throw ConfigError("sweep.snapshot_time", "must be >= 0");
  World world(cfg, seed);
  const auto tick = static_cast<std::size_t>(std::llround(time / cfg.sim.dt));
  StepRecord rec = world.step();
  for (std::size_t k = 0; k < tick; ++k) rec = world.step();
  return {rec.t, rec.q, rec.qd_perf, obstacles_at(cfg, rec)};
}

/// Same obstacles with every relaxable (priority >= 1) weight replaced by beta.
inline std::vector<Obstacle> with_beta(std::vector<Obstacle> obstacles, double beta)
{
  for (auto& o : obstacles)
    if (o.priority >= 1) o.beta = beta;
  return obstacles;
}

inline ScenarioConfig with_beta(ScenarioConfig cfg, double beta)
{
  for (auto& s : cfg.obstacles)
    if (s.obstacle.priority >= 1) s.obstacle.beta = beta;
  cfg.filter.mode = FilterMode::Relaxed;
  return cfg;
}

struct SweepRow
{
  double beta = 0.0;
  double delta_max = 0.0;
  double qd_distance = std::numeric_limits<double>::quiet_NaN();  ///< NaN when nothing was comparable
  std::size_t compared = 0;                                        ///< ticks where both filters solved
  FilterStatus relaxed_status = FilterStatus::Nominal;             ///< snapshot mode
  std::optional<QpStatus> strict_status;                           ///< snapshot mode
  double rmse = 0.0;                                               ///< rollout mode
  std::size_t emergency_ticks = 0;                                 ///< rollout mode
};

inline void check_betas(const std::vector<double>& betas)
{
  if (betas.empty()) throw ConfigError("sweep.betas", "expected a non-empty list");
  for (const double b : betas) {
    if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("sweep.betas", "every beta must be finite and > 0");
  }
}

/// One relaxed solve per beta at a fixed snapshot; distance to the strict solution when it exists.
inline std::vector<SweepRow> sweep_snapshot(const ScenarioConfig& cfg, const Snapshot& snap,
                                            const std::vector<double>& betas)
{
  check_betas(betas);
  FilterConfig strict_cfg = cfg.filter;
  strict_cfg.mode = FilterMode::Strict;
  SafetyFilter strict(strict_cfg);
  const SafeCommand ref = strict.filter(cfg.chain, snap.q, snap.qd_perf, snap.obstacles);

  FilterConfig relaxed_cfg = cfg.filter;
  relaxed_cfg.mode = FilterMode::Relaxed;
  std::vector<SweepRow> rows;
  for (const double beta : betas) {
    SafetyFilter relaxed(relaxed_cfg);
    const auto obs = with_beta(snap.obstacles, beta);
    const SafeCommand cmd = relaxed.filter(cfg.chain, snap.q, snap.qd_perf, obs);
    SweepRow row;
    row.beta = beta;
    row.relaxed_status = cmd.status;
    row.strict_status = ref.qp_status;
    for (const double d : cmd.deltas) row.delta_max = std::max(row.delta_max, d);
    if (ref.status != FilterStatus::Emergency && cmd.status != FilterStatus::Emergency) {
      row.qd_distance = (cmd.q_dot_safe - ref.q_dot_safe).norm();
      row.compared = 1;
    }
    rows.push_back(row);
  }
  return rows;
}

/**
 * One relaxed rollout per beta. At every logged tick the strict filter is solved at the same state;
 * qd_distance is the largest gap over ticks where both produced a solution.
 */
inline std::vector<SweepRow> sweep_rollout(const ScenarioConfig& cfg, std::uint64_t seed, const std::vector<double>& betas)
{
  check_betas(betas);
  FilterConfig strict_cfg = cfg.filter;
  strict_cfg.mode = FilterMode::Strict;
  std::vector<SweepRow> rows;
  for (const double beta : betas) {
    const ScenarioConfig run_cfg = with_beta(cfg, beta);
    const ScenarioResult res = run_scenario(run_cfg, seed);
    SweepRow row;
    row.beta = beta;
    row.rmse = res.metrics.rmse;
    row.emergency_ticks = res.metrics.emergency_ticks;
    for (const auto& o : res.metrics.obstacles) row.delta_max = std::max(row.delta_max, o.delta_max);
    SafetyFilter strict(strict_cfg);
    double worst = 0.0;
    for (const auto& rec : res.records) {
      if (rec.status == FilterStatus::Emergency) continue;
      const SafeCommand ref = strict.filter(run_cfg.chain, rec.q, rec.qd_perf, obstacles_at(run_cfg, rec));
      if (ref.status == FilterStatus::Emergency) continue;
      worst = std::max(worst, (rec.qd_safe - ref.q_dot_safe).norm());
      ++row.compared;
    }
    if (row.compared > 0) row.qd_distance = worst;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace hcbf
