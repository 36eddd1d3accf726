#pragma once

#include "hcbf/safety_filter.hpp"

#include <optional>
#include <vector>

namespace hcbf {

/// Per-obstacle slice of one tick.
struct ObstacleSample
{
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double h_min = 0.0;          ///< min barrier value over the constrained points
  double clearance_min = 0.0;  ///< min of center distance - R_j - R_i over the constrained points
  double ee_distance = 0.0;    ///< end-effector to obstacle center
  double delta = 0.0;
};

/// Everything logged for one control tick. Positions are taken before the state update.
struct StepRecord
{
  double t = 0.0;
  VecX q;
  VecX qd_safe;
  VecX qd_perf;
  Vec3 p_ee = Vec3::Zero();
  Vec3 v_ee = Vec3::Zero();  ///< J_ee q_dot_safe
  Vec3 p_desired = Vec3::Zero();
  std::vector<ObstacleSample> obstacles;
  FilterStatus status = FilterStatus::Nominal;
  EmergencyReason reason = EmergencyReason::None;
  std::optional<QpStatus> qp_status;
  bool clamped = false;  ///< joint-limit clamp fired on this tick's update
  double solve_us = 0.0;
};

}  // namespace hcbf
