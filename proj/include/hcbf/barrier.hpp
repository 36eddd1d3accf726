#pragma once

#include "hcbf/chain.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hcbf {

/// Separation below which the constraint normal cannot be oriented.
inline constexpr double kTieEpsilon = 1e-6;
inline constexpr double kDefaultSafetyMargin = 0.05;

/// Thrown when a control point and an obstacle center coincide (within kTieEpsilon).
class DegenerateDirection : public std::runtime_error
{
public:
  DegenerateDirection(std::string obstacle_id, int point_index)
      : std::runtime_error("degenerate barrier direction between obstacle '" + obstacle_id +
                           "' and control point " + std::to_string(point_index)),
        obstacle_id_(std::move(obstacle_id)), point_index_(point_index)
  {}

  const std::string& obstacle_id() const { return obstacle_id_; }
  int point_index() const { return point_index_; }

private:
  std::string obstacle_id_;
  int point_index_;
};

/// Prioritized spherical unsafe region. Priority 0 is never relaxed.
struct Obstacle
{
  std::string id;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double radius = 0.0;
  int priority = 0;
  double beta = 0.0;             ///< relaxation penalty, used when priority > 0
  double delta_cap = kUnbounded; ///< upper bound of the relaxation variable
  double gamma = 1.0;            ///< class-K slope, alpha(h) = gamma h

  bool relaxable() const { return priority > 0; }

  void validate(const std::string& field) const
  {
    if (!position.allFinite()) throw ConfigError(field + ".position", "must be finite");
    if (!velocity.allFinite()) throw ConfigError(field + ".velocity", "must be finite");
    if (!(radius >= 0.0) || !std::isfinite(radius)) throw ConfigError(field + ".radius", "must be >= 0");
    if (priority < 0) throw ConfigError(field + ".priority", "must be >= 0");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError(field + ".gamma", "must be > 0");
    if (!(delta_cap >= 0.0)) throw ConfigError(field + ".delta_cap", "must be >= 0");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError(field + ".beta", "must be >= 0");
    if (relaxable() && !(beta > 0.0)) {
      throw ConfigError(field + ".beta", "must be > 0 for a relaxable (priority >= 1) obstacle");
    }
  }
};

/// One linearized barrier inequality: row . q_dot (+ delta) >= rhs.
struct BarrierConstraint
{
  VecX row;
  double rhs = 0.0;
  double h = 0.0;
  Vec3 direction = Vec3::Zero();
  int obstacle_index = 0;
  int point_index = 0;
  std::optional<int> relax_slot;
};

/// All rows of one tick plus the slot -> obstacle map of the relaxation variables.
struct ConstraintSet
{
  std::vector<BarrierConstraint> rows;
  std::vector<int> slot_obstacle;

  int num_slots() const { return static_cast<int>(slot_obstacle.size()); }
};

/// ||p_j - p_i|| - (R_j + R_i) - epsilon.
inline double barrier_value(const Vec3& p_point, const Vec3& p_obstacle, double r_point, double r_obstacle,
                            double epsilon)
{
  return (p_point - p_obstacle).norm() - (r_point + r_obstacle) - epsilon;
}

/// Unit vector from the obstacle center to the control point.
inline Vec3 barrier_direction(const Vec3& p_point, const Vec3& p_obstacle)
{
  const Vec3 d = p_point - p_obstacle;
  const double dist = d.norm();
  if (!(dist > kTieEpsilon)) throw DegenerateDirection("", -1);
  return d / dist;
}

/**
 * Build one row per (constrained point, obstacle) pair.
 *
 * row = A_ij J_j(q), rhs = -gamma_i h_ij + A_ij p_dot_i. Every relaxable obstacle owns one slot
 * shared by all of its rows; slots are numbered in obstacle order.
 */
inline ConstraintSet build_constraints(const KinematicChain& chain, const Eigen::Ref<const VecX>& q,
                                       std::span<const Obstacle> obstacles, std::span<const int> point_indices,
                                       double epsilon = kDefaultSafetyMargin)
{
  const auto kin = kinematics(chain, q);
  ConstraintSet out;
  std::vector<std::optional<int>> slot_of(obstacles.size());
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    if (obstacles[i].relaxable()) {
      slot_of[i] = out.num_slots();
      out.slot_obstacle.push_back(static_cast<int>(i));
    }
  }
  out.rows.reserve(point_indices.size() * obstacles.size());
  for (const int j : point_indices) {
    if (j < 0 || j >= chain.num_points()) {
      throw ArgumentError("constrained point index " + std::to_string(j) + " out of range");
    }
    const auto& cp = chain.control_points()[static_cast<std::size_t>(j)];
    const auto& pk = kin[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
      const auto& obs = obstacles[i];
      Vec3 dir;
      try {
        dir = barrier_direction(pk.position, obs.position);
      } catch (const DegenerateDirection&) {
        throw DegenerateDirection(obs.id, j);
      }
      BarrierConstraint c;
      c.direction = dir;
      c.h = barrier_value(pk.position, obs.position, cp.radius, obs.radius, epsilon);
      c.row = pk.jacobian.transpose() * dir;
      c.rhs = -obs.gamma * c.h + dir.dot(obs.velocity);
      c.obstacle_index = static_cast<int>(i);
      c.point_index = j;
      c.relax_slot = slot_of[i];
      out.rows.push_back(std::move(c));
    }
  }
  return out;
}

/// Index list 0..n-1, used when a configuration constrains every control point.
inline std::vector<int> all_points(const KinematicChain& chain)
{
  std::vector<int> idx(static_cast<std::size_t>(chain.num_points()));
  for (int k = 0; k < chain.num_points(); ++k) idx[static_cast<std::size_t>(k)] = k;
  return idx;
}

}  // namespace hcbf
