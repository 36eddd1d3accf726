#pragma once

#include "hcbf/chain.hpp"

#include <numbers>
#include <string_view>

namespace hcbf::presets {

/**
 * 7-DOF arm with FR3-style geometry in zero-configuration (axis, offset) form.
 *
 * Limits follow the public FR3 datasheet. The control points cover the last six links; the
 * end-effector sits 0.2104 m below the last joint (flange plus a gripper).
 */
inline KinematicChain franka7()
{
  std::vector<Joint> joints{
      {Vec3::UnitZ(), Vec3(0, 0, 0.333)},    {Vec3::UnitY(), Vec3::Zero()},
      {Vec3::UnitZ(), Vec3(0, 0, 0.316)},    {-Vec3::UnitY(), Vec3(0.0825, 0, 0)},
      {Vec3::UnitZ(), Vec3(-0.0825, 0, 0.384)}, {-Vec3::UnitY(), Vec3::Zero()},
      {-Vec3::UnitZ(), Vec3(0.088, 0, 0)},
  };
  VecX q_min(7), q_max(7), v_max(7);
  q_min << -2.7437, -1.7837, -2.9007, -3.0421, -2.8065, 0.5445, -3.0159;
  q_max << 2.7437, 1.7837, 2.9007, -0.1518, 2.8065, 4.5169, 3.0159;
  v_max << 2.62, 2.62, 2.62, 2.62, 5.26, 4.18, 5.26;
  std::vector<ControlPoint> points{
      {"upper_arm", 1, Vec3(0, 0, 0.158), 0.08, false},
      {"elbow", 3, Vec3::Zero(), 0.07, false},
      {"forearm", 3, Vec3(-0.04125, 0, 0.192), 0.06, false},
      {"wrist", 4, Vec3::Zero(), 0.06, false},
      {"flange", 6, Vec3(0, 0, -0.107), 0.05, false},
      {"ee", 6, Vec3(0, 0, -0.2104), 0.04, true},
  };
  return KinematicChain(std::move(joints), q_min, q_max, -v_max, v_max, std::move(points));
}

/// Ready pose of franka7.
inline VecX franka7_home()
{
  const double pi = std::numbers::pi;
  VecX q(7);
  q << 0.0, -pi / 4, 0.0, -3 * pi / 4, 0.0, pi / 2, pi / 4;
  return q;
}

/// Planar arm with two unit links about z. Points at both link tips, the second is the end-effector.
inline KinematicChain planar2(double radius = 0.05, double vel_limit = 2.0)
{
  const double pi = std::numbers::pi;
  std::vector<Joint> joints{{Vec3::UnitZ(), Vec3::Zero()}, {Vec3::UnitZ(), Vec3(1, 0, 0)}};
  std::vector<ControlPoint> points{{"elbow", 0, Vec3(1, 0, 0), radius, false},
                                   {"ee", 1, Vec3(1, 0, 0), radius, true}};
  return KinematicChain(std::move(joints), VecX::Constant(2, -pi), VecX::Constant(2, pi),
                        VecX::Constant(2, -vel_limit), VecX::Constant(2, vel_limit), std::move(points));
}

inline bool has_chain(std::string_view name) { return name == "franka7" || name == "planar2"; }

inline KinematicChain chain(std::string_view name)
{
  if (name == "franka7") return franka7();
  if (name == "planar2") return planar2();
  throw ConfigError("chain.preset", "unknown chain preset '" + std::string(name) + "'");
}

}  // namespace hcbf::presets
