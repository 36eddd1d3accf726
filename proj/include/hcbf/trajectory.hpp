#pragma once

#include "hcbf/common.hpp"

#include <array>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace hcbf {

/// Desired end-effector position and velocity at one instant.
struct TrackingTarget
{
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
};

enum class TrajectoryKind { Fixed, PickPlace, CircleXY, CircleYZ, Square };

inline std::string_view to_string(TrajectoryKind k)
{
  switch (k) {
    case TrajectoryKind::Fixed: return "fixed";
    case TrajectoryKind::PickPlace: return "pick_place";
    case TrajectoryKind::CircleXY: return "circle_xy";
    case TrajectoryKind::CircleYZ: return "circle_yz";
    case TrajectoryKind::Square: return "square";
  }
  return "fixed";
}

inline bool parse_trajectory_kind(std::string_view s, TrajectoryKind& out)
{
  for (auto k : {TrajectoryKind::Fixed, TrajectoryKind::PickPlace, TrajectoryKind::CircleXY,
                 TrajectoryKind::CircleYZ, TrajectoryKind::Square}) {
    if (to_string(k) == s) {
      out = k;
      return true;
    }
  }
  return false;
}

/**
 * Periodic end-effector path.
 *
 * `center` is absolute unless the scenario marks it relative, in which case it has already been
 * shifted by the initial end-effector position before sampling. `size` is the circle radius, the
 * square side, or the pick-and-place span; `period` is one full loop in seconds.
 *
 * Every generator starts at its first waypoint at t = 0:
 *  - circle_xy / circle_yz: center + size * (cos, sin) in the named plane, starting on +x / +y.
 *  - square: xy-plane square of side `size` starting at the (-,-) corner, counter-clockwise.
 *  - pick_place: pick at center - size/2 x, lift by size/2, carry, lower to the place point,
 *    then return along the same path.
 */
struct TrajectoryParams
{
  TrajectoryKind kind = TrajectoryKind::Fixed;
  Vec3 center = Vec3::Zero();
  double size = 0.1;
  double period = 8.0;
};

namespace detail {

inline TrackingTarget sample_polyline(const std::vector<Vec3>& loop, double period, double t)
{
  std::vector<double> seg(loop.size());
  double total = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    seg[i] = (loop[(i + 1) % loop.size()] - loop[i]).norm();
    total += seg[i];
  }
  if (total <= 0.0) return {loop.front(), Vec3::Zero()};
  const double speed = total / period;
  double s = std::fmod(t, period);
  if (s < 0.0) s += period;
  s *= speed;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    if (s <= seg[i] || i + 1 == loop.size()) {
      if (seg[i] <= 0.0) continue;
      const Vec3 dir = (loop[(i + 1) % loop.size()] - loop[i]) / seg[i];
      return {loop[i] + std::min(s, seg[i]) * dir, speed * dir};
    }
    s -= seg[i];
  }
  return {loop.front(), Vec3::Zero()};
}

}  // namespace detail

inline TrackingTarget sample(const TrajectoryParams& p, double t)
{
  const double w = 2.0 * std::numbers::pi / p.period;
  switch (p.kind) {
    case TrajectoryKind::Fixed:
      return {p.center, Vec3::Zero()};
    case TrajectoryKind::CircleXY:
      return {p.center + p.size * Vec3(std::cos(w * t), std::sin(w * t), 0.0),
              p.size * w * Vec3(-std::sin(w * t), std::cos(w * t), 0.0)};
    case TrajectoryKind::CircleYZ:
      return {p.center + p.size * Vec3(0.0, std::cos(w * t), std::sin(w * t)),
              p.size * w * Vec3(0.0, -std::sin(w * t), std::cos(w * t))};
    case TrajectoryKind::Square: {
      const double h = 0.5 * p.size;
      const std::vector<Vec3> loop{p.center + Vec3(-h, -h, 0), p.center + Vec3(h, -h, 0),
                                   p.center + Vec3(h, h, 0), p.center + Vec3(-h, h, 0)};
      return detail::sample_polyline(loop, p.period, t);
    }
    case TrajectoryKind::PickPlace: {
      const double h = 0.5 * p.size;
      const Vec3 pick = p.center - Vec3(h, 0, 0);
      const Vec3 place = p.center + Vec3(h, 0, 0);
      const Vec3 lift(0, 0, h);
      const std::vector<Vec3> loop{pick, pick + lift, place + lift, place, place + lift, pick + lift};
      return detail::sample_polyline(loop, p.period, t);
    }
  }
  return {p.center, Vec3::Zero()};
}

/// Point the generator occupies at t = 0 relative to its center.
inline Vec3 start_offset(const TrajectoryParams& p)
{
  TrajectoryParams at_origin = p;
  at_origin.center = Vec3::Zero();
  return sample(at_origin, 0.0).position;
}

}  // namespace hcbf
