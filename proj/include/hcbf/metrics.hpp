#pragma once

#include "hcbf/record.hpp"
#include "hcbf/trajectory.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hcbf {

using Point2 = std::array<double, 2>;

/// (p_ee - p_h) . (v_ee - v_h) / |p_ee - p_h|. Negative when closing. Empty when the points coincide.
inline std::optional<double> relative_velocity(const Vec3& p_ee, const Vec3& p_h, const Vec3& v_ee, const Vec3& v_h)
{
  const Vec3 d = p_ee - p_h;
  const double n = d.norm();
  if (!(n > kTieEpsilon)) return std::nullopt;
  return d.dot(v_ee - v_h) / n;
}

/// Root mean square of |p_ee - p_desired| over the logged ticks.
inline double rmse(std::span<const StepRecord> log)
{
  if (log.empty()) throw ArgumentError("rmse of an empty log");
  double acc = 0.0;
  for (const auto& r : log) acc += (r.p_ee - r.p_desired).squaredNorm();
  return std::sqrt(acc / static_cast<double>(log.size()));
}

/// Same, with the reference re-sampled from a trajectory at each record's time.
inline double rmse(std::span<const StepRecord> log, const TrajectoryParams& trajectory)
{
  if (log.empty()) throw ArgumentError("rmse of an empty log");
  double acc = 0.0;
  for (const auto& r : log) acc += (r.p_ee - sample(trajectory, r.t).position).squaredNorm();
  return std::sqrt(acc / static_cast<double>(log.size()));
}

/// Counter-clockwise hull by Andrew's monotone chain; collinear points are dropped.
inline std::vector<Point2> convex_hull(std::vector<Point2> pts)
{
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Point2& o, const Point2& a, const Point2& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  const std::size_t lower = k + 1;
  for (auto it = pts.rbegin() + 1; it != pts.rend(); ++it) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0.0) --k;
    hull[k++] = *it;
  }
  hull.resize(k - 1);
  return hull;
}

inline double polygon_area(const std::vector<Point2>& poly)
{
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    a += p[0] * q[1] - q[0] * p[1];
  }
  return 0.5 * std::abs(a);
}

inline double hull_area(std::vector<Point2> pts)
{
  const auto hull = convex_hull(std::move(pts));
  return hull.size() < 3 ? 0.0 : polygon_area(hull);
}

/// Region-of-interest selector over (end-effector distance, relative velocity).
enum class RoiRule { NearOrClosing, NearAndClosing };

inline std::string_view to_string(RoiRule r) { return r == RoiRule::NearOrClosing ? "near_or_closing" : "near_and_closing"; }

inline bool parse_roi_rule(std::string_view s, RoiRule& out)
{
  if (s == "near_or_closing") out = RoiRule::NearOrClosing;
  else if (s == "near_and_closing") out = RoiRule::NearAndClosing;
  else return false;
  return true;
}

inline constexpr double kRoiDistance = 0.6;

inline bool in_roi(RoiRule rule, double distance, double v_rel)
{
  return rule == RoiRule::NearOrClosing ? (distance < kRoiDistance || v_rel < 0.0)
                                   : (distance < kRoiDistance && v_rel < 0.0);
}

struct RoiStats
{
  std::size_t ticks = 0;
  double mean_distance = 0.0;
  double mean_v_rel = 0.0;
  double hull_area = 0.0;
};

struct ObstacleMetrics
{
  std::string id;
  double d_min = kUnbounded;      ///< surface clearance
  double h_min = kUnbounded;
  double delta_max = 0.0;
  bool violation = false;         ///< some tick had h < 0
  std::optional<RoiStats> roi;    ///< absent when no tick qualified
  std::size_t roi_excluded = 0;   ///< ticks with coincident points (v_rel undefined)
};

struct ScenarioMetrics
{
  double rmse = 0.0;
  std::size_t ticks = 0;
  std::size_t emergency_ticks = 0;
  std::size_t infeasible_ticks = 0;
  std::size_t relaxing_ticks = 0;
  std::size_t clamped_ticks = 0;
  RoiRule roi_rule = RoiRule::NearOrClosing;
  std::vector<ObstacleMetrics> obstacles;

  const ObstacleMetrics& obstacle(std::string_view id) const
  {
    for (const auto& o : obstacles)
      if (o.id == id) return o;
    throw ArgumentError("no obstacle '" + std::string(id) + "' in metrics");
  }
};

/**
 * Fold over step records. Minima, maxima and sums combine exactly under merge(), so aggregating a
 * concatenated log equals merging the aggregates of its parts (up to summation order).
 */
class MetricsAccumulator
{
public:
  MetricsAccumulator(std::vector<std::string> obstacle_ids, RoiRule rule) : rule_(rule)
  {
    per_.resize(obstacle_ids.size());
    for (std::size_t i = 0; i < obstacle_ids.size(); ++i) per_[i].id = std::move(obstacle_ids[i]);
  }

  void add(const StepRecord& r)
  {
    if (r.obstacles.size() != per_.size()) throw ArgumentError("record has the wrong obstacle count");
    ++ticks_;
    sq_error_ += (r.p_ee - r.p_desired).squaredNorm();
    if (r.status == FilterStatus::Emergency) ++emergency_;
    if (r.status == FilterStatus::Relaxing) ++relaxing_;
    if (r.qp_status == QpStatus::Infeasible) ++infeasible_;
    if (r.clamped) ++clamped_;
    for (std::size_t i = 0; i < per_.size(); ++i) {
      const auto& o = r.obstacles[i];
      auto& acc = per_[i];
      acc.d_min = std::min(acc.d_min, o.clearance_min);
      acc.h_min = std::min(acc.h_min, o.h_min);
      acc.delta_max = std::max(acc.delta_max, o.delta);
      if (o.h_min < 0.0) acc.violation = true;
      const auto v_rel = relative_velocity(r.p_ee, o.position, r.v_ee, o.velocity);
      if (!v_rel) {
        ++acc.excluded;
        continue;
      }
      if (in_roi(rule_, o.ee_distance, *v_rel)) {
        ++acc.roi_ticks;
        acc.sum_distance += o.ee_distance;
        acc.sum_v_rel += *v_rel;
        acc.points.push_back({o.ee_distance, *v_rel});
      }
    }
  }

  void merge(const MetricsAccumulator& other)
  {
    if (other.per_.size() != per_.size() || other.rule_ != rule_) {
      throw ArgumentError("cannot merge accumulators of different scenarios");
    }
    ticks_ += other.ticks_;
    sq_error_ += other.sq_error_;
    emergency_ += other.emergency_;
    relaxing_ += other.relaxing_;
    infeasible_ += other.infeasible_;
    clamped_ += other.clamped_;
    for (std::size_t i = 0; i < per_.size(); ++i) {
      auto& a = per_[i];
      const auto& b = other.per_[i];
      a.d_min = std::min(a.d_min, b.d_min);
      a.h_min = std::min(a.h_min, b.h_min);
      a.delta_max = std::max(a.delta_max, b.delta_max);
      a.violation = a.violation || b.violation;
      a.excluded += b.excluded;
      a.roi_ticks += b.roi_ticks;
      a.sum_distance += b.sum_distance;
      a.sum_v_rel += b.sum_v_rel;
      a.points.insert(a.points.end(), b.points.begin(), b.points.end());
    }
  }

  ScenarioMetrics result() const
  {
    if (ticks_ == 0) throw ArgumentError("metrics of an empty log");
    ScenarioMetrics m;
    m.ticks = ticks_;
    m.rmse = std::sqrt(sq_error_ / static_cast<double>(ticks_));
    m.emergency_ticks = emergency_;
    m.infeasible_ticks = infeasible_;
    m.relaxing_ticks = relaxing_;
    m.clamped_ticks = clamped_;
    m.roi_rule = rule_;
    for (const auto& a : per_) {
      ObstacleMetrics o;
      o.id = a.id;
      o.d_min = a.d_min;
      o.h_min = a.h_min;
      o.delta_max = a.delta_max;
      o.violation = a.violation;
      o.roi_excluded = a.excluded;
      if (a.roi_ticks > 0) {
        const double n = static_cast<double>(a.roi_ticks);
        o.roi = RoiStats{a.roi_ticks, a.sum_distance / n, a.sum_v_rel / n, hull_area(a.points)};
      }
      m.obstacles.push_back(std::move(o));
    }
    return m;
  }

private:
  struct PerObstacle
  {
    std::string id;
    double d_min = kUnbounded;
    double h_min = kUnbounded;
    double delta_max = 0.0;
    bool violation = false;
    std::size_t excluded = 0;
    std::size_t roi_ticks = 0;
    double sum_distance = 0.0;
    double sum_v_rel = 0.0;
    std::vector<Point2> points;
  };

  RoiRule rule_;
  std::vector<PerObstacle> per_;
  std::size_t ticks_ = 0;
  double sq_error_ = 0.0;
  std::size_t emergency_ = 0;
  std::size_t relaxing_ = 0;
  std::size_t infeasible_ = 0;
  std::size_t clamped_ = 0;
};

inline ScenarioMetrics aggregate(std::span<const StepRecord> log, std::vector<std::string> obstacle_ids,
                                 RoiRule rule = RoiRule::NearOrClosing)
{
  MetricsAccumulator acc(std::move(obstacle_ids), rule);
  for (const auto& r : log) acc.add(r);
  return acc.result();
}

}  // namespace hcbf
