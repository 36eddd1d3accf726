#pragma once

#include "hcbf/common.hpp"

#include <Eigen/Geometry>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hcbf {

/// Revolute joint: rotation `axis` (unit, parent frame) placed at `offset` from the parent frame origin.
/// All frames coincide with the world orientation at q = 0.
struct Joint
{
  Vec3 axis = Vec3::UnitZ();
  Vec3 offset = Vec3::Zero();
};

/// Sphere attached to a link frame; the frame of link i is the frame after joint i rotates.
struct ControlPoint
{
  std::string name;
  int link = 0;
  Vec3 point = Vec3::Zero();
  double radius = 0.0;
  bool end_effector = false;
};

/// Immutable serial-chain model. Construction validates every invariant.
class KinematicChain
{
public:
  KinematicChain(std::vector<Joint> joints, VecX joint_lower, VecX joint_upper, VecX vel_lower,
                 VecX vel_upper, std::vector<ControlPoint> control_points)
      : joints_(std::move(joints)), joint_lower_(std::move(joint_lower)),
        joint_upper_(std::move(joint_upper)), vel_lower_(std::move(vel_lower)),
        vel_upper_(std::move(vel_upper)), points_(std::move(control_points))
  {
    validate();
  }

  int dof() const { return static_cast<int>(joints_.size()); }
  const std::vector<Joint>& joints() const { return joints_; }
  const VecX& joint_lower() const { return joint_lower_; }
  const VecX& joint_upper() const { return joint_upper_; }
  const VecX& vel_lower() const { return vel_lower_; }
  const VecX& vel_upper() const { return vel_upper_; }
  const std::vector<ControlPoint>& control_points() const { return points_; }
  int num_points() const { return static_cast<int>(points_.size()); }
  int end_effector_index() const { return ee_index_; }

  /// Mid-range configuration (j_ub + j_lb) / 2.
  VecX joint_center() const { return 0.5 * (joint_upper_ + joint_lower_); }
  /// Diagonal of W = diag(1 / (j_ub - j_lb)).
  VecX joint_range_weights() const { return (joint_upper_ - joint_lower_).cwiseInverse(); }

  void check_configuration(const Eigen::Ref<const VecX>& q) const
  {
    if (q.size() != dof()) {
      throw ArgumentError("joint vector has length " + std::to_string(q.size()) + ", chain has " +
                          std::to_string(dof()) + " joints");
    }
  }

private:
  void validate()
  {
    const auto n = static_cast<Eigen::Index>(joints_.size());
    if (n == 0) throw ConfigError("chain.joints", "at least one joint is required");
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto field = "chain.joints[" + std::to_string(i) + "]";
      if (!joints_[i].axis.allFinite() || !joints_[i].offset.allFinite()) {
        throw ConfigError(field, "non-finite axis or offset");
      }
      if (std::abs(joints_[i].axis.norm() - 1.0) > 1e-9) {
        throw ConfigError(field + ".axis", "rotation axis must have unit norm");
      }
    }
    auto check_len = [n](const VecX& v, const char* name) {
      if (v.size() != n) {
        throw ConfigError(std::string("chain.") + name, "expected " + std::to_string(n) + " entries");
      }
      if (!v.allFinite()) throw ConfigError(std::string("chain.") + name, "entries must be finite");
    };
    check_len(joint_lower_, "joint_lower");
    check_len(joint_upper_, "joint_upper");
    check_len(vel_lower_, "vel_lower");
    check_len(vel_upper_, "vel_upper");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(joint_lower_[i] < joint_upper_[i])) {
        throw ConfigError("chain.joint_lower[" + std::to_string(i) + "]",
                          "joint lower bound must be below the upper bound");
      }
      if (!(vel_lower_[i] < 0.0 && 0.0 < vel_upper_[i])) {
        throw ConfigError("chain.vel_lower[" + std::to_string(i) + "]",
                          "velocity bounds must satisfy vel_lower < 0 < vel_upper");
      }
    }
    if (points_.empty()) throw ConfigError("chain.control_points", "at least one control point is required");
    ee_index_ = -1;
    for (std::size_t k = 0; k < points_.size(); ++k) {
      const auto field = "chain.control_points[" + std::to_string(k) + "]";
      const auto& cp = points_[k];
      if (cp.link < 0 || cp.link >= n) throw ConfigError(field + ".link", "link index out of range");
      if (!(cp.radius >= 0.0) || !std::isfinite(cp.radius)) {
        throw ConfigError(field + ".radius", "radius must be finite and >= 0");
      }
      if (!cp.point.allFinite()) throw ConfigError(field + ".point", "non-finite point");
      if (cp.end_effector && ee_index_ < 0) ee_index_ = static_cast<int>(k);
    }
    if (ee_index_ < 0) throw ConfigError("chain.control_points", "no control point is flagged as end_effector");
  }

  std::vector<Joint> joints_;
  VecX joint_lower_;
  VecX joint_upper_;
  VecX vel_lower_;
  VecX vel_upper_;
  std::vector<ControlPoint> points_;
  int ee_index_ = -1;
};

/// World pose of a link frame plus the world-frame joint axis and origin that produced it.
struct LinkFrame
{
  Mat3 rotation = Mat3::Identity();
  Vec3 origin = Vec3::Zero();
  Vec3 joint_axis = Vec3::UnitZ();
};

struct ControlPointKinematics
{
  Vec3 position = Vec3::Zero();
  Mat3X jacobian;
};

/// Product of per-joint transforms, one frame per joint.
inline std::vector<LinkFrame> link_frames(const KinematicChain& chain, const Eigen::Ref<const VecX>& q)
{
  chain.check_configuration(q);
  std::vector<LinkFrame> frames(static_cast<std::size_t>(chain.dof()));
  Mat3 rot = Mat3::Identity();
  Vec3 pos = Vec3::Zero();
  for (int i = 0; i < chain.dof(); ++i) {
    const auto& joint = chain.joints()[static_cast<std::size_t>(i)];
    pos += rot * joint.offset;
    const Vec3 world_axis = rot * joint.axis;
    rot = rot * Eigen::AngleAxisd(q[i], joint.axis).toRotationMatrix();
    frames[static_cast<std::size_t>(i)] = {rot, pos, world_axis};
  }
  return frames;
}

inline Vec3 point_position(const std::vector<LinkFrame>& frames, const ControlPoint& cp)
{
  const auto& f = frames[static_cast<std::size_t>(cp.link)];
  return f.origin + f.rotation * cp.point;
}

/// World-frame position of every control point.
inline std::vector<Vec3> forward_kinematics(const KinematicChain& chain, const Eigen::Ref<const VecX>& q)
{
  const auto frames = link_frames(chain, q);
  std::vector<Vec3> out;
  out.reserve(chain.control_points().size());
  for (const auto& cp : chain.control_points()) out.push_back(point_position(frames, cp));
  return out;
}

namespace detail {

inline Mat3X positional_jacobian(const KinematicChain& chain, const std::vector<LinkFrame>& frames,
                                 const ControlPoint& cp, const Vec3& p)
{
  Mat3X jac = Mat3X::Zero(3, chain.dof());
  for (int i = 0; i <= cp.link; ++i) {
    const auto& f = frames[static_cast<std::size_t>(i)];
    jac.col(i) = f.joint_axis.cross(p - f.origin);
  }
  return jac;
}

}  // namespace detail

/// Positional Jacobian of control point `point_index`. Columns of joints distal to its link are zero.
inline Mat3X control_point_jacobian(const KinematicChain& chain, const Eigen::Ref<const VecX>& q,
                                    int point_index)
{
  if (point_index < 0 || point_index >= chain.num_points()) {
    throw ArgumentError("control point index " + std::to_string(point_index) + " out of range");
  }
  const auto frames = link_frames(chain, q);
  const auto& cp = chain.control_points()[static_cast<std::size_t>(point_index)];
  return detail::positional_jacobian(chain, frames, cp, point_position(frames, cp));
}

/// Positions and Jacobians of all control points from a single frame sweep.
inline std::vector<ControlPointKinematics> kinematics(const KinematicChain& chain,
                                                      const Eigen::Ref<const VecX>& q)
{
  const auto frames = link_frames(chain, q);
  std::vector<ControlPointKinematics> out;
  out.reserve(chain.control_points().size());
  for (const auto& cp : chain.control_points()) {
    const Vec3 p = point_position(frames, cp);
    out.push_back({p, detail::positional_jacobian(chain, frames, cp, p)});
  }
  return out;
}

inline constexpr double kDefaultDamping = 0.01;

/// Damped pseudo-inverse J^T (J J^T + mu I)^-1 for a 3 x n Jacobian.
inline MatX damped_pseudo_inverse(const Eigen::Ref<const MatX>& jac, double mu = kDefaultDamping)
{
  if (!(mu > 0.0)) throw ArgumentError("damping mu must be > 0");
  const MatX gram = jac * jac.transpose() + mu * MatX::Identity(jac.rows(), jac.rows());
  // gram is symmetric, so J^T gram^-1 == (gram^-1 J)^T
  return gram.ldlt().solve(jac).transpose();
}

/// I - J_dagger J.
inline MatX null_space_projector(const Eigen::Ref<const MatX>& jac, const Eigen::Ref<const MatX>& jac_dagger)
{
  if (jac_dagger.rows() != jac.cols() || jac_dagger.cols() != jac.rows()) {
    throw ArgumentError("null_space_projector: J and J_dagger dimensions are incompatible");
  }
  return MatX::Identity(jac.cols(), jac.cols()) - jac_dagger * jac;
}

}  // namespace hcbf
