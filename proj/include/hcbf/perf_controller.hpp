#pragma once

#include "hcbf/chain.hpp"
#include "hcbf/trajectory.hpp"

namespace hcbf {

struct RobotState
{
  VecX q;
  double t = 0.0;
};

/// Gains of the resolved-rate tracking controller.
struct PerfConfig
{
  double lambda = 2.0;  ///< tracking gain, 1/s
  VecX kp_joint;        ///< diagonal of K_p^joint; empty means 0.5 on every joint
  double mu = kDefaultDamping;

  VecX kp_for(int dof) const { return kp_joint.size() == 0 ? VecX::Constant(dof, 0.5) : kp_joint; }

  void validate(int dof) const
  {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("perf.lambda", "must be > 0");
    if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError("perf.mu", "must be > 0");
    if (kp_joint.size() != 0 && kp_joint.size() != dof) {
      throw ConfigError("perf.kp_joint", "expected " + std::to_string(dof) + " entries");
    }
    if (kp_joint.size() != 0 && !(kp_joint.array() >= 0.0).all()) {
      throw ConfigError("perf.kp_joint", "gains must be >= 0");
    }
  }
};

/// Null-space bias toward mid-range joints: -J_null K_p W (q - q_mid).
inline VecX mid_joint_bias(const KinematicChain& chain, const Eigen::Ref<const VecX>& q,
                           const Eigen::Ref<const MatX>& j_null, const Eigen::Ref<const VecX>& kp_joint)
{
  chain.check_configuration(q);
  const auto n = chain.dof();
  if (j_null.rows() != n || j_null.cols() != n || kp_joint.size() != n) {
    throw ArgumentError("mid_joint_bias: dimension mismatch");
  }
  const VecX e_joint = chain.joint_range_weights().cwiseProduct(q - chain.joint_center());
  return -j_null * kp_joint.cwiseProduct(e_joint);
}

/// Tracking command J_ee^+ (p_d_dot - lambda (p - p_d)) plus the mid-joint bias.
inline VecX performance_command(const KinematicChain& chain, const RobotState& state,
                                const TrackingTarget& target, const PerfConfig& cfg)
{
  chain.check_configuration(state.q);
  const int ee = chain.end_effector_index();
  const auto frames = link_frames(chain, state.q);
  const auto& cp = chain.control_points()[static_cast<std::size_t>(ee)];
  const Vec3 p = point_position(frames, cp);
  const MatX jac = detail::positional_jacobian(chain, frames, cp, p);
  const MatX jac_dagger = damped_pseudo_inverse(jac, cfg.mu);
  const Vec3 v_cmd = target.velocity - cfg.lambda * (p - target.position);
  const VecX kp = cfg.kp_for(chain.dof());
  return jac_dagger * v_cmd + mid_joint_bias(chain, state.q, null_space_projector(jac, jac_dagger), kp);
}

}  // namespace hcbf
