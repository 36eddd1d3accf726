#include "hcbf/perf_controller.hpp"
#include "hcbf/presets.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

namespace hcbf {
namespace {

TEST(MidJointBias, VanishesAtCenterOrZeroGain)
{
  const auto chain = presets::franka7();
  const MatX proj = MatX::Identity(7, 7);
  EXPECT_EQ(mid_joint_bias(chain, chain.joint_center(), proj, VecX::Constant(7, 0.5)).norm(), 0.0);
  EXPECT_EQ(mid_joint_bias(chain, presets::franka7_home(), proj, VecX::Zero(7)).norm(), 0.0);
  EXPECT_THROW(mid_joint_bias(chain, presets::franka7_home(), MatX::Identity(6, 6), VecX::Zero(7)), ArgumentError);
}

TEST(MidJointBias, EndEffectorLeakageBounded)
{
  const auto chain = presets::franka7();
  std::mt19937_64 rng(8);
  const double mu = kDefaultDamping;
  for (int s = 0; s < 100; ++s) {
    VecX q(7);
    for (int i = 0; i < 7; ++i) {
      q[i] = std::uniform_real_distribution<double>(chain.joint_lower()[i], chain.joint_upper()[i])(rng);
    }
    const MatX jac = control_point_jacobian(chain, q, chain.end_effector_index());
    const MatX dag = damped_pseudo_inverse(jac, mu);
    const Eigen::JacobiSVD<MatX> svd(jac);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(2);
    const VecX kp = VecX::Constant(7, 0.5);
    const VecX bias = mid_joint_bias(chain, q, null_space_projector(jac, dag), kp);
    const VecX e_joint = chain.joint_range_weights().cwiseProduct(q - chain.joint_center());
    const double bound = mu * smax / (smin * smin + mu) * kp.cwiseProduct(e_joint).norm();
    EXPECT_LE((jac * bias).norm(), bound * (1 + 1e-9) + 1e-15);
  }
}

TEST(PerformanceCommand, ZeroAtTargetAndCenter)
{
  const auto chain = presets::franka7();
  const VecX q = chain.joint_center();
  const Vec3 p = forward_kinematics(chain, q)[static_cast<std::size_t>(chain.end_effector_index())];
  EXPECT_LE(performance_command(chain, {q, 0.0}, {p, Vec3::Zero()}, PerfConfig{}).norm(), 1e-15);
}

TEST(PerformanceCommand, SingleJointHandValue)
{
  const auto chain = testing::single_joint();
  PerfConfig cfg;
  cfg.lambda = 1.0;
  cfg.kp_joint = VecX::Zero(1);
  const VecX u = performance_command(chain, {VecX::Zero(1), 0.0}, {Vec3(1, 0.1, 0), Vec3::Zero()}, cfg);
  EXPECT_NEAR(u[0], 0.1 / 1.01, 1e-15);
}

TEST(PerformanceCommand, TaskVelocityWithinDampingBound)
{
  const auto chain = presets::franka7();
  const VecX q = presets::franka7_home();
  PerfConfig cfg;
  cfg.kp_joint = VecX::Zero(7);
  const Vec3 p = forward_kinematics(chain, q)[5];
  const TrackingTarget target{p + Vec3(0.02, -0.01, 0.03), Vec3(0.05, 0.0, -0.02)};
  const VecX u = performance_command(chain, {q, 0.0}, target, cfg);
  const MatX jac = control_point_jacobian(chain, q, 5);
  const Vec3 wanted = target.velocity - cfg.lambda * (p - target.position);
  const Eigen::JacobiSVD<MatX> svd(jac);
  const double smin = svd.singularValues()(2);
  EXPECT_LE((jac * u - wanted).norm(), cfg.mu / (smin * smin + cfg.mu) * wanted.norm() * (1 + 1e-9));
}

TEST(PerfConfig, Validation)
{
  PerfConfig cfg;
  cfg.lambda = 0.0;
  EXPECT_THROW(cfg.validate(7), ConfigError);
  cfg = {};
  cfg.kp_joint = VecX::Constant(7, -1.0);
  EXPECT_THROW(cfg.validate(7), ConfigError);
  cfg.kp_joint = VecX::Zero(3);
  EXPECT_THROW(cfg.validate(7), ConfigError);
}

struct Decay
{
  double worst_ratio = 0.0;  // max over t of |e(t)| / (e^{-rate t} |e(0)|)
  double min_gain = 1.0;     // min over ticks of s_min^2 / (s_min^2 + mu)
};

Decay closed_loop(const KinematicChain& chain, VecX q, const Vec3& offset, const PerfConfig& cfg, bool damped_rate)
{
  const int ee = chain.end_effector_index();
  const TrackingTarget target{forward_kinematics(chain, q)[static_cast<std::size_t>(ee)] + offset, Vec3::Zero()};
  const double dt = 1e-3;
  const double e0 = offset.norm();
  Decay out;
  double log_envelope = 0.0;
  for (int k = 1; k <= 3000; ++k) {
    const auto jac = control_point_jacobian(chain, q, ee);
    const double smin = Eigen::JacobiSVD<MatX>(jac).singularValues()(2);
    const double gain = smin * smin / (smin * smin + cfg.mu);
    out.min_gain = std::min(out.min_gain, gain);
    log_envelope -= cfg.lambda * dt * (damped_rate ? gain : 1.0);
    q += dt * performance_command(chain, {q, 0.0}, target, cfg);
    const double e = (forward_kinematics(chain, q)[static_cast<std::size_t>(ee)] - target.position).norm();
    out.worst_ratio = std::max(out.worst_ratio, e / (std::exp(log_envelope) * e0));
  }
  return out;
}

// Exact damped law: every singular direction decays at lambda s^2 / (s^2 + mu), so the slowest
// rate along the rollout bounds the envelope.
TEST(ClosedLoop, DecaysAtDampedRate)
{
  const auto chain = presets::franka7();
  PerfConfig cfg;
  cfg.kp_joint = VecX::Zero(7);
  for (const Vec3 off : {Vec3(0.1, 0, 0), Vec3(0, 0.1, 0), Vec3(0, 0, 0.1), Vec3(0.06, -0.05, 0.08)}) {
    EXPECT_LE(closed_loop(chain, presets::franka7_home(), off, cfg, true).worst_ratio, 1.05);
  }
}

// With vanishing damping the undamped envelope e^{-lambda t} itself holds.
TEST(ClosedLoop, UndampedEnvelopeAsDampingVanishes)
{
  const auto chain = presets::franka7();
  PerfConfig cfg;
  cfg.kp_joint = VecX::Zero(7);
  cfg.mu = 1e-8;
  EXPECT_LE(closed_loop(chain, presets::franka7_home(), Vec3(0.06, -0.05, 0.08), cfg, false).worst_ratio, 1.05);
}

}  // namespace
}  // namespace hcbf
