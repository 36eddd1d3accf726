#include "hcbf/barrier.hpp"
#include "hcbf/presets.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

namespace hcbf {
namespace {

Obstacle make_obstacle(std::string id, Vec3 p, double r, int priority, Vec3 v = Vec3::Zero())
{
  Obstacle o;
  o.id = std::move(id);
  o.position = p;
  o.velocity = v;
  o.radius = r;
  o.priority = priority;
  o.beta = priority > 0 ? 500.0 : 0.0;
  return o;
}

TEST(BarrierValue, Examples)
{
  EXPECT_NEAR(barrier_value(Vec3(0.5, 0, 0.5), Vec3(0.5, 0.3, 0.5), 0.05, 0.1, 0.05), 0.1, 1e-15);
  EXPECT_EQ(barrier_value(Vec3(1, 2, 3), Vec3(1, 2, 3), 0.05, 0.1, 0.05), -0.2);
  EXPECT_EQ(barrier_value(Vec3(0.25, 0, 0), Vec3::Zero(), 0.125, 0.0625, 0.0625), 0.0);
}

TEST(BarrierDirection, UnitNormal)
{
  EXPECT_TRUE(barrier_direction(Vec3(3, 4, 0), Vec3::Zero()).isApprox(Vec3(0.6, 0.8, 0), 1e-15));
  EXPECT_TRUE(barrier_direction(Vec3(1, 1, 3), Vec3(1, 1, 1)).isApprox(Vec3(0, 0, 1), 1e-15));
  std::mt19937_64 rng(2);
  for (int s = 0; s < 100; ++s) {
    const Vec3 a = testing::random_vector(rng, 3), b = testing::random_vector(rng, 3);
    EXPECT_NEAR(barrier_direction(a, b).norm(), 1.0, 1e-12);
  }
  EXPECT_THROW(barrier_direction(Vec3::Zero(), Vec3(1e-7, 0, 0)), DegenerateDirection);
}

TEST(BuildConstraints, StaticBoundaryRowHasZeroRhs)
{
  const auto chain = testing::planar2();
  const VecX q = VecX::Zero(2);
  // end-effector at (2,0,0); obstacle so that h = 0 exactly
  const std::vector<Obstacle> obs{make_obstacle("o", Vec3(2.5, 0, 0), 0.25, 0)};
  const std::vector<int> pts{1};
  const auto cs = build_constraints(chain, q, obs, pts, 0.25);
  ASSERT_EQ(cs.rows.size(), 1u);
  EXPECT_EQ(cs.rows[0].h, 0.0);
  EXPECT_EQ(cs.rows[0].rhs, 0.0);
  EXPECT_TRUE(cs.rows[0].direction.isApprox(Vec3(-1, 0, 0)));
}

TEST(BuildConstraints, RecedingObstacleIsSlack)
{
  const auto chain = presets::franka7();
  const VecX q = presets::franka7_home();
  const std::vector<Obstacle> obs{make_obstacle("far", Vec3(5, 5, 5), 0.1, 0, Vec3(2, 2, 2))};
  const auto cs = build_constraints(chain, q, obs, all_points(chain));
  for (const auto& c : cs.rows) {
    // largest achievable row.qdot magnitude within the box is |row|_1 * vmax
    EXPECT_LT(c.rhs, -c.row.lpNorm<1>() * chain.vel_upper().maxCoeff());
  }
}

TEST(BuildConstraints, OneSlotPerRelaxableObstacle)
{
  const auto chain = presets::franka7();
  const VecX q = presets::franka7_home();
  const std::vector<Obstacle> obs{make_obstacle("red", Vec3(0.6, 0.3, 0.5), 0.05, 0),
                                  make_obstacle("blue", Vec3(0.6, -0.3, 0.5), 0.05, 1),
                                  make_obstacle("green", Vec3(0.2, 0.4, 0.8), 0.05, 2)};
  const auto cs = build_constraints(chain, q, obs, all_points(chain));
  ASSERT_EQ(cs.rows.size(), 18u);
  ASSERT_EQ(cs.num_slots(), 2);
  EXPECT_EQ(cs.slot_obstacle, (std::vector<int>{1, 2}));
  for (const auto& c : cs.rows) {
    EXPECT_NEAR(c.direction.norm(), 1.0, 1e-9);
    EXPECT_TRUE(std::isfinite(c.rhs));
    if (c.obstacle_index == 0) {
      EXPECT_FALSE(c.relax_slot.has_value());
    } else {
      ASSERT_TRUE(c.relax_slot.has_value());
      EXPECT_EQ(cs.slot_obstacle[static_cast<std::size_t>(*c.relax_slot)], c.obstacle_index);
    }
  }
}

TEST(BuildConstraints, DegenerateAndBadIndex)
{
  const auto chain = testing::planar2();
  const std::vector<Obstacle> obs{make_obstacle("hand", Vec3(2, 0, 0), 0.1, 1)};
  const std::vector<int> ee{1};
  try {
    build_constraints(chain, VecX::Zero(2), obs, ee);
    FAIL() << "expected DegenerateDirection";
  } catch (const DegenerateDirection& e) {
    EXPECT_EQ(e.obstacle_id(), "hand");
    EXPECT_EQ(e.point_index(), 1);
  }
  const std::vector<int> bad{4};
  EXPECT_THROW(build_constraints(chain, VecX::Zero(2), obs, bad), ArgumentError);
}

// dh/dt = row . qdot - A . p_dot along short straight-line steps, against a forward difference.
TEST(BuildConstraints, TimeDerivativeMatchesFiniteDifference)
{
  std::mt19937_64 rng(21);
  const double dt = 1e-4;
  int checked = 0;
  while (checked < 100) {
    const auto chain = testing::random_chain(rng);
    const VecX q = testing::random_vector(rng, chain.dof(), -3.0, 3.0);
    const VecX qd = testing::random_vector(rng, chain.dof(), -2.0, 2.0);
    const Vec3 pdot = testing::random_vector(rng, 3, -0.5, 0.5);
    const std::vector<Obstacle> obs{make_obstacle("o", testing::random_vector(rng, 3, -1.5, 1.5), 0.1, 0, pdot)};
    const auto pts = all_points(chain);
    const auto now = build_constraints(chain, q, obs, pts);
    Obstacle moved = obs[0];
    moved.position += dt * pdot;
    const std::vector<Obstacle> later_obs{moved};
    const auto later = build_constraints(chain, q + dt * qd, later_obs, pts);
    double reach = 0.0;
    for (const auto& j : chain.joints()) reach += j.offset.norm();
    reach += 0.6;
    for (std::size_t r = 0; r < now.rows.size(); ++r) {
      const auto& c = now.rows[r];
      const double dist = c.h + 0.05 + 0.1 + 0.05;
      const double analytic = c.row.dot(qd) - c.direction.dot(pdot);
      const double fd = (later.rows[r].h - c.h) / dt;
      const double speed = qd.lpNorm<1>() * reach + pdot.norm();
      const double curvature = speed * speed / dist + qd.lpNorm<1>() * qd.lpNorm<1>() * reach;
      EXPECT_LE(std::abs(fd - analytic), 2.0 * dt * curvature);
    }
    ++checked;
  }
}

TEST(Obstacle, Validation)
{
  auto o = make_obstacle("o", Vec3::Zero(), 0.1, 1);
  EXPECT_NO_THROW(o.validate("obstacles[0]"));
  o.gamma = -1.0;
  try {
    o.validate("obstacles[0]");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "obstacles[0].gamma");
  }
  o.gamma = 1.0;
  o.beta = 0.0;
  EXPECT_THROW(o.validate("obstacles[0]"), ConfigError);
  o.beta = 1.0;
  o.delta_cap = -0.1;
  EXPECT_THROW(o.validate("obstacles[0]"), ConfigError);
}

}  // namespace
}  // namespace hcbf
