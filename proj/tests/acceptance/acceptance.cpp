// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any line fails.

#include "hcbf/scenario.hpp"

#include "oracles/fd_oracle.hpp"
#include "oracles/hull_oracle.hpp"
#include "oracles/qp_oracle.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <iostream>
#include <sstream>

using namespace hcbf;
namespace ht = hcbf::testing;

namespace {

struct Verdict
{
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ScenarioConfig preset(const std::string& name, const Json& patch = Json::object())
{
  Json j = resolve_config(Json{{"preset", name}});
  j.merge_patch(patch);
  return parse_config(j);
}

FilterConfig mode(FilterMode m)
{
  FilterConfig c;
  c.mode = m;
  return c;
}

// 1 ------------------------------------------------------------------------------------------
Verdict jacobians()
{
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int s = 0; s < 200; ++s) {
    const auto chain = ht::random_chain(rng);
    const VecX q = ht::random_vector(rng, chain.dof(), -3.0, 3.0);
    const auto kin = kinematics(chain, q);
    for (int j = 0; j < chain.num_points(); ++j) {
      const auto fd = oracle::central_difference_jacobian(
          [&](const VecX& x) { return forward_kinematics(chain, x)[static_cast<std::size_t>(j)]; }, q);
      const auto& jac = kin[static_cast<std::size_t>(j)].jacobian;
      worst = std::max(worst, (fd - jac).norm() / std::max(1.0, jac.norm()));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-5 && secs < 5.0, fmt("200 samples, max rel err %.2e (<= 1e-5), %.2f s (< 5 s)", worst, secs)};
}

// 2 ------------------------------------------------------------------------------------------
Verdict qp_oracle()
{
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  double obj_err = 0.0, kkt = 0.0;
  int not_optimal = 0;
  for (int n = 0; n < 500; ++n) {
    const QpProblem p = ht::random_feasible_qp(rng);
    const auto s = solve_qp(p);
    if (s.status != QpStatus::Optimal) {
      ++not_optimal;
      continue;
    }
    MatX c;
    VecX d;
    ht::stacked_constraints(p, c, d);
    const auto ref = oracle::dual_projected_gradient(p.H, p.f, c, d);
    obj_err = std::max(obj_err, std::abs(s.objective - ref.dual_value) / std::max(1.0, std::abs(ref.dual_value)));
    const VecX stat = p.H * s.x + p.f - p.G.transpose() * s.lambda - s.box_lower + s.box_upper;
    kkt = std::max(kkt, stat.lpNorm<Eigen::Infinity>());
    for (Eigen::Index i = 0; i < p.num_rows(); ++i) {
      const double slack = p.G.row(i).dot(s.x) - p.g[i];
      kkt = std::max({kkt, -slack, -s.lambda[i], std::abs(s.lambda[i] * slack)});
    }
    for (Eigen::Index i = 0; i < p.num_vars(); ++i) {
      if (!is_unbounded(p.lb[i])) kkt = std::max({kkt, p.lb[i] - s.x[i], -s.box_lower[i], std::abs(s.box_lower[i] * (s.x[i] - p.lb[i]))});
      if (!is_unbounded(p.ub[i])) kkt = std::max({kkt, s.x[i] - p.ub[i], -s.box_upper[i], std::abs(s.box_upper[i] * (p.ub[i] - s.x[i]))});
    }
  }
  // x >= 1 and x <= -1; x1 + x2 >= 3 inside the box [-1, 1]^2
  MatX h1(1, 1);
  h1 << 2.0;
  QpProblem f1 = QpProblem::unconstrained(h1, VecX::Zero(1));
  f1.G = MatX(2, 1);
  f1.G << 1.0, -1.0;
  f1.g = Eigen::Vector2d(1.0, 1.0);
  QpProblem f2 = QpProblem::unconstrained(MatX::Identity(2, 2), VecX::Zero(2));
  f2.lb = VecX::Constant(2, -1.0);
  f2.ub = VecX::Constant(2, 1.0);
  f2.G = MatX::Ones(1, 2);
  f2.g = VecX::Constant(1, 3.0);
  const bool infeasible_ok = solve_qp(f1).status == QpStatus::Infeasible && solve_qp(f2).status == QpStatus::Infeasible;
  const double secs = seconds_since(t0);
  return {not_optimal == 0 && obj_err <= 1e-6 && kkt <= 1e-6 && infeasible_ok && secs < 30.0,
          fmt("500 problems, %d not optimal, max rel obj err %.2e, max KKT residual %.2e (<= 1e-6), "
              "infeasible fixtures %s, %.2f s (< 30 s)",
              not_optimal, obj_err, kkt, infeasible_ok ? "ok" : "WRONG", secs)};
}

// 3 ------------------------------------------------------------------------------------------
Verdict forward_invariance()
{
  const auto t0 = Clock::now();
  const auto cfg = preset("easy", Json{{"filter", {{"mode", "strict"}}}, {"sim", {{"duration", 30.0}}}});
  const auto res = run_scenario(cfg, cfg.sim.seed);
  double h = kUnbounded;
  for (const auto& o : res.metrics.obstacles) h = std::min(h, o.h_min);
  const double secs = seconds_since(t0);
  return {h >= -1e-3 && secs < 60.0,
          fmt("easy, strict, 30 s: min h %.3e (>= -1e-3), emergency ticks %zu, %.2f s (< 60 s)", h,
              res.metrics.emergency_ticks, secs)};
}

// 4 ------------------------------------------------------------------------------------------
Verdict relaxed_vs_strict()
{
  const auto chain = presets::franka7();
  std::mt19937_64 rng(4);
  int optimal = 0;
  double worst = -kUnbounded;
  for (int k = 0; k < 1000; ++k) {
    const auto s = ht::strict_feasible_snapshot(rng, chain);
    SafetyFilter strict(mode(FilterMode::Strict));
    SafetyFilter relaxed(mode(FilterMode::Relaxed));
    const auto a = strict.filter(chain, s.q, s.qd_perf, s.obstacles);
    const auto b = relaxed.filter(chain, s.q, s.qd_perf, s.obstacles);
    if (b.qp_status == QpStatus::Optimal) ++optimal;
    worst = std::max(worst, b.objective - a.objective);
  }
  return {optimal == 1000 && worst <= 1e-6,
          fmt("1000 snapshots: relaxed optimal %d/1000, max(J_relaxed - J_strict) %.2e (<= 1e-6)", optimal, worst)};
}

// 5 ------------------------------------------------------------------------------------------
Verdict beta_convergence()
{
  const auto chain = presets::franka7();
  std::mt19937_64 rng(12);
  int monotone_bad = 0, far = 0;
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto s = ht::strict_feasible_snapshot(rng, chain);
    SafetyFilter strict(mode(FilterMode::Strict));
    const VecX ref = strict.filter(chain, s.q, s.qd_perf, s.obstacles).q_dot_safe;
    double prev = kUnbounded;
    bool bad = false;
    double dist = 0.0;
    for (const double beta : {1e1, 1e2, 1e3, 1e4, 1e5, 1e6}) {
      SafetyFilter relaxed(mode(FilterMode::Relaxed));
      const auto cmd = relaxed.filter(chain, s.q, s.qd_perf, with_beta(s.obstacles, beta));
      const double dmax = *std::max_element(cmd.deltas.begin(), cmd.deltas.end());
      if (dmax > prev + 1e-8 || cmd.status == FilterStatus::Emergency) bad = true;
      prev = dmax;
      dist = (cmd.q_dot_safe - ref).norm();
    }
    monotone_bad += bad;
    far += dist > 1e-3;
    worst = std::max(worst, dist);
  }
  return {monotone_bad == 0 && far == 0,
          fmt("20 snapshots: delta_max non-monotone on %d, |qd(1e6) - qd_strict| > 1e-3 on %d (max %.2e)", monotone_bad,
              far, worst)};
}

// 6 ------------------------------------------------------------------------------------------
Verdict coverage()
{
  const Json j = resolve_config(Json{{"preset", "coverage_squeeze"}});
  const auto tpl = parse_coverage(j);
  const auto chain = presets::franka7();
  const auto rep = coverage_search(chain, tpl, 10000, 0);
  std::size_t ok = 0;
  double margin = kUnbounded;
  for (const auto& s : rep.infeasible) {
    bool good = s.relaxed == QpStatus::Optimal && s.priority0_margin >= -1e-6;
    for (std::size_t i = 0; i < s.obstacles.size(); ++i)
      if (s.obstacles[i].priority == 0 && s.deltas[i] != 0.0) good = false;
    ok += good;
    margin = std::min(margin, s.priority0_margin);
  }
  const auto n = rep.infeasible.size();
  return {n >= 1 && ok == n,
          fmt("10000 samples: %zu strict-infeasible, %zu/%zu relaxed optimal with priority-0 rows held "
              "(min margin %.2e >= -1e-6)",
              n, ok, n, margin)};
}

// 7 ------------------------------------------------------------------------------------------
Verdict hard_batch()
{
  const auto t0 = Clock::now();
  const auto relaxed = preset("hard");
  const auto strict = preset("hard", Json{{"filter", {{"mode", "strict"}}}});
  int red_ok = 0;
  double red_min = kUnbounded;
  std::size_t infeasible = 0, emergency = 0;
  std::map<std::string, int> violated;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto& red = run_scenario(relaxed, seed).metrics.obstacle("red");
    red_ok += red.d_min > 0.0 && !red.violation;
    red_min = std::min(red_min, red.d_min);
    const auto m = run_scenario(strict, seed).metrics;
    infeasible += m.infeasible_ticks;
    emergency += m.emergency_ticks;
    for (const auto& o : m.obstacles) violated[o.id] += o.violation;
  }
  const double secs = seconds_since(t0);
  std::ostringstream strict_note;
  for (const auto& [id, n] : violated) strict_note << " " << id << "=" << n;
  return {red_ok == 10 && secs < 600.0,
          fmt("relaxed: red safe on %d/10 seeds (min d_min %.4f m); strict (informational): %zu infeasible ticks, "
              "%zu emergency ticks, seeds violated:%s; %.1f s (< 600 s)",
              red_ok, red_min, infeasible, emergency, strict_note.str().c_str(), secs)};
}

// 8 ------------------------------------------------------------------------------------------
Verdict cap_study()
{
  std::vector<double> green, red;
  std::ostringstream row;
  for (const Json cap : {Json(0.0), Json(0.3), Json(0.6), Json(nullptr)}) {
    Json j = resolve_config(Json{{"preset", "cap_squeeze"}});
    j["obstacles"][1]["delta_cap"] = cap;
    const auto cfg = parse_config(j);
    const auto m = run_scenario(cfg, cfg.sim.seed).metrics;
    green.push_back(m.obstacle("green").d_min);
    red.push_back(m.obstacle("red").d_min);
    row << " " << (cap.is_null() ? std::string("inf") : fmt("%.1f", cap.get<double>())) << ":" << fmt("%.4f", green.back());
  }
  bool monotone = true;
  for (std::size_t i = 1; i < green.size(); ++i) monotone = monotone && green[i] <= green[i - 1];
  const double gap = std::abs(red[0] - green[0]);
  return {monotone && gap <= 1e-2,
          fmt("green d_min by cap%s (non-increasing: %s); cap 0 |d_red - d_green| %.2e (<= 1e-2)", row.str().c_str(),
              monotone ? "yes" : "no", gap)};
}

// 9 ------------------------------------------------------------------------------------------
Verdict tracking()
{
  // default controller (lambda 2, default damping and null-space gain), fixed targets offset from home
  double worst = 0.0;
  for (const Vec3 off : {Vec3(0.1, 0, 0), Vec3(0, 0.1, 0), Vec3(0, 0, 0.1), Vec3(0.06, -0.05, 0.08)}) {
    ScenarioConfig cfg;
    cfg.trajectory.kind = TrajectoryKind::Fixed;
    cfg.trajectory.center = off;
    cfg.sim.duration = 3.001;
    const auto res = run_scenario(cfg, 0);
    const double e0 = (res.records[0].p_ee - res.records[0].p_desired).norm();
    for (const auto& r : res.records) {
      const double e = (r.p_ee - r.p_desired).norm();
      worst = std::max(worst, e / (std::exp(-cfg.perf.lambda * r.t) * e0));
    }
  }
  return {worst <= 1.05, fmt("4 targets, t in [0, 3]: max |e(t)| / (e^{-2t} |e(0)|) = %.3f (<= 1.05)", worst)};
}

// 10 -----------------------------------------------------------------------------------------
Verdict latency()
{
  const auto cfg = preset("hard");
  const auto res = run_scenario(cfg, 0);
  auto median_us = [&](FilterConfig fc) {
    SafetyFilter f(fc);
    std::vector<double> us;
    for (std::size_t k = 0; k < res.records.size(); k += 5) {
      const auto& r = res.records[k];
      const auto obs = obstacles_at(cfg, r);
      const auto t0 = Clock::now();
      const auto cmd = f.filter(cfg.chain, r.q, r.qd_perf, obs);
      us.push_back(std::chrono::duration<double, std::micro>(Clock::now() - t0).count());
      if (cmd.q_dot_safe.size() != 7) throw std::logic_error("bad filter output");
    }
    std::nth_element(us.begin(), us.begin() + static_cast<std::ptrdiff_t>(us.size() / 2), us.end());
    return us[us.size() / 2];
  };
  const double ee = median_us(cfg.filter);
  FilterConfig all = cfg.filter;
  all.constrained_points.clear();
  const double full = median_us(all);
  return {std::max(ee, full) <= 1000.0,
          fmt("7-DOF, 3 obstacles, median filter step: %.1f us end-effector only, %.1f us all control points "
              "(<= 1000 us)",
              ee, full)};
}

// 11 -----------------------------------------------------------------------------------------
Verdict metrics_oracles()
{
  std::mt19937_64 rng(111);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double hull_err = 0.0;
  for (int t = 0; t < 200; ++t) {
    std::vector<Point2> pts(50);
    for (auto& p : pts) p = {u(rng), u(rng)};
    hull_err = std::max(hull_err, std::abs(hull_area(pts) - oracle::gift_wrap_area(pts)));
  }

  auto tick = [](const Vec3& p_ee, const Vec3& p_des, std::vector<ObstacleSample> obs) {
    StepRecord r;
    r.q = r.qd_safe = r.qd_perf = VecX::Zero(1);
    r.p_ee = p_ee;
    r.p_desired = p_des;
    r.obstacles = std::move(obs);
    return r;
  };
  // squared errors 0.01, 0.02, 0.06: rmse sqrt(0.03)
  const std::vector<StepRecord> track{tick(Vec3(0.1, 0, 0), Vec3::Zero(), {}), tick(Vec3(1.1, 1.1, 1), Vec3(1, 1, 1), {}),
                                      tick(Vec3(0.2, 0.1, 0.1), Vec3::Zero(), {})};
  const double rmse_err = std::abs(rmse(track) - std::sqrt(0.03));

  // obstacle on +x at distance d from a resting end-effector: v_rel = vx
  const std::vector<std::pair<double, double>> dv{{1.0, 0.1},  {1.0, -0.1}, {0.5, 0.1}, {0.5, -0.2}, {0.4, -0.1},
                                                  {0.6, 0.0},  {0.59, 0.0}, {0.0, -0.1}, {2.0, -0.3}, {0.3, 0.05}};
  std::vector<StepRecord> roi_log;
  for (const auto& [d, vx] : dv) {
    ObstacleSample s;
    s.position = Vec3(d, 0, 0);
    s.velocity = Vec3(vx, 0, 0);
    s.ee_distance = d;
    roi_log.push_back(tick(Vec3::Zero(), Vec3::Zero(), {s}));
  }
  const auto any = aggregate(roi_log, {"o"}, RoiRule::NearOrClosing).obstacle("o");
  const auto both = aggregate(roi_log, {"o"}, RoiRule::NearAndClosing).obstacle("o");
  const double or_area = oracle::gift_wrap_area(
      {{1.0, -0.1}, {0.5, 0.1}, {0.5, -0.2}, {0.4, -0.1}, {0.59, 0.0}, {2.0, -0.3}, {0.3, 0.05}});
  const bool roi_ok = any.roi && both.roi && any.roi->ticks == 7 && any.roi_excluded == 1 &&
                      std::abs(any.roi->mean_distance - 5.29 / 7.0) <= 1e-15 &&
                      std::abs(any.roi->mean_v_rel + 0.55 / 7.0) <= 1e-15 &&
                      std::abs(any.roi->hull_area - or_area) <= 1e-15 && both.roi->ticks == 2 &&
                      std::abs(both.roi->mean_distance - 0.45) <= 1e-15 &&
                      std::abs(both.roi->mean_v_rel + 0.15) <= 1e-15 && both.roi->hull_area == 0.0;
  return {hull_err <= 1e-12 && rmse_err <= 1e-15 && roi_ok,
          fmt("hull vs gift wrapping on 200 sets of 50: max err %.1e; rmse fixture err %.1e; ROI fixtures %s", hull_err,
              rmse_err, roi_ok ? "match" : "MISMATCH")};
}

}  // namespace

int main()
{
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"kinematic correctness", jacobians},
      {"QP oracle equivalence", qp_oracle},
      {"forward invariance (easy, strict)", forward_invariance},
      {"relaxed never worse than strict", relaxed_vs_strict},
      {"beta sweep converges to strict", beta_convergence},
      {"coverage: infeasible found, prioritized relaxation holds", coverage},
      {"hard batch: red protected", hard_batch},
      {"cap monotonicity (2-DOF squeeze)", cap_study},
      {"exponential tracking envelope", tracking},
      {"latency budget", latency},
      {"metrics oracles", metrics_oracles},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << v.detail
              << std::endl;
  }
  std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
