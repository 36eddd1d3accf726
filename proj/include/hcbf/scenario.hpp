#pragma once

// Scenario files: JSON schema, embedded presets, and output writers.

#include "hcbf/sweep.hpp"
#include "hcbf/world.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <ostream>
#include <set>

namespace hcbf {

using Json = nlohmann::ordered_json;

namespace detail {

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& field)
{
  if (!j.is_object()) throw ConfigError(field.empty() ? "config" : field, "expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(field.empty() ? key : field + "." + key, "unknown key");
  }
}

inline std::string join(const std::string& field, const std::string& key)
{
  return field.empty() ? key : field + "." + key;
}

inline double number(const Json& j, const char* key, const std::string& field, double fallback)
{
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return kUnbounded;
    if (s == "-inf") return -kUnbounded;
  }
  if (!v.is_number()) throw ConfigError(join(field, key), "expected a number");
  return v.get<double>();
}

inline int integer(const Json& j, const char* key, const std::string& field, int fallback)
{
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(join(field, key), "expected an integer");
  return v.get<int>();
}

inline std::string text(const Json& j, const char* key, const std::string& field, std::string fallback)
{
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_string()) throw ConfigError(join(field, key), "expected a string");
  return v.get<std::string>();
}

inline VecX vector(const Json& v, const std::string& field)
{
  if (!v.is_array()) throw ConfigError(field, "expected an array of numbers");
  VecX out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(field + "[" + std::to_string(i) + "]", "expected a number");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

inline Vec3 vec3(const Json& v, const std::string& field)
{
  const VecX x = vector(v, field);
  if (x.size() != 3) throw ConfigError(field, "expected 3 numbers");
  return x;
}

inline Json to_json(const Eigen::Ref<const VecX>& v)
{
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Json bound_json(double v)
{
  if (is_unbounded(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------- presets

namespace presets {

inline Json pursuit_obstacles(double k, double b, double v_max, double d_lo, double d_hi)
{
  const Json motion{{"kind", "spring_damper"}, {"k", k}, {"b", b}, {"v_max", v_max}};
  const Json placement{{"min_distance", d_lo}, {"max_distance", d_hi}};
  return Json::array({
      {{"id", "red"}, {"radius", 0.1}, {"priority", 0}, {"gamma", 1.0}, {"placement", placement}, {"motion", motion}},
      {{"id", "blue"}, {"radius", 0.06}, {"priority", 1}, {"beta", 500.0}, {"gamma", 1.0}, {"placement", placement},
       {"motion", motion}},
      {{"id", "green"}, {"radius", 0.05}, {"priority", 2}, {"beta", 250.0}, {"gamma", 1.0}, {"placement", placement},
       {"motion", motion}},
  });
}

inline constexpr int franka7_ee = 5;

inline Json pursuit_scenario(const char* name, double k, double b, double v_max, double d_lo, double d_hi)
{
  return {
      {"name", name},
      {"chain", {{"preset", "franka7"}}},
      {"q0", detail::to_json(franka7_home())},
      {"trajectory", {{"kind", "circle_xy"}, {"center", {0.0, 0.0, 0.0}}, {"size", 0.1}, {"period", 8.0}, {"relative", true}}},
      {"perf", {{"lambda", 2.0}, {"kp_joint", 0.5}, {"mu", kDefaultDamping}}},
      {"filter",
       {{"mode", "relaxed"},
        {"perf_weight", 200.0},
        {"epsilon", kDefaultSafetyMargin},
        {"constrained_points", Json::array({franka7_ee})},
        {"joint_limit_horizon", 0.1}}},
      {"obstacles", pursuit_obstacles(k, b, v_max, d_lo, d_hi)},
      {"sim", {{"dt", 1e-3}, {"duration", 10.0}, {"seed", 0}}},
      {"outputs", {{"roi_rule", "near_or_closing"}}},
  };
}

/// Two static obstacles straddling the straight path of a planar end-effector, gap too narrow to pass.
inline Json cap_squeeze()
{
  return {
      {"name", "cap_squeeze"},
      {"chain", {{"preset", "planar2"}}},
      {"q0", {-1.2580030097693027, 1.726423780139082}},
      {"trajectory", {{"kind", "fixed"}, {"center", {1.2, 0.5, 0.0}}, {"relative", false}}},
      {"perf", {{"lambda", 2.0}, {"kp_joint", 0.0}, {"mu", kDefaultDamping}}},
      {"filter", {{"mode", "relaxed"}, {"perf_weight", 200.0}, {"epsilon", kDefaultSafetyMargin}, {"constrained_points", Json::array({1})}}},
      {"obstacles",
       Json::array({
           {{"id", "red"}, {"radius", 0.05}, {"priority", 0}, {"gamma", 1.0}, {"position", {1.33, 0.0, 0.0}}},
           {{"id", "green"}, {"radius", 0.05}, {"priority", 1}, {"beta", 250.0}, {"gamma", 1.0}, {"delta_cap", 0.0},
            {"position", {1.07, 0.0, 0.0}}},
       })},
      {"sim", {{"dt", 1e-3}, {"duration", 5.0}, {"seed", 0}}},
      {"outputs", {{"roi_rule", "near_or_closing"}}},
  };
}

/// Planar end-effector holding still while two priority-0 obstacles close in from opposite sides.
inline Json squeeze_strict()
{
  const Json red_path{{"kind", "scripted"}, {"times", {0.0, 2.0}}, {"points", {{1.5, 0.6, 0.0}, {1.5, -0.4, 0.0}}}};
  const Json green_path{{"kind", "scripted"}, {"times", {0.0, 2.0}}, {"points", {{1.5, -0.6, 0.0}, {1.5, 0.4, 0.0}}}};
  return {
      {"name", "squeeze_strict"},
      {"chain", {{"preset", "planar2"}}},
      {"q0", {-0.7227342478134157, 1.4454684956268313}},
      {"trajectory", {{"kind", "fixed"}, {"center", {0.0, 0.0, 0.0}}, {"relative", true}}},
      {"perf", {{"lambda", 2.0}, {"kp_joint", 0.0}, {"mu", kDefaultDamping}}},
      {"filter", {{"mode", "strict"}, {"perf_weight", 200.0}, {"epsilon", kDefaultSafetyMargin}, {"constrained_points", Json::array({1})}}},
      {"obstacles",
       Json::array({
           {{"id", "red"}, {"radius", 0.05}, {"priority", 0}, {"gamma", 1.0}, {"motion", red_path}},
           {{"id", "green"}, {"radius", 0.05}, {"priority", 0}, {"gamma", 1.0}, {"motion", green_path}},
       })},
      {"sim", {{"dt", 1e-3}, {"duration", 2.0}, {"seed", 0}}},
      {"outputs", {{"roi_rule", "near_or_closing"}}},
  };
}

inline Json coverage_squeeze()
{
  return {
      {"name", "coverage_squeeze"},
      {"chain", {{"preset", "franka7"}}},
      {"coverage",
       {{"point", -1},
        {"placement", "antipodal"},
        {"samples", 10000},
        {"epsilon", kDefaultSafetyMargin},
        {"perf_weight", 200.0},
        {"obstacles",
         Json::array({
             {{"id", "red"}, {"priority", 0}, {"radius", 0.1}, {"gamma", 1.0}, {"h", {0.05, 0.1}}, {"speed", {0.0, 0.05}}},
             {{"id", "green"}, {"priority", 1}, {"beta", 500.0}, {"radius", 0.05}, {"gamma", 1.0}, {"h", {-0.05, 0.05}},
              {"speed", {0.0, 0.4}}},
         })}}},
  };
}

inline Json coverage_far()
{
  Json j = coverage_squeeze();
  j["name"] = "coverage_far";
  j["coverage"]["placement"] = "independent";
  j["coverage"]["obstacles"] = Json::array({
      {{"id", "red"}, {"priority", 0}, {"radius", 0.1}, {"gamma", 1.0}, {"h", {5.0, 10.0}}, {"speed", {0.0, 0.5}}},
  });
  return j;
}

inline const std::vector<std::string>& scenario_names()
{
  static const std::vector<std::string> names{"easy", "medium", "hard", "cap_squeeze", "squeeze_strict",
                                              "coverage_squeeze", "coverage_far"};
  return names;
}

inline Json scenario(const std::string& name)
{
  if (name == "easy") return pursuit_scenario("easy", 0.5, 1.0, 0.05, 0.75, 1.2);
  if (name == "medium") return pursuit_scenario("medium", 2.0, 0.2, 0.10, 0.6, 0.9);
  if (name == "hard") return pursuit_scenario("hard", 4.0, 0.1, 0.15, 0.3, 0.6);
  if (name == "cap_squeeze") return cap_squeeze();
  if (name == "squeeze_strict") return squeeze_strict();
  if (name == "coverage_squeeze") return coverage_squeeze();
  if (name == "coverage_far") return coverage_far();
  throw ConfigError("preset", "unknown scenario preset '" + name + "'");
}

}  // namespace presets

// ---------------------------------------------------------------- parsing

/// Expand "preset" (if any) and apply the remaining keys as a JSON merge patch.
inline Json resolve_config(const Json& user)
{
  if (!user.is_object()) throw ConfigError("config", "top level must be an object");
  Json base = Json::object();
  Json patch = user;
  if (user.contains("preset")) {
    if (!user["preset"].is_string()) throw ConfigError("preset", "expected a string");
    base = presets::scenario(user["preset"].get<std::string>());
    patch.erase("preset");
  }
  base.merge_patch(patch);
  return base;
}

inline KinematicChain parse_chain(const Json& j, std::string& preset_name)
{
  const std::string field = "chain";
  if (j.contains("preset")) {
    detail::check_keys(j, {"preset"}, field);
    preset_name = detail::text(j, "preset", field, "");
    if (!presets::has_chain(preset_name)) throw ConfigError("chain.preset", "unknown chain preset '" + preset_name + "'");
    return presets::chain(preset_name);
  }
  detail::check_keys(j, {"joints", "joint_lower", "joint_upper", "vel_lower", "vel_upper", "control_points"}, field);
  preset_name.clear();
  for (const char* key : {"joints", "joint_lower", "joint_upper", "vel_lower", "vel_upper", "control_points"}) {
    if (!j.contains(key)) throw ConfigError(detail::join(field, key), "missing");
  }
  std::vector<Joint> joints;
  for (std::size_t i = 0; i < j["joints"].size(); ++i) {
    const auto f = "chain.joints[" + std::to_string(i) + "]";
    const auto& jj = j["joints"][i];
    detail::check_keys(jj, {"axis", "offset"}, f);
    if (!jj.contains("axis")) throw ConfigError(f + ".axis", "missing");
    joints.push_back({detail::vec3(jj["axis"], f + ".axis"),
                      jj.contains("offset") ? Vec3(detail::vec3(jj["offset"], f + ".offset")) : Vec3::Zero()});
  }
  std::vector<ControlPoint> points;
  for (std::size_t i = 0; i < j["control_points"].size(); ++i) {
    const auto f = "chain.control_points[" + std::to_string(i) + "]";
    const auto& cj = j["control_points"][i];
    detail::check_keys(cj, {"name", "link", "point", "radius", "end_effector"}, f);
    ControlPoint cp;
    cp.name = detail::text(cj, "name", f, "p" + std::to_string(i));
    cp.link = detail::integer(cj, "link", f, 0);
    cp.point = cj.contains("point") ? Vec3(detail::vec3(cj["point"], f + ".point")) : Vec3::Zero();
    cp.radius = detail::number(cj, "radius", f, 0.0);
    if (cj.contains("end_effector")) {
      if (!cj["end_effector"].is_boolean()) throw ConfigError(f + ".end_effector", "expected a boolean");
      cp.end_effector = cj["end_effector"].get<bool>();
    }
    points.push_back(std::move(cp));
  }
  return KinematicChain(std::move(joints), detail::vector(j["joint_lower"], "chain.joint_lower"),
                        detail::vector(j["joint_upper"], "chain.joint_upper"),
                        detail::vector(j["vel_lower"], "chain.vel_lower"),
                        detail::vector(j["vel_upper"], "chain.vel_upper"), std::move(points));
}

inline ObstacleSpec parse_obstacle(const Json& j, std::size_t index, const std::filesystem::path& base_dir)
{
  const auto f = "obstacles[" + std::to_string(index) + "]";
  detail::check_keys(j, {"id", "radius", "priority", "beta", "gamma", "delta_cap", "position", "placement", "motion"}, f);
  ObstacleSpec spec;
  auto& o = spec.obstacle;
  o.id = detail::text(j, "id", f, "obstacle" + std::to_string(index));
  o.radius = detail::number(j, "radius", f, 0.05);
  o.priority = detail::integer(j, "priority", f, 0);
  o.beta = detail::number(j, "beta", f, 0.0);
  o.gamma = detail::number(j, "gamma", f, 1.0);
  o.delta_cap = j.contains("delta_cap") && j["delta_cap"].is_null() ? kUnbounded : detail::number(j, "delta_cap", f, kUnbounded);
  if (j.contains("position")) o.position = detail::vec3(j["position"], f + ".position");
  if (j.contains("placement")) {
    const auto& pj = j["placement"];
    detail::check_keys(pj, {"min_distance", "max_distance"}, f + ".placement");
    spec.placement = ShellPlacement{detail::number(pj, "min_distance", f + ".placement", 0.75),
                                    detail::number(pj, "max_distance", f + ".placement", 1.2)};
  }
  if (j.contains("motion")) {
    const auto& mj = j["motion"];
    const auto mf = f + ".motion";
    const auto kind = detail::text(mj, "kind", mf, "static");
    if (kind == "static") {
      detail::check_keys(mj, {"kind"}, mf);
      spec.motion = StaticMotion{};
    } else if (kind == "spring_damper") {
      detail::check_keys(mj, {"kind", "k", "b", "v_max"}, mf);
      spec.motion = SpringDamperMotion{detail::number(mj, "k", mf, 0.5), detail::number(mj, "b", mf, 1.0),
                                       detail::number(mj, "v_max", mf, 0.05)};
    } else if (kind == "scripted") {
      detail::check_keys(mj, {"kind", "times", "points"}, mf);
      if (!mj.contains("times") || !mj.contains("points")) throw ConfigError(mf, "scripted motion needs times and points");
      ScriptedMotion s;
      const VecX t = detail::vector(mj["times"], mf + ".times");
      s.times.assign(t.data(), t.data() + t.size());
      if (!mj["points"].is_array()) throw ConfigError(mf + ".points", "expected an array");
      for (std::size_t i = 0; i < mj["points"].size(); ++i) {
        s.points.push_back(detail::vec3(mj["points"][i], mf + ".points[" + std::to_string(i) + "]"));
      }
      spec.motion = std::move(s);
    } else if (kind == "replay") {
      detail::check_keys(mj, {"kind", "file"}, mf);
      auto path = std::filesystem::path(detail::text(mj, "file", mf, ""));
      if (path.empty()) throw ConfigError(mf + ".file", "missing");
      if (path.is_relative()) path = base_dir / path;
      ReplayMotion r;
      r.path = std::filesystem::absolute(path).lexically_normal().string();
      r.table = load_replay_csv(r.path, mf + ".file");
      spec.motion = std::move(r);
    } else {
      throw ConfigError(mf + ".kind", "unknown motion kind '" + kind + "'");
    }
  }
  return spec;
}

/// Resolved JSON to a validated ScenarioConfig. Relative replay paths resolve against base_dir.
inline ScenarioConfig parse_config(const Json& j, const std::filesystem::path& base_dir = ".")
{
  detail::check_keys(j, {"name", "chain", "q0", "trajectory", "perf", "filter", "obstacles", "sim", "outputs", "coverage",
                         "sweep"},
                     "");
  ScenarioConfig c;
  c.name = detail::text(j, "name", "", "custom");
  if (j.contains("chain")) c.chain = parse_chain(j["chain"], c.chain_preset);
  c.q0 = j.contains("q0") ? detail::vector(j["q0"], "q0")
                          : (c.chain_preset == "franka7" ? presets::franka7_home() : VecX(c.chain.joint_center()));

  if (j.contains("trajectory")) {
    const auto& tj = j["trajectory"];
    detail::check_keys(tj, {"kind", "center", "size", "period", "relative"}, "trajectory");
    const auto kind = detail::text(tj, "kind", "trajectory", "fixed");
    if (!parse_trajectory_kind(kind, c.trajectory.kind)) throw ConfigError("trajectory.kind", "unknown kind '" + kind + "'");
    if (tj.contains("center")) c.trajectory.center = detail::vec3(tj["center"], "trajectory.center");
    c.trajectory.size = detail::number(tj, "size", "trajectory", 0.1);
    c.trajectory.period = detail::number(tj, "period", "trajectory", 8.0);
    if (tj.contains("relative")) {
      if (!tj["relative"].is_boolean()) throw ConfigError("trajectory.relative", "expected a boolean");
      c.trajectory_relative = tj["relative"].get<bool>();
    }
  }

  if (j.contains("perf")) {
    const auto& pj = j["perf"];
    detail::check_keys(pj, {"lambda", "kp_joint", "mu"}, "perf");
    c.perf.lambda = detail::number(pj, "lambda", "perf", 2.0);
    c.perf.mu = detail::number(pj, "mu", "perf", kDefaultDamping);
    if (pj.contains("kp_joint")) {
      c.perf.kp_joint = pj["kp_joint"].is_number() ? VecX::Constant(c.chain.dof(), pj["kp_joint"].get<double>())
                                                   : detail::vector(pj["kp_joint"], "perf.kp_joint");
    }
  }

  if (j.contains("filter")) {
    const auto& fj = j["filter"];
    detail::check_keys(fj, {"mode", "perf_weight", "epsilon", "constrained_points", "emergency_policy", "kkt_tol",
                            "feas_tol", "max_iter", "joint_limit_horizon"},
                       "filter");
    const auto mode = detail::text(fj, "mode", "filter", "relaxed");
    if (mode == "strict") c.filter.mode = FilterMode::Strict;
    else if (mode == "relaxed") c.filter.mode = FilterMode::Relaxed;
    else throw ConfigError("filter.mode", "expected 'strict' or 'relaxed'");
    c.filter.perf_weight = detail::number(fj, "perf_weight", "filter", 200.0);
    c.filter.epsilon = detail::number(fj, "epsilon", "filter", kDefaultSafetyMargin);
    if (detail::text(fj, "emergency_policy", "filter", "stop") != "stop") {
      throw ConfigError("filter.emergency_policy", "only 'stop' is supported");
    }
    c.filter.qp.kkt_tol = detail::number(fj, "kkt_tol", "filter", 1e-6);
    c.filter.qp.feas_tol = detail::number(fj, "feas_tol", "filter", 1e-8);
    c.filter.qp.max_iter = detail::integer(fj, "max_iter", "filter", 2000);
    c.filter.joint_limit_horizon = detail::number(fj, "joint_limit_horizon", "filter", 0.0);
    if (fj.contains("constrained_points")) {
      const auto& cj = fj["constrained_points"];
      if (!cj.is_array()) throw ConfigError("filter.constrained_points", "expected an array");
      for (std::size_t i = 0; i < cj.size(); ++i) {
        if (!cj[i].is_number_integer()) throw ConfigError("filter.constrained_points", "expected integers");
        c.filter.constrained_points.push_back(cj[i].get<int>());
      }
    }
  }

  if (j.contains("obstacles")) {
    if (!j["obstacles"].is_array()) throw ConfigError("obstacles", "expected an array");
    for (std::size_t i = 0; i < j["obstacles"].size(); ++i) c.obstacles.push_back(parse_obstacle(j["obstacles"][i], i, base_dir));
  }

  if (j.contains("sim")) {
    const auto& sj = j["sim"];
    detail::check_keys(sj, {"dt", "duration", "seed"}, "sim");
    c.sim.dt = detail::number(sj, "dt", "sim", 1e-3);
    c.sim.duration = detail::number(sj, "duration", "sim", 10.0);
    if (sj.contains("seed")) {
      if (!sj["seed"].is_number_unsigned() && !(sj["seed"].is_number_integer() && sj["seed"].get<long long>() >= 0)) {
        throw ConfigError("sim.seed", "expected a non-negative integer");
      }
      c.sim.seed = sj["seed"].get<std::uint64_t>();
    }
  }

  if (j.contains("outputs")) {
    const auto& oj = j["outputs"];
    detail::check_keys(oj, {"roi_rule"}, "outputs");
    const auto rule = detail::text(oj, "roi_rule", "outputs", "near_or_closing");
    if (!parse_roi_rule(rule, c.roi_rule)) throw ConfigError("outputs.roi_rule", "expected 'near_or_closing' or 'near_and_closing'");
  }

  c.validate();
  return c;
}

inline CoverageTemplate parse_coverage(const Json& j)
{
  if (!j.contains("coverage")) throw ConfigError("coverage", "missing coverage section");
  const auto& cj = j["coverage"];
  detail::check_keys(cj, {"point", "placement", "samples", "obstacles", "epsilon", "perf_weight"}, "coverage");
  CoverageTemplate t;
  t.point = detail::integer(cj, "point", "coverage", -1);
  const auto placement = detail::text(cj, "placement", "coverage", "antipodal");
  if (placement == "antipodal") t.placement = CoveragePlacement::Antipodal;
  else if (placement == "independent") t.placement = CoveragePlacement::Independent;
  else throw ConfigError("coverage.placement", "expected 'antipodal' or 'independent'");
  t.epsilon = detail::number(cj, "epsilon", "coverage", kDefaultSafetyMargin);
  t.perf_weight = detail::number(cj, "perf_weight", "coverage", 200.0);
  if (!cj.contains("obstacles") || !cj["obstacles"].is_array() || cj["obstacles"].empty()) {
    throw ConfigError("coverage.obstacles", "expected a non-empty array");
  }
  for (std::size_t i = 0; i < cj["obstacles"].size(); ++i) {
    const auto f = "coverage.obstacles[" + std::to_string(i) + "]";
    const auto& oj = cj["obstacles"][i];
    detail::check_keys(oj, {"id", "priority", "beta", "radius", "gamma", "h", "speed"}, f);
    CoverageObstacle o;
    o.id = detail::text(oj, "id", f, "obstacle" + std::to_string(i));
    o.priority = detail::integer(oj, "priority", f, 0);
    o.beta = detail::number(oj, "beta", f, 0.0);
    o.radius = detail::number(oj, "radius", f, 0.05);
    o.gamma = detail::number(oj, "gamma", f, 1.0);
    if (!oj.contains("h") || !oj.contains("speed")) throw ConfigError(f, "needs h and speed ranges");
    const VecX h = detail::vector(oj["h"], f + ".h");
    const VecX s = detail::vector(oj["speed"], f + ".speed");
    if (h.size() != 2 || !(h[0] <= h[1])) throw ConfigError(f + ".h", "expected [lo, hi]");
    if (s.size() != 2 || !(0.0 <= s[0] && s[0] <= s[1])) throw ConfigError(f + ".speed", "expected [lo, hi] with lo >= 0");
    o.h_min = h[0];
    o.h_max = h[1];
    o.speed_min = s[0];
    o.speed_max = s[1];
    Obstacle check;
    check.radius = o.radius;
    check.priority = o.priority;
    check.beta = o.beta;
    check.gamma = o.gamma;
    check.validate(f);
    t.obstacles.push_back(std::move(o));
  }
  return t;
}

/// Sample count from coverage.samples, if the config names one.
inline std::optional<long long> coverage_samples(const Json& j)
{
  if (!j.contains("coverage") || !j["coverage"].contains("samples")) return std::nullopt;
  const auto& v = j["coverage"]["samples"];
  if (!v.is_number_integer()) throw ConfigError("coverage.samples", "expected an integer");
  return v.get<long long>();
}

struct SweepSettings
{
  std::vector<double> betas;
  std::optional<double> snapshot_time;  ///< absent: full rollout per beta
};

inline SweepSettings parse_sweep(const Json& j)
{
  SweepSettings s;
  if (!j.contains("sweep")) return s;
  const auto& sj = j["sweep"];
  detail::check_keys(sj, {"betas", "snapshot_time"}, "sweep");
  if (sj.contains("betas")) {
    const VecX b = detail::vector(sj["betas"], "sweep.betas");
    s.betas.assign(b.data(), b.data() + b.size());
  }
  if (sj.contains("snapshot_time")) s.snapshot_time = detail::number(sj, "snapshot_time", "sweep", 0.0);
  return s;
}

/// Reads a file and resolves presets. Syntax errors are reported as path:line.
inline Json load_config_file(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  const std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return resolve_config(Json::parse(body));
  } catch (const Json::parse_error& e) {
    const auto upto = body.substr(0, std::min<std::size_t>(e.byte, body.size()));
    const auto line = 1 + std::count(upto.begin(), upto.end(), '\n');
    throw ConfigError(path.string() + ":" + std::to_string(line), "JSON syntax error");
  }
}

// ---------------------------------------------------------------- writers

/// Fixed column schema: t, q*, qd_safe*, qd_perf*, per obstacle px,py,pz,h_min,dist,delta, status, solve_us.
inline void write_steps_csv(std::ostream& os, const ScenarioConfig& cfg, std::span<const StepRecord> log,
                            bool with_timing = true)
{
  const int n = cfg.chain.dof();
  os << "t";
  for (const char* g : {"q", "qd_safe", "qd_perf"})
    for (int i = 0; i < n; ++i) os << "," << g << i;
  for (const auto& o : cfg.obstacles) {
    for (const char* c : {"px", "py", "pz", "h_min", "dist", "delta"}) os << "," << o.obstacle.id << "_" << c;
  }
  os << ",status";
  if (with_timing) os << ",solve_us";
  os << "\n" << std::setprecision(17);
  for (const auto& r : log) {
    os << r.t;
    for (const VecX* v : {&r.q, &r.qd_safe, &r.qd_perf})
      for (int i = 0; i < n; ++i) os << "," << (*v)[i];
    for (const auto& o : r.obstacles) {
      os << "," << o.position.x() << "," << o.position.y() << "," << o.position.z() << "," << o.h_min << ","
         << o.ee_distance << "," << o.delta;
    }
    os << "," << to_string(r.status);
    if (with_timing) os << "," << std::setprecision(6) << r.solve_us << std::setprecision(17);
    os << "\n";
  }
}

inline Json metrics_json(const ScenarioMetrics& m, const ScenarioConfig& cfg, std::uint64_t seed)
{
  Json j;
  j["scenario"] = cfg.name;
  j["seed"] = seed;
  j["mode"] = to_string(cfg.filter.mode);
  j["ticks"] = m.ticks;
  j["rmse"] = m.rmse;
  j["emergency_ticks"] = m.emergency_ticks;
  j["infeasible_ticks"] = m.infeasible_ticks;
  j["relaxing_ticks"] = m.relaxing_ticks;
  j["clamped_ticks"] = m.clamped_ticks;
  j["roi_rule"] = to_string(m.roi_rule);
  Json obs = Json::object();
  for (const auto& o : m.obstacles) {
    Json e;
    e["d_min"] = o.d_min;
    e["h_min"] = o.h_min;
    e["delta_max"] = o.delta_max;
    e["violation"] = o.violation;
    e["roi_excluded_ticks"] = o.roi_excluded;
    if (o.roi) {
      e["roi"] = {{"ticks", o.roi->ticks},
                  {"mean_distance", o.roi->mean_distance},
                  {"mean_v_rel", o.roi->mean_v_rel},
                  {"hull_area", o.roi->hull_area}};
    } else {
      e["roi"] = nullptr;
    }
    obs[o.id] = e;
  }
  j["obstacles"] = obs;
  return j;
}

/// Batch CSV header for the obstacle ids of a scenario.
inline std::string batch_header(const std::vector<std::string>& ids)
{
  std::string h = "seed,rmse";
  for (const auto& id : ids) h += "," + id + "_d_min," + id + "_delta_max," + id + "_violation";
  h += ",emergency_ticks,infeasible_ticks,relaxing_ticks,error";
  return h;
}

inline std::string batch_row(std::uint64_t seed, const ScenarioMetrics& m)
{
  std::ostringstream os;
  os << std::setprecision(10) << seed << "," << m.rmse;
  for (const auto& o : m.obstacles) os << "," << o.d_min << "," << o.delta_max << "," << (o.violation ? 1 : 0);
  os << "," << m.emergency_ticks << "," << m.infeasible_ticks << "," << m.relaxing_ticks << ",";
  return os.str();
}

/// Snapshot mode: beta,delta_max,qd_distance,relaxed_status,strict_status.
/// Rollout mode: beta,delta_max,qd_distance,compared_ticks,rmse,emergency_ticks.
inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, bool snapshot)
{
  os << (snapshot ? "beta,delta_max,qd_distance,relaxed_status,strict_status\n"
                  : "beta,delta_max,qd_distance,compared_ticks,rmse,emergency_ticks\n");
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.beta << "," << r.delta_max << ",";
    if (r.compared > 0) os << r.qd_distance;
    if (snapshot) {
      os << "," << to_string(r.relaxed_status) << "," << (r.strict_status ? to_string(*r.strict_status) : "none");
    } else {
      os << "," << r.compared << "," << r.rmse << "," << r.emergency_ticks;
    }
    os << "\n";
  }
}

/// One row per strict-infeasible sample: index, q*, strict, relaxed, priority0_margin, per obstacle px,py,pz,delta.
inline void write_coverage_csv(std::ostream& os, const KinematicChain& chain, const CoverageTemplate& tpl,
                               const CoverageReport& report)
{
  os << "index";
  for (int i = 0; i < chain.dof(); ++i) os << ",q" << i;
  os << ",strict_status,relaxed_status,priority0_margin";
  for (const auto& o : tpl.obstacles)
    for (const char* c : {"px", "py", "pz", "delta"}) os << "," << o.id << "_" << c;
  os << "\n" << std::setprecision(17);
  for (const auto& smp : report.infeasible) {
    os << smp.index;
    for (int i = 0; i < chain.dof(); ++i) os << "," << smp.q[i];
    os << "," << to_string(smp.strict) << "," << (smp.relaxed ? to_string(*smp.relaxed) : "none") << ",";
    if (!is_unbounded(smp.priority0_margin)) os << smp.priority0_margin;
    for (std::size_t i = 0; i < smp.obstacles.size(); ++i) {
      const auto& p = smp.obstacles[i].position;
      os << "," << p.x() << "," << p.y() << "," << p.z() << "," << smp.deltas[i];
    }
    os << "\n";
  }
}

}  // namespace hcbf
