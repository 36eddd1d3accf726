#pragma once

// Subcommands behind tools/hcbf_sim. Each one returns the process exit code.

#include "hcbf/scenario.hpp"

#include <atomic>
#include <iostream>
#include <thread>

namespace hcbf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;     ///< unreadable or invalid configuration, bad arguments
inline constexpr int kExitEmergency = 2;  ///< some tick fell back to the emergency policy
inline constexpr int kExitSeedFailed = 3; ///< batch only: a seed aborted (message in its row)

struct Options
{
  std::string config;  ///< JSON file; exactly one of config / preset
  std::string preset;
  std::optional<std::uint64_t> seed;
  long long seeds = 10;
  std::filesystem::path out = ".";
  unsigned workers = 0;  ///< 0: one per hardware thread
  bool dump_qp = false;
  std::optional<std::vector<double>> betas;
  std::optional<long long> samples;
};

struct Loaded
{
  Json json;  ///< fully resolved, seed filled in, replay paths absolute
  ScenarioConfig config;
  std::uint64_t seed = 0;
};

/// Replay file names in `j` made absolute against base_dir, so the echoed config runs from anywhere.
inline Json absolute_replay_paths(Json j, const std::filesystem::path& base_dir)
{
  if (!j.contains("obstacles") || !j["obstacles"].is_array()) return j;
  for (auto& o : j["obstacles"]) {
    if (!o.is_object() || !o.contains("motion") || !o["motion"].is_object()) continue;
    auto& m = o["motion"];
    if (!m.contains("kind") || m["kind"] != "replay" || !m.contains("file") || !m["file"].is_string()) continue;
    std::filesystem::path p = m["file"].get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    m["file"] = std::filesystem::absolute(p).lexically_normal().string();
  }
  return j;
}

inline Loaded load(const Options& opt)
{
  if (opt.config.empty() == opt.preset.empty()) throw ConfigError("--config", "give exactly one of --config or --preset");
  Json j;
  std::filesystem::path base = std::filesystem::current_path();
  if (!opt.config.empty()) {
    j = load_config_file(opt.config);
    base = std::filesystem::absolute(opt.config).parent_path();
  } else {
    j = resolve_config(Json{{"preset", opt.preset}});
  }
  j = absolute_replay_paths(std::move(j), base);
  Loaded l;
  l.config = parse_config(j, base);
  l.seed = opt.seed.value_or(l.config.sim.seed);
  l.config.sim.seed = l.seed;
  if (!j.contains("sim") || !j["sim"].is_object()) j["sim"] = Json::object();
  j["sim"]["seed"] = l.seed;
  l.json = std::move(j);
  return l;
}

inline std::ofstream open_out(const std::filesystem::path& dir, const std::string& name)
{
  std::filesystem::create_directories(dir);
  std::ofstream f(dir / name);
  if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
  return f;
}

inline void write_resolved(const Options& opt, const Json& j)
{
  auto f = open_out(opt.out, "config.resolved.json");
  f << j.dump(2) << "\n";
}

inline std::string csv_field(const std::string& s)
{
  std::string q = "\"";
  for (const char c : s) {
    if (c == '"') q += '"';
    q += (c == '\n' ? ' ' : c);
  }
  return q + "\"";
}

/// Runs `body`, mapping configuration problems to exit code 1 with the message on `err`.
template <class F>
int guarded(std::ostream& err, F&& body)
{
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
  } catch (const ArgumentError& e) {
    err << "config error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitConfig;
}

// ---------------------------------------------------------------- run

inline int cmd_run(const Options& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
  return guarded(err, [&] {
    const Loaded l = load(opt);
    std::optional<std::ofstream> dump;
    if (opt.dump_qp) dump = open_out(opt.out, "qp_dump.txt");
    std::size_t dumped = 0;

    World world(l.config, l.seed);
    world.filter().keep_problems(opt.dump_qp);
    ScenarioResult res;
    res.initial_obstacles = world.obstacles();
    MetricsAccumulator acc(l.config.obstacle_ids(), l.config.roi_rule);
    for (std::size_t k = 0; k < world.num_ticks(); ++k) {
      res.records.push_back(world.step());
      const auto& rec = res.records.back();
      acc.add(rec);
      // tick 0 plus every tick that left nominal, capped at 100 problems
      if (dump && dumped < 100 && (k == 0 || rec.status != FilterStatus::Nominal)) {
        *dump << "## tick " << k << " t " << rec.t << " status " << to_string(rec.status) << " reason "
              << to_string(rec.reason) << "\n";
        if (const auto& p = world.filter().last_problem()) write_qp(*dump, *p);
        else *dump << "# no problem built\n";
        ++dumped;
      }
    }
    res.metrics = acc.result();

    {
      auto f = open_out(opt.out, "steps.csv");
      write_steps_csv(f, l.config, res.records);
    }
    {
      auto f = open_out(opt.out, "metrics.json");
      f << metrics_json(res.metrics, l.config, l.seed).dump(2) << "\n";
    }
    write_resolved(opt, l.json);

    out << l.config.name << " seed " << l.seed << ": " << res.metrics.ticks << " ticks, rmse " << res.metrics.rmse
        << ", emergency ticks " << res.metrics.emergency_ticks;
    for (const auto& o : res.metrics.obstacles) out << ", " << o.id << " d_min " << o.d_min;
    out << "\n";
    return res.metrics.emergency_ticks > 0 ? kExitEmergency : kExitOk;
  });
}

// ---------------------------------------------------------------- batch

struct BatchResult
{
  std::vector<std::optional<ScenarioMetrics>> metrics;  ///< by seed
  std::vector<std::string> errors;
};

/// Seeds 0..n-1 over a pool of workers; each worker owns its world. Results land by seed index.
inline BatchResult run_batch(const ScenarioConfig& cfg, std::size_t n, unsigned workers)
{
  BatchResult r;
  r.metrics.resize(n);
  r.errors.resize(n);
  if (workers == 0) workers = std::max(1U, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        r.metrics[i] = run_scenario(cfg, i).metrics;
      } catch (const std::exception& e) {
        r.errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return r;
}

inline void write_batch_csv(std::ostream& os, const ScenarioConfig& cfg, const BatchResult& b)
{
  const auto ids = cfg.obstacle_ids();
  os << batch_header(ids) << "\n";
  for (std::size_t i = 0; i < b.metrics.size(); ++i) {
    if (b.metrics[i]) {
      os << batch_row(i, *b.metrics[i]) << "\n";
    } else {
      os << i << std::string(1 + 3 * ids.size() + 3, ',') << "," << csv_field(b.errors[i]) << "\n";
    }
  }
}

inline int cmd_batch(const Options& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
  return guarded(err, [&] {
    if (opt.seeds < 1) throw ConfigError("--seeds", "must be >= 1");
    const Loaded l = load(opt);
    const auto b = run_batch(l.config, static_cast<std::size_t>(opt.seeds), opt.workers);
    {
      auto f = open_out(opt.out, "batch.csv");
      write_batch_csv(f, l.config, b);
    }
    write_resolved(opt, l.json);

    bool failed = false;
    bool emergency = false;
    std::vector<std::size_t> violations(l.config.obstacles.size(), 0);
    std::vector<double> worst(l.config.obstacles.size(), kUnbounded);
    for (std::size_t i = 0; i < b.metrics.size(); ++i) {
      if (!b.metrics[i]) {
        failed = true;
        err << "seed " << i << " failed: " << b.errors[i] << "\n";
        continue;
      }
      emergency = emergency || b.metrics[i]->emergency_ticks > 0;
      for (std::size_t k = 0; k < violations.size(); ++k) {
        violations[k] += b.metrics[i]->obstacles[k].violation ? 1 : 0;
        worst[k] = std::min(worst[k], b.metrics[i]->obstacles[k].d_min);
      }
    }
    out << l.config.name << " " << to_string(l.config.filter.mode) << ", " << opt.seeds << " seeds";
    for (std::size_t k = 0; k < violations.size(); ++k) {
      out << ", " << l.config.obstacles[k].obstacle.id << " violated in " << violations[k] << " (min d_min " << worst[k]
          << ")";
    }
    out << "\n";
    if (failed) return kExitSeedFailed;
    return emergency ? kExitEmergency : kExitOk;
  });
}

// ---------------------------------------------------------------- sweep-beta

inline int cmd_sweep_beta(const Options& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
  return guarded(err, [&] {
    const Loaded l = load(opt);
    const SweepSettings s = parse_sweep(l.json);
    const std::vector<double> betas = opt.betas ? *opt.betas : s.betas;
    check_betas(betas);
    std::vector<SweepRow> rows;
    if (s.snapshot_time) {
      rows = sweep_snapshot(l.config, snapshot_at(l.config, l.seed, *s.snapshot_time), betas);
    } else {
      rows = sweep_rollout(l.config, l.seed, betas);
    }
    {
      auto f = open_out(opt.out, "sweep.csv");
      write_sweep_csv(f, rows, s.snapshot_time.has_value());
    }
    write_resolved(opt, l.json);
    bool emergency = false;
    for (const auto& r : rows) {
      emergency = emergency || r.relaxed_status == FilterStatus::Emergency || r.emergency_ticks > 0;
      out << "beta " << r.beta << ": delta_max " << r.delta_max << ", qd distance ";
      if (r.compared > 0) out << r.qd_distance;
      else out << "n/a";
      out << "\n";
    }
    return emergency ? kExitEmergency : kExitOk;
  });
}

// ---------------------------------------------------------------- coverage

inline int cmd_coverage(const Options& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
  return guarded(err, [&] {
    const Loaded l = load(opt);
    const auto n = opt.samples ? opt.samples : coverage_samples(l.json);
    if (!n) throw ConfigError("coverage.samples", "missing; set it in the config or pass --samples");
    if (*n <= 0) throw ConfigError(opt.samples ? "--samples" : "coverage.samples", "must be > 0");
    const CoverageTemplate tpl = parse_coverage(l.json);
    const auto report = coverage_search(l.config.chain, tpl, static_cast<std::size_t>(*n), l.seed);

    std::size_t relaxed_ok = 0;
    double margin = kUnbounded;
    for (const auto& smp : report.infeasible) {
      if (smp.relaxed == QpStatus::Optimal) ++relaxed_ok;
      margin = std::min(margin, smp.priority0_margin);
    }
    {
      auto f = open_out(opt.out, "coverage.csv");
      write_coverage_csv(f, l.config.chain, tpl, report);
    }
    {
      auto f = open_out(opt.out, "coverage.json");
      Json j;
      j["samples"] = report.samples;
      j["seed"] = l.seed;
      j["strict_infeasible"] = report.infeasible.size();
      j["relaxed_optimal"] = relaxed_ok;
      j["min_priority0_margin"] = report.infeasible.empty() ? Json(nullptr) : detail::bound_json(margin);
      f << j.dump(2) << "\n";
    }
    write_resolved(opt, l.json);
    out << "coverage " << l.config.name << ": " << report.samples << " samples, " << report.infeasible.size()
        << " strict-infeasible, " << relaxed_ok << " of them relaxed-optimal\n";
    return kExitOk;
  });
}

}  // namespace hcbf::cli
