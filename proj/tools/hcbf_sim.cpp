#include "hcbf/cli.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv)
{
  using namespace hcbf;
  CLI::App app{"Prioritized CBF safety filter: scenario simulator"};
  app.require_subcommand(1);
  cli::Options opt;
  std::uint64_t seed = 0;
  std::vector<std::string> betas;
  long long samples = 0;

  auto common = [&](CLI::App* sub) {
    auto* cfg = sub->add_option("--config", opt.config, "scenario JSON file");
    auto* pre = sub->add_option("--preset", opt.preset, "embedded scenario preset")
                    ->check(CLI::IsMember(presets::scenario_names()));
    cfg->excludes(pre);
    sub->add_option("--seed", seed, "seed override (default: sim.seed from the config)");
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
  };

  auto* run = app.add_subcommand("run", "one rollout: steps.csv, metrics.json");
  common(run);
  run->add_flag("--dump-qp", opt.dump_qp, "write the QP of tick 0 and of every non-nominal tick (first 100)");

  auto* batch = app.add_subcommand("batch", "seeds 0..N-1 in parallel: batch.csv");
  common(batch);
  batch->add_option("--seeds", opt.seeds, "number of seeds")->capture_default_str();
  batch->add_option("--workers", opt.workers, "worker threads (0: one per CPU)")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep-beta", "relaxed solve per beta vs the strict solution: sweep.csv");
  common(sweep);
  auto* betas_opt = sweep->add_option("--betas", betas, "comma-separated beta values (default: sweep.betas)")
                        ->delimiter(',')
                        ->expected(0, -1);

  auto* cov = app.add_subcommand("coverage", "search for strict-infeasible snapshots: coverage.csv");
  common(cov);
  auto* samples_opt = cov->add_option("--samples", samples, "number of samples (default: coverage.samples)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // help and version exit 0; every argument problem is a configuration error
    return app.exit(e) == 0 ? cli::kExitOk : cli::kExitConfig;
  }

  for (auto* sub : {run, batch, sweep, cov}) {
    if (sub->parsed() && sub->count("--seed") > 0) opt.seed = seed;
  }
  if (betas_opt->count() > 0) {
    opt.betas.emplace();
    for (const auto& b : betas) {
      if (b.empty()) continue;
      try {
        std::size_t used = 0;
        opt.betas->push_back(std::stod(b, &used));
        if (used != b.size()) throw std::invalid_argument(b);
      } catch (const std::exception&) {
        std::cerr << "config error: --betas: '" << b << "' is not a number\n";
        return cli::kExitConfig;
      }
    }
  }
  if (samples_opt->count() > 0) opt.samples = samples;

  if (run->parsed()) return cli::cmd_run(opt);
  if (batch->parsed()) return cli::cmd_batch(opt);
  if (sweep->parsed()) return cli::cmd_sweep_beta(opt);
  return cli::cmd_coverage(opt);
}
