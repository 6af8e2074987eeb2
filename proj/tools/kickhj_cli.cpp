#include <CLI11.hpp>

#include <iostream>

#include "kickhj/experiment.hpp"

using namespace kickhj;

namespace {

struct Common {
  std::string config;
  long long seed = -1;
  int threads = -1;
  std::string out = "out";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "override the config seed")->check(CLI::NonNegativeNumber);
  app->add_option("--threads", c.threads, "worker threads, 0 = hardware")->check(CLI::NonNegativeNumber);
  app->add_option("--out", c.out, "artifact root; the run goes to <out>/<config hash>");
}

int run(const Common& c, const std::vector<std::string>& stages) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  if (c.threads >= 0) cfg.threads = c.threads;
  if (!stages.empty()) cfg.stages = stages;
  RunResult r = run_experiment(cfg, c.out, &std::cerr);
  std::cout << r.dir << '\n';
  return r.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kicked Hamilton-Jacobi experiments: viscosity solutions, global minimiser, Green bundles, "
               "Lyapunov exponents, unstable manifold, nondegeneracy Monte Carlo"};
  app.require_subcommand(1);

  Common common;
  auto* run_cmd = app.add_subcommand("run", "run the stages listed in the config");
  add_common(run_cmd, common);

  std::vector<std::pair<std::string, CLI::App*>> stage_cmds;
  for (const auto& s : kStageOrder) {
    auto* sub = app.add_subcommand(s, "run the " + s + " stage and its dependencies");
    add_common(sub, common);
    stage_cmds.emplace_back(s, sub);
  }

  std::string report_dir;
  auto* rep = app.add_subcommand("report", "summarise a run directory; exit code 1 if an invariant fails");
  rep->add_option("dir", report_dir, "run directory (<out>/<hash>)")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*rep) return report(report_dir, std::cout);
    if (*run_cmd) return run(common, {});
    for (auto& [stage, sub] : stage_cmds)
      if (*sub) return run(common, {stage});
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
