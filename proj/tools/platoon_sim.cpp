#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "platoon/platoon.hpp"

namespace {

using namespace platoon;

ScenarioConfig load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  std::vector<std::string> notes;
  ScenarioConfig c = config_from_json(j, &notes);
  for (const auto& n : notes) std::cerr << "note: " << n << '\n';
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resilient platoon estimation and control simulator"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<long> horizon;
  int runs = 100;
  unsigned threads = 0;

  auto* run = app.add_subcommand("run", "simulate one seeded run and write a run directory");
  run->add_option("--config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "overrides the config seed");
  run->add_option("--horizon", horizon, "overrides the config horizon");
  run->add_option("--out", out, "output directory")->required();

  auto* mc = app.add_subcommand("monte-carlo", "seeded runs base..base+K-1, averaged");
  mc->add_option("--config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
  mc->add_option("--runs", runs, "number of runs")->check(CLI::PositiveNumber);
  mc->add_option("--seed", seed, "base seed (default: config seed)");
  mc->add_option("--horizon", horizon, "overrides the config horizon");
  mc->add_option("--threads", threads, "worker threads, 0 = all cores");
  mc->add_option("--out", out, "output directory")->required();

  auto* feas = app.add_subcommand("check-feasibility", "print the design report as JSON");
  feas->add_option("--config", config, "scenario JSON")->required()->check(CLI::ExistingFile);

  auto* bounds = app.add_subcommand("bounds", "print rho/lambda/tau envelopes with empty detection sets as CSV");
  bounds->add_option("--config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
  bounds->add_option("--horizon", horizon, "overrides the config horizon");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    ScenarioConfig cfg = load(config);
    if (horizon) {
      if (*horizon < 0) throw ConfigError("horizon must be nonnegative");
      cfg.horizon = *horizon;
    }
    if (seed) cfg.seed = *seed;

    if (*run) {
      const Trajectory tr = run_simulation(cfg);
      write_run_directory(out, tr);
      std::cerr << "wrote " << out << " (" << tr.steps.size() << " steps, bound excess "
                << max_bound_excess(tr) << ")\n";
    } else if (*mc) {
      const ResolvedScenario sc = resolve(cfg);
      const MonteCarloSummary s = monte_carlo(cfg, runs, cfg.seed, threads);
      write_monte_carlo_directory(out, sc, s);
      std::cerr << "wrote " << out << " (" << runs << " runs)\n";
    } else if (*feas) {
      const ResolvedScenario sc = resolve(cfg, false);
      const nlohmann::json report = feasibility_report(sc);
      std::cout << report.dump(2) << '\n';
      return report["feasible"].get<bool>() ? 0 : 1;
    } else if (*bounds) {
      write_envelopes_csv(std::cout, bound_envelopes(resolve(cfg)));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
