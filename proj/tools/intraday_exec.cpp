// intraday-exec: synth | fit | run | report, all driven by one INI file.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "intraday/exec.hpp"
#include "intraday/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out;
  std::optional<std::string> scenarios;
  std::optional<std::string> strategies;
};

intraday::RunConfig resolve(const Overrides& o) {
  auto c = intraday::load_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.out) c.output_dir = *o.out;
  if (o.scenarios) c.scenarios = intraday::parse_scenarios(*o.scenarios);
  if (o.strategies) c.strategies = intraday::parse_strategies(*o.strategies);
  intraday::finalize(c);
  if (c.jobs > 0) intraday::set_parallelism(c.jobs);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intraday execution: synthetic books, impact fit, trade scheduling and backtests"};
  app.require_subcommand(1);
  Overrides o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "INI run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override run.seed");
    sub->add_option("-j,--jobs", o.jobs, "worker threads (0 = OpenMP default)");
  };
  auto* synth = app.add_subcommand("synth", "write synthetic LOB files for the train and test sets");
  auto* fit = app.add_subcommand("fit", "fit the impact model on the training files");
  auto* run = app.add_subcommand("run", "plan every scenario and backtest on the test files");
  auto* report = app.add_subcommand("report", "render tables from an existing results.json");
  for (auto* sub : {synth, fit, run, report}) add_common(sub);
  for (auto* sub : {run, report}) sub->add_option("-o,--out", o.out, "override paths.output_dir");
  run->add_option("--scenarios", o.scenarios, "e.g. 300x300,100x90:sell");
  run->add_option("--strategies", o.strategies, "subset of IOBE,TWAP,VWAP,Opti_C,Opti_sv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto config = resolve(o);
    intraday::CommandResult result;
    if (synth->parsed()) {
      result = intraday::cmd_synth(config, std::cerr);
    } else if (fit->parsed()) {
      result = intraday::cmd_fit(config, std::cerr);
    } else if (run->parsed()) {
      result = intraday::cmd_run(config, std::cerr);
    } else {
      result = intraday::cmd_report(config, std::cerr);
    }
    return result.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return intraday::exit_code_for(e);
  }
}
