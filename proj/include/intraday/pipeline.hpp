#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "intraday/backtest.hpp"
#include "intraday/impact.hpp"
#include "intraday/ingest.hpp"
#include "intraday/optimizer.hpp"
#include "intraday/strategies.hpp"

// End-to-end runs: synth -> fit -> run -> report, driven by one INI file.

namespace intraday {

struct DatasetSpec {
  std::chrono::year_month_day first_day{};
  int days = 0;
  std::vector<int> delivery_hours{14};
};

struct RunConfig {
  std::filesystem::path train_dir = "data/train";
  std::filesystem::path test_dir = "data/test";
  std::filesystem::path model_path = "out/model.json";
  std::filesystem::path output_dir = "out";

  SynthConfig synth;
  DatasetSpec train{std::chrono::year{2018} / 1 / 1, 200, {14}};
  DatasetSpec test{std::chrono::year{2019} / 1 / 1, 200, {14}};
  int data_lead_minutes = 300;  // arrival used when generating and aggregating files

  ImpactFitConfig fit;
  GaConfig ga;
  double y0 = 47.22;
  double daily_volatility = 20.57;
  double drift = 0.0;
  double lambda = 2e-5;
  std::vector<Scenario> scenarios = default_scenarios();
  std::vector<std::string> strategies{"IOBE", "TWAP", "VWAP", "Opti_C", "Opti_sv"};
  std::vector<std::vector<double>> robustness_paths = default_robustness_paths();

  std::uint64_t seed = 42;
  int jobs = 0;  // 0 keeps the OpenMP default
};

// Strategy names understood by the run stage.
const std::vector<std::string>& known_strategies();

// Parses the INI text; keys absent from the file keep their defaults.
// Relative paths are resolved against base_dir. Throws ConfigError.
RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
// Checks invariants and propagates the run seed into the synth and GA seeds.
void finalize(RunConfig& config);
// Canonical text for hashing; every field that influences outputs appears.
std::string canonical_text(const RunConfig& config);
// 16 hex digits of the 64-bit FNV-1a hash of canonical_text().
std::string config_hash(const RunConfig& config);

// "300x300" or "300x300:sell" entries, comma separated.
std::vector<Scenario> parse_scenarios(const std::string& text);
std::vector<std::string> parse_strategies(const std::string& text);

// In-memory stages -----------------------------------------------------------

std::vector<Timestamp> delivery_times(const DatasetSpec& spec);

// One delivery product generated with arrival data_lead_minutes before delivery.
ProductEvents synth_product(const SynthConfig& synth, Timestamp delivery_start, int lead_minutes);
ProductEvents read_product(const std::filesystem::path& path, int lead_minutes);
// LOB files of a directory in name order.
std::vector<std::filesystem::path> list_lob_files(const std::filesystem::path& dir);

// What a training product contributes to the fit.
struct TrainingDay {
  std::vector<ImpactObservation> observations;
  std::vector<double> traded_volume;  // per bucket
  std::size_t temporary = 0;
  std::size_t permanent = 0;
  std::size_t permanent_skipped = 0;
};

TrainingDay training_day(const ProductEvents& product);

// Per-product work runs in parallel; products are materialized one at a
// time per worker so memory stays bounded by the grids that are kept.
std::vector<TrainingDay> training_days(const SynthConfig& synth, const DatasetSpec& spec, int lead_minutes,
                                       Exec exec);
std::vector<TrainingDay> training_days(std::span<const std::filesystem::path> files, int lead_minutes, Exec exec);
std::vector<BucketGrid> test_grids(const SynthConfig& synth, const DatasetSpec& spec, int lead_minutes, Exec exec);
std::vector<BucketGrid> test_grids(std::span<const std::filesystem::path> files, int lead_minutes, Exec exec);

struct StratumDiagnostics {
  std::string stratum;
  std::size_t observations = 0;
  std::size_t floored = 0;
  double gamma_k = 0.0;
  double gamma_n = 0.0;
  double gcv = 0.0;
};

struct FitOutput {
  ImpactModel model;
  VolumeProfile profile;
  std::size_t temporary_observations = 0;
  std::size_t permanent_observations = 0;
  std::size_t permanent_skipped = 0;
  std::vector<StratumDiagnostics> diagnostics;
};

FitOutput fit_training(std::span<const TrainingDay> days, int lead_minutes, const ImpactFitConfig& config);

struct PlanOutput {
  std::vector<ScenarioPlan> plans;
  std::vector<nlohmann::json> traces;  // one per optimized (scenario, strategy), in plan order
  std::vector<std::string> failures;   // "scenario: reason"
};

// Trajectories for every scenario and strategy. Optimized strategies start
// from TWAP and VWAP. Every plan compares Opti_C and Opti_sv against the
// other strategies present.
PlanOutput plan_scenarios(const RunConfig& config, const ImpactSurface& impact, const VolumeProfile& profile,
                          Exec exec);

// The reference time covariates used for optimization: a weekday delivery
// at the first configured test hour.
TimeMeta planning_meta(const RunConfig& config);

// Commands --------------------------------------------------------------------

struct CommandResult {
  int exit_code = 0;
  std::vector<std::filesystem::path> written;
};

CommandResult cmd_synth(const RunConfig& config, std::ostream& log);
CommandResult cmd_fit(const RunConfig& config, std::ostream& log);
CommandResult cmd_run(const RunConfig& config, std::ostream& log);
CommandResult cmd_report(const RunConfig& config, std::ostream& log);

// Exit code for an error escaping a command.
int exit_code_for(const std::exception& e);

}  // namespace intraday
