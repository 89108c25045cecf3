#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "intraday/exec.hpp"
#include "intraday/lob_core.hpp"
#include "intraday/strategies.hpp"

// Out-of-sample evaluation of trajectories on held-out grids.

namespace intraday {

struct Scenario {
  double volume = 300.0;  // X, MWh
  int lead_minutes = 300;
  Side direction = Side::buy;

  int buckets() const { return lead_minutes - kCutoffMinutes; }
  std::string label() const;

  bool operator==(const Scenario&) const = default;
};

void validate(const Scenario& s);

// X in {100, 300, 1000} by lead in {90, 300}, buys.
std::vector<Scenario> default_scenarios();

// Each n_k hits the cell (k, r) with r the bucket containing |n_k|; the
// result is the |n_k|-weighted mean of those cells' median spreads.
// The grid must have as many buckets as the trajectory. Throws MissingCell.
double realized_bas(const TradeTrajectory& trajectory, const BucketGrid& grid,
                    const VolumeBucketScheme& scheme = VolumeBucketScheme::standard());

// Same weighting over side-specific median prices: buys lift the sell side,
// sells hit the buy side.
double realized_price(const TradeTrajectory& trajectory, const BucketGrid& grid,
                      const VolumeBucketScheme& scheme = VolumeBucketScheme::standard());

enum class StdVariant { literal, conventional };

// literal:      sqrt( sum (b_t - mu)^2 / ((T-1)/T * sum v_t) )
// conventional: sqrt( sum v_t (b_t - mu)^2 / ((T-1)/T * sum v_t) )
// with mu the v-weighted mean. Throws DegenerateSample when T < 2.
double weighted_std_bas(std::span<const double> bas, std::span<const double> volumes,
                        StdVariant variant = StdVariant::literal);

// Welch test of mean(a) < mean(b); returns the one-sided p-value.
double one_sided_t_test(std::span<const double> a, std::span<const double> b);

// Half-spread saving per delivery hour: mw * (bas_b - bas_a) / 2.
double hourly_savings(double bas_a, double bas_b, double mw);
// Annualized over 24 * 365 delivery hours.
double savings_summary(double bas_a, double bas_b, double daily_mw);

struct StrategyMetrics {
  std::string strategy;
  double median_bas = 0.0;
  double mean_bas = 0.0;
  double median_buy_price = 0.0;
  double median_sell_price = 0.0;
  double weighted_std = 0.0;
  double weighted_std_conventional = 0.0;
  std::size_t sample_days = 0;
  std::size_t excluded_days = 0;
  std::vector<double> day_bas;  // retained days in day order

  bool operator==(const StrategyMetrics&) const = default;
};

struct ScenarioReport {
  Scenario scenario;
  std::vector<StrategyMetrics> strategies;
  std::map<std::string, double> p_values;  // "A<B": p for mean(A) < mean(B)

  const StrategyMetrics& metrics(const std::string& strategy) const;

  bool operator==(const ScenarioReport&) const = default;
};

struct BacktestReport {
  std::vector<std::size_t> days;  // indices into the evaluated day list
  std::vector<ScenarioReport> scenarios;

  bool operator==(const BacktestReport&) const = default;
};

struct NamedTrajectory {
  std::string strategy;
  TradeTrajectory trajectory;
};

struct ScenarioPlan {
  Scenario scenario;
  std::vector<NamedTrajectory> strategies;
  // Pairs (a, b) to test for mean(a) < mean(b).
  std::vector<std::pair<std::string, std::string>> comparisons;
};

// Grids hold the longest lead; shorter scenarios use their tail. An empty
// day subset means every day.
BacktestReport run_backtest(std::span<const BucketGrid> days, std::span<const ScenarioPlan> plans,
                            std::span<const std::size_t> subset = {}, Exec exec = Exec::parallel,
                            const VolumeBucketScheme& scheme = VolumeBucketScheme::standard());

struct RobustnessRun {
  std::size_t path = 0;
  double fraction = 1.0;  // share of all days retained
  BacktestReport report;

  bool operator==(const RobustnessRun&) const = default;
};

// Each path deletes days in nested steps: the subset for a fraction is drawn
// from the previous one. Fractions are absolute shares of the full sample.
// Throws EmptySample when a step keeps no day.
std::vector<RobustnessRun> subsample_robustness(std::span<const BucketGrid> days, std::span<const ScenarioPlan> plans,
                                                const std::vector<std::vector<double>>& paths, std::uint64_t seed,
                                                Exec exec = Exec::parallel,
                                                const VolumeBucketScheme& scheme = VolumeBucketScheme::standard());

// [0.4, 0.24] and [0.75, 0.375].
std::vector<std::vector<double>> default_robustness_paths();

nlohmann::json to_json(const BacktestReport& report);
BacktestReport backtest_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const std::vector<RobustnessRun>& runs);
std::vector<RobustnessRun> robustness_from_json(const nlohmann::json& j);

enum class TableMetric { median_bas, weighted_std, buy_price, sell_price };

// Rows are strategies, columns scenarios. median_bas cells read "median (mean)".
void write_table_csv(std::ostream& out, const BacktestReport& report, TableMetric metric);
// One row per scenario and tested pair.
void write_pvalues_csv(std::ostream& out, const BacktestReport& report);
// Long format: path,fraction,scenario,strategy,median_bas,mean_bas,sample_days.
void write_robustness_csv(std::ostream& out, const std::vector<RobustnessRun>& runs);

}  // namespace intraday
