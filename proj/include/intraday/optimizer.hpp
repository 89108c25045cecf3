#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

#include "intraday/calendar.hpp"
#include "intraday/exec.hpp"
#include "intraday/impact.hpp"
#include "intraday/strategies.hpp"

// Execution cost of a trajectory and its mean-variance optimization.
//
// For a trajectory with N buckets the impact surface is queried with horizon
// N + 30. Impact terms use |n_k| so that impact always adds cost.

namespace intraday {

// Per-bucket price volatility from a daily one: sigma_daily / sqrt(1440).
double bucket_volatility(double daily_volatility);

struct CostModelParams {
  double y0 = 47.22;
  double sigma_price = bucket_volatility(20.57);
  double lambda = 0.0;
  const ImpactSurface* impact = nullptr;
};

void validate(const CostModelParams& params);

// sum n_k y0 + sum_{k>=2} |n_k| mu_perm(|n_{k-1}|, k-1) + sum |n_k| mu_temp(|n_k|, k)
double expected_cost(const TradeTrajectory& trajectory, const CostModelParams& params, const TimeMeta& t_meta);

// sum n_k^2 sigma^2 k + sum n_k^2 sigma_perm^2(|n_k|, k) + sum n_k^2 sigma_temp^2(|n_k|, k)
double cost_variance(const TradeTrajectory& trajectory, const CostModelParams& params, const TimeMeta& t_meta);

// Impact part of the expected cost plus lambda times the variance. The
// y0 * X term is constant over feasible trajectories and left out.
double objective(const TradeTrajectory& trajectory, const CostModelParams& params, const TimeMeta& t_meta);

// Objective contributions tabulated for every tick count 0..max_ticks of
// every bucket. The sum over buckets of
//   own(k, t_k) + n(t_k) * carry(k-1, t_{k-1})
// is bit-identical to objective() for any trajectory within range.
class CostTable {
 public:
  CostTable(int buckets, Ticks max_ticks, const CostModelParams& params, const TimeMeta& t_meta,
            Exec exec = Exec::parallel);

  int buckets() const { return buckets_; }
  Ticks max_ticks() const { return max_ticks_; }
  double own(int k, Ticks t) const { return own_[index(k, t)]; }
  double carry(int k, Ticks t) const { return carry_[index(k, t)]; }
  double evaluate(std::span<const Ticks> ticks) const;

 private:
  std::size_t index(int k, Ticks t) const {
    return static_cast<std::size_t>(k - 1) * static_cast<std::size_t>(max_ticks_ + 1) + static_cast<std::size_t>(t);
  }

  int buckets_;
  Ticks max_ticks_;
  std::vector<double> own_;
  std::vector<double> carry_;
};

struct GaConfig {
  int population_size = 200;
  int max_stall_iterations = 650;
  int max_generations = 20 * 650;
  double mutation_rate = 0.1;
  double crossover_rate = 0.8;
  int elitism_count = 5;
  int tournament_size = 3;
  std::uint64_t seed = 1;
};

void validate(const GaConfig& config);

struct GaTrace {
  std::vector<double> best_objective;  // per generation, generation 0 first
  int generations = 0;
  bool stalled = false;  // stopped by the stall criterion rather than the cap
};

struct OptimizeResult {
  TradeTrajectory trajectory;
  double objective = 0.0;
  GaTrace trace;
};

// Genetic search over tick vectors summing to X. Every candidate is repaired
// onto the feasible set (clip at zero, rescale to X, apportion to ticks).
// The initial population holds TWAP, the given warm starts (e.g. VWAP),
// perturbations of TWAP and sparse random schedules; elitism keeps the best
// one found. Each child draws
// from its own random stream keyed by (seed, generation, slot), so serial and
// parallel runs give identical results.
// Throws InfeasibleTick when X is off the tick grid and NotFitted when the
// impact surface is missing or unfitted.
OptimizeResult optimize(double X, int N, Side direction, const CostModelParams& params, const GaConfig& ga,
                        const TimeMeta& t_meta, std::span<const TradeTrajectory> warm_starts = {},
                        Exec exec = Exec::parallel);

nlohmann::json trace_to_json(const OptimizeResult& result, const GaConfig& ga, const CostModelParams& params);

}  // namespace intraday
