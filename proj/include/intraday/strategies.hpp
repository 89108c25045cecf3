#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <vector>

#include "intraday/lob_core.hpp"

// Trade trajectories on the 0.1 MWh tick grid and the benchmark schedules.
//
// Volumes are held as non-negative tick counts per bucket; the signed view
// (buys positive, sells negative) is derived from the direction.

namespace intraday {

using Ticks = std::int64_t;
inline constexpr Ticks kTicksPerMwh = 10;

// Exact tick count of a volume; throws InfeasibleTick off the 0.1 MWh grid.
Ticks to_ticks(double volume);
inline double from_ticks(Ticks t) { return static_cast<double>(t) / static_cast<double>(kTicksPerMwh); }

// Integer apportionment of total over the given non-negative weights:
// floor of each share, then the leftover ticks go to the largest fractional
// remainders, earliest bucket first on ties. All-zero weights split evenly.
std::vector<Ticks> apportion(std::span<const double> weights, Ticks total);

class TradeTrajectory {
 public:
  TradeTrajectory() = default;
  TradeTrajectory(Side direction, std::vector<Ticks> ticks);

  Side direction() const { return direction_; }
  int buckets() const { return static_cast<int>(ticks_.size()); }
  const std::vector<Ticks>& ticks() const { return ticks_; }
  Ticks total_ticks() const { return total_; }
  // Signed total X.
  double total() const;
  // Signed n_k, 1-based.
  double n(int k) const;
  std::vector<double> allocations() const;
  // x_0..x_N with x_k = X - sum_{j<=k} n_j.
  std::vector<double> inventory() const;

  bool operator==(const TradeTrajectory&) const = default;

 private:
  Side direction_ = Side::buy;
  std::vector<Ticks> ticks_;
  Ticks total_ = 0;
};

// X is the unsigned position size in MWh.
TradeTrajectory iobe(double X, int N, Side direction);
TradeTrajectory twap(double X, int N, Side direction);

class VolumeProfile {
 public:
  VolumeProfile() = default;
  // Throws AllZeroVolume unless some entry is positive.
  explicit VolumeProfile(std::vector<double> v_hat);

  std::size_t size() const { return v_hat_.size(); }
  const std::vector<double>& v_hat() const { return v_hat_; }
  // F_k = v_hat_k / mean(v_hat).
  std::vector<double> factors() const;
  // Last n buckets, for a later arrival against the same delivery.
  VolumeProfile tail(std::size_t n) const;

  bool operator==(const VolumeProfile&) const = default;

 private:
  std::vector<double> v_hat_;
};

// Mean traded volume per bucket over training grids of equal length.
VolumeProfile volume_profile(std::span<const BucketGrid> training);
VolumeProfile volume_profile(const BucketGrid& training);

// Throws LengthMismatch unless profile.size() == N.
TradeTrajectory vwap(double X, int N, const VolumeProfile& profile, Side direction);

// Columns k,n_k,x_k; k = 0 carries the starting inventory.
void write_trajectory_csv(std::ostream& out, const TradeTrajectory& trajectory);
void write_trajectory_csv(const std::filesystem::path& path, const TradeTrajectory& trajectory);

}  // namespace intraday
