#include "intraday/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "intraday/error.hpp"

namespace intraday {

namespace {

void check_size(double X, int N) {
  if (!(X > 0.0)) throw OutOfRange("position size must be > 0");
  if (N < 1) throw OutOfRange("need at least one trading bucket");
}

}  // namespace

Ticks to_ticks(double volume) {
  const double scaled = volume * static_cast<double>(kTicksPerMwh);
  const double rounded = std::round(scaled);
  if (!std::isfinite(scaled) || std::abs(scaled - rounded) > 1e-6) throw InfeasibleTick(volume);
  return static_cast<Ticks>(rounded);
}

std::vector<Ticks> apportion(std::span<const double> weights, Ticks total) {
  const auto n = weights.size();
  if (n == 0) throw OutOfRange("cannot apportion over zero buckets");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw OutOfRange("apportion weights must be finite and >= 0");
    sum += w;
  }
  std::vector<Ticks> out(n, 0);
  std::vector<double> remainder(n, 0.0);
  Ticks assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double share = sum > 0.0 ? static_cast<double>(total) * weights[i] / sum
                                   : static_cast<double>(total) / static_cast<double>(n);
    const double base = std::floor(share);
    out[i] = static_cast<Ticks>(base);
    remainder[i] = share - base;
    assigned += out[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  // Floors can overshoot by rounding in share; trim from the smallest remainders.
  for (std::size_t i = 0; assigned < total; i = (i + 1) % n, ++assigned) ++out[order[i]];
  for (std::size_t i = n; assigned > total;) {
    i = (i == 0 ? n : i) - 1;
    if (out[order[i]] > 0) {
      --out[order[i]];
      --assigned;
    }
  }
  return out;
}

TradeTrajectory::TradeTrajectory(Side direction, std::vector<Ticks> ticks)
    : direction_(direction), ticks_(std::move(ticks)) {
  for (auto t : ticks_) {
    if (t < 0) throw OutOfRange("trajectory tick counts must be >= 0");
    total_ += t;
  }
}

double TradeTrajectory::total() const {
  const double x = from_ticks(total_);
  return direction_ == Side::buy ? x : -x;
}

double TradeTrajectory::n(int k) const {
  if (k < 1 || k > buckets()) throw OutOfRange("bucket " + std::to_string(k) + " outside trajectory");
  const double v = from_ticks(ticks_[static_cast<std::size_t>(k - 1)]);
  return direction_ == Side::buy ? v : -v;
}

std::vector<double> TradeTrajectory::allocations() const {
  std::vector<double> out;
  out.reserve(ticks_.size());
  for (int k = 1; k <= buckets(); ++k) out.push_back(n(k));
  return out;
}

std::vector<double> TradeTrajectory::inventory() const {
  std::vector<double> x;
  x.reserve(ticks_.size() + 1);
  Ticks left = total_;
  const double sign = direction_ == Side::buy ? 1.0 : -1.0;
  x.push_back(sign * from_ticks(left));
  for (auto t : ticks_) {
    left -= t;
    x.push_back(sign * from_ticks(left));
  }
  return x;
}

TradeTrajectory iobe(double X, int N, Side direction) {
  check_size(X, N);
  std::vector<Ticks> ticks(static_cast<std::size_t>(N), 0);
  ticks[0] = to_ticks(X);
  return {direction, std::move(ticks)};
}

TradeTrajectory twap(double X, int N, Side direction) {
  check_size(X, N);
  const std::vector<double> w(static_cast<std::size_t>(N), 1.0);
  return {direction, apportion(w, to_ticks(X))};
}

VolumeProfile::VolumeProfile(std::vector<double> v_hat) : v_hat_(std::move(v_hat)) {
  bool positive = false;
  for (double v : v_hat_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw OutOfRange("profile volumes must be finite and >= 0");
    positive = positive || v > 0.0;
  }
  if (!positive) throw AllZeroVolume();
}

std::vector<double> VolumeProfile::factors() const {
  const double mean = std::accumulate(v_hat_.begin(), v_hat_.end(), 0.0) / static_cast<double>(v_hat_.size());
  std::vector<double> f;
  f.reserve(v_hat_.size());
  for (double v : v_hat_) f.push_back(v / mean);
  return f;
}

VolumeProfile VolumeProfile::tail(std::size_t n) const {
  if (n < 1 || n > v_hat_.size()) throw OutOfRange("profile tail of " + std::to_string(n) + " buckets");
  return VolumeProfile(std::vector<double>(v_hat_.end() - static_cast<std::ptrdiff_t>(n), v_hat_.end()));
}

VolumeProfile volume_profile(std::span<const BucketGrid> training) {
  if (training.empty()) throw AllZeroVolume();
  const int n = training.front().n_buckets();
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  for (const auto& g : training) {
    if (g.n_buckets() != n)
      throw LengthMismatch(static_cast<std::size_t>(n), static_cast<std::size_t>(g.n_buckets()));
    for (int k = 1; k <= n; ++k) v[static_cast<std::size_t>(k - 1)] += g.traded_volume(k);
  }
  for (auto& x : v) x /= static_cast<double>(training.size());
  return VolumeProfile(std::move(v));
}

VolumeProfile volume_profile(const BucketGrid& training) { return volume_profile(std::span(&training, 1)); }

TradeTrajectory vwap(double X, int N, const VolumeProfile& profile, Side direction) {
  check_size(X, N);
  if (profile.size() != static_cast<std::size_t>(N)) throw LengthMismatch(static_cast<std::size_t>(N), profile.size());
  const auto f = profile.factors();
  return {direction, apportion(f, to_ticks(X))};
}

void write_trajectory_csv(std::ostream& out, const TradeTrajectory& trajectory) {
  const auto x = trajectory.inventory();
  char buf[96];
  out << "k,n_k,x_k\n";
  std::snprintf(buf, sizeof buf, "0,0.0,%.1f\n", x[0]);
  out << buf;
  for (int k = 1; k <= trajectory.buckets(); ++k) {
    std::snprintf(buf, sizeof buf, "%d,%.1f,%.1f\n", k, trajectory.n(k) + 0.0, x[static_cast<std::size_t>(k)] + 0.0);
    out << buf;
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const TradeTrajectory& trajectory) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_trajectory_csv(out, trajectory);
}

}  // namespace intraday
