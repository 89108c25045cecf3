#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <vector>

#include "intraday/impact.hpp"
#include "intraday/ingest.hpp"
#include "intraday/lob_core.hpp"
#include "intraday/pipeline.hpp"

namespace intraday {
// Keeps gtest failure output readable.
inline void PrintTo(const OrderEvent& e, std::ostream* os) {
  *os << to_string(e.side) << ',' << e.price << ',' << e.volume << ',' << e.valid_from << ',' << e.valid_to << ','
      << to_string(e.action);
}
}  // namespace intraday

namespace testing_support {

using namespace intraday;

inline Timestamp delivery(int day = 7, int hour = 14) {
  return std::chrono::sys_days{std::chrono::year{2019} / 1 / day} + std::chrono::hours{hour};
}

inline OrderEvent add(Side side, double price, double volume, Seconds from, Seconds to,
                      Timestamp d = delivery()) {
  return {d, side, price, volume, from, to, Action::add};
}

inline OrderEvent match(Side side, double price, double volume, Seconds at, Timestamp d = delivery()) {
  return {d, side, price, volume, at, at + 1, Action::match};
}

// Surface with mu_temp = c * n everywhere and nothing else.
class LinearSurface final : public ImpactSurface {
 public:
  explicit LinearSurface(double c) : c_(c) {}
  ImpactEstimate evaluate(ImpactKind kind, double n, int, int, const TimeMeta&) const override {
    if (kind == ImpactKind::permanent || n == 0.0) return {0.0, 0.0};
    return {c_ * n, 0.0};
  }

 private:
  double c_;
};

// Regime-level surface: a base temporary impact growing like sqrt(n), scaled
// per regime of the queried bucket; a small permanent level.
class RegimeSurface final : public ImpactSurface {
 public:
  RegimeSurface(double xbid, double cutover, double local) : mult_{xbid, cutover, local} {}
  ImpactEstimate evaluate(ImpactKind kind, double n, int k, int horizon, const TimeMeta&) const override {
    if (n == 0.0) return {0.0, 0.0};
    const double m = mult_[static_cast<std::size_t>(classify_regime(k, horizon))];
    if (kind == ImpactKind::permanent) return {0.01 * m, 0.01};
    return {m * (0.5 + 0.1 * std::sqrt(n)), 0.1 * m};
  }

 private:
  std::array<double, 3> mult_;
};

// Impact model fitted on in-memory synthetic training days. Cached per seed.
inline const FitOutput& synthetic_fit(std::uint64_t seed, int days = 60, int lead = 300) {
  static std::mutex mu;
  static std::map<std::tuple<std::uint64_t, int, int>, FitOutput> cache;
  std::lock_guard lock(mu);
  const auto key = std::make_tuple(seed, days, lead);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  SynthConfig synth;
  synth.seed = seed;
  DatasetSpec spec{std::chrono::year{2018} / 1 / 1, days, {14}};
  const auto training = training_days(synth, spec, lead, Exec::parallel);
  ImpactFitConfig fit;
  fit.min_observations = 4;
  return cache.emplace(key, fit_training(training, lead, fit)).first->second;
}

}  // namespace testing_support
