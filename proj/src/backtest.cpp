#include "intraday/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include <boost/math/distributions/students_t.hpp>

#include "intraday/error.hpp"

namespace intraday {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(std::span<const double> v) {
  if (v.empty()) return kNaN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

template <class CellValue>
double weighted_over_cells(const TradeTrajectory& traj, const BucketGrid& grid, const VolumeBucketScheme& scheme,
                           CellValue&& value) {
  if (grid.n_buckets() != traj.buckets())
    throw LengthMismatch(static_cast<std::size_t>(traj.buckets()), static_cast<std::size_t>(grid.n_buckets()));
  double num = 0.0;
  double den = 0.0;
  for (int k = 1; k <= traj.buckets(); ++k) {
    const double n = std::abs(traj.n(k));
    if (n == 0.0) continue;
    const auto r = scheme.bucket_of(n);
    const auto v = value(grid.cell(k, r));
    if (!v) throw MissingCell(k, r);
    num += n * *v;
    den += n;
  }
  if (den == 0.0) throw DegenerateSample("trajectory trades nothing");
  return num / den;
}

// Grid restricted to the scenario's buckets.
const BucketGrid& window_for(const BucketGrid& grid, int buckets, std::optional<BucketGrid>& storage) {
  if (grid.n_buckets() == buckets) return grid;
  if (grid.n_buckets() < buckets)
    throw OutOfRange("grid has " + std::to_string(grid.n_buckets()) + " buckets, scenario needs " +
                     std::to_string(buckets));
  storage = grid.tail(buckets);
  return *storage;
}

struct DayResult {
  bool ok = false;
  double bas = 0.0;
  double buy = 0.0;
  double sell = 0.0;
};

double json_number(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string format_p(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string Scenario::label() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "X%g_lead%d_%s", volume, lead_minutes, to_string(direction).c_str());
  return buf;
}

void validate(const Scenario& s) {
  if (!(s.volume > 0.0)) throw ConfigError("scenario volume must be > 0");
  if (s.lead_minutes <= kCutoffMinutes) throw ConfigError("scenario lead time must exceed 30 minutes");
  to_ticks(s.volume);
}

std::vector<Scenario> default_scenarios() {
  std::vector<Scenario> out;
  for (int lead : {90, 300}) {
    for (double x : {100.0, 300.0, 1000.0}) out.push_back({x, lead, Side::buy});
  }
  return out;
}

double realized_bas(const TradeTrajectory& traj, const BucketGrid& grid, const VolumeBucketScheme& scheme) {
  return weighted_over_cells(traj, grid, scheme, [](const GridCell& c) -> std::optional<double> {
    if (c.empty) return std::nullopt;
    return c.median_bas;
  });
}

double realized_price(const TradeTrajectory& traj, const BucketGrid& grid, const VolumeBucketScheme& scheme) {
  const Side hit = opposite(traj.direction());
  return weighted_over_cells(traj, grid, scheme, [hit](const GridCell& c) -> std::optional<double> {
    const auto& s = c.side(hit);
    if (s.empty) return std::nullopt;
    return s.median_price;
  });
}

double weighted_std_bas(std::span<const double> bas, std::span<const double> volumes, StdVariant variant) {
  if (bas.size() != volumes.size()) throw LengthMismatch(bas.size(), volumes.size());
  const auto t = bas.size();
  if (t < 2) throw DegenerateSample("weighted std needs at least 2 observations");
  double vsum = 0.0;
  double wsum = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    if (!(volumes[i] > 0.0)) throw DegenerateSample("weights must be > 0");
    vsum += volumes[i];
    wsum += volumes[i] * bas[i];
  }
  const double mu = wsum / vsum;
  double ss = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    const double d = bas[i] - mu;
    ss += variant == StdVariant::literal ? d * d : volumes[i] * d * d;
  }
  const double td = static_cast<double>(t);
  return std::sqrt(ss / ((td - 1.0) / td * vsum));
}

double one_sided_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw DegenerateSample("t-test needs at least 2 observations per sample");
  auto moments = [](std::span<const double> x) {
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::pair{m, ss / static_cast<double>(x.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double qa = va / na;
  const double qb = vb / nb;
  const double se = std::sqrt(qa + qb);
  if (se == 0.0) return ma == mb ? 0.5 : (ma < mb ? 0.0 : 1.0);
  const double t = (ma - mb) / se;
  const double df = (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  const boost::math::students_t dist(df);
  return boost::math::cdf(dist, t);
}

double hourly_savings(double bas_a, double bas_b, double mw) { return mw * (bas_b - bas_a) / 2.0; }

double savings_summary(double bas_a, double bas_b, double daily_mw) {
  return daily_mw * 24.0 * 365.0 * (bas_b - bas_a) / 2.0;
}

const StrategyMetrics& ScenarioReport::metrics(const std::string& strategy) const {
  for (const auto& s : strategies) {
    if (s.strategy == strategy) return s;
  }
  throw OutOfRange("no strategy '" + strategy + "' in scenario " + scenario.label());
}

BacktestReport run_backtest(std::span<const BucketGrid> days, std::span<const ScenarioPlan> plans,
                            std::span<const std::size_t> subset, Exec exec, const VolumeBucketScheme& scheme) {
  BacktestReport report;
  if (subset.empty()) {
    report.days.resize(days.size());
    std::iota(report.days.begin(), report.days.end(), std::size_t{0});
  } else {
    report.days.assign(subset.begin(), subset.end());
    for (auto d : report.days) {
      if (d >= days.size()) throw OutOfRange("day index " + std::to_string(d));
    }
  }
  if (report.days.empty()) throw EmptySample();

  // Flattened (plan, strategy) slots, each with one result per retained day.
  std::vector<std::pair<std::size_t, std::size_t>> slots;
  for (std::size_t p = 0; p < plans.size(); ++p) {
    for (std::size_t s = 0; s < plans[p].strategies.size(); ++s) slots.emplace_back(p, s);
  }
  const auto nd = report.days.size();
  std::vector<DayResult> results(slots.size() * nd);

  auto evaluate_day = [&](std::size_t i) {
    const auto& grid_full = days[report.days[i]];
    for (std::size_t j = 0; j < slots.size(); ++j) {
      const auto& plan = plans[slots[j].first];
      const auto& traj = plan.strategies[slots[j].second].trajectory;
      std::optional<BucketGrid> storage;
      const auto& grid = window_for(grid_full, plan.scenario.buckets(), storage);
      DayResult r;
      try {
        r.bas = realized_bas(traj, grid, scheme);
        const TradeTrajectory as_buy(Side::buy, traj.ticks());
        const TradeTrajectory as_sell(Side::sell, traj.ticks());
        r.buy = realized_price(as_buy, grid, scheme);
        r.sell = realized_price(as_sell, grid, scheme);
        r.ok = true;
      } catch (const MissingCell&) {
        r.ok = false;
      }
      results[j * nd + i] = r;
    }
  };
  const auto n = static_cast<std::ptrdiff_t>(nd);
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) evaluate_day(static_cast<std::size_t>(i));
  } else {
    std::vector<std::exception_ptr> errors(nd);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        evaluate_day(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::size_t j = 0;
  for (const auto& plan : plans) {
    ScenarioReport sr;
    sr.scenario = plan.scenario;
    for (const auto& named : plan.strategies) {
      StrategyMetrics m;
      m.strategy = named.strategy;
      std::vector<double> buy;
      std::vector<double> sell;
      for (std::size_t i = 0; i < nd; ++i) {
        const auto& r = results[j * nd + i];
        if (!r.ok) {
          ++m.excluded_days;
          continue;
        }
        m.day_bas.push_back(r.bas);
        buy.push_back(r.buy);
        sell.push_back(r.sell);
      }
      m.sample_days = m.day_bas.size();
      m.median_bas = median(m.day_bas);
      m.mean_bas = mean(m.day_bas);
      m.median_buy_price = median(buy);
      m.median_sell_price = median(sell);
      if (m.sample_days >= 2) {
        const std::vector<double> v(m.sample_days, plan.scenario.volume);
        m.weighted_std = weighted_std_bas(m.day_bas, v, StdVariant::literal);
        m.weighted_std_conventional = weighted_std_bas(m.day_bas, v, StdVariant::conventional);
      } else {
        m.weighted_std = kNaN;
        m.weighted_std_conventional = kNaN;
      }
      sr.strategies.push_back(std::move(m));
      ++j;
    }
    for (const auto& [a, b] : plan.comparisons) {
      const auto& ma = sr.metrics(a);
      const auto& mb = sr.metrics(b);
      sr.p_values[a + "<" + b] =
          ma.sample_days >= 2 && mb.sample_days >= 2 ? one_sided_t_test(ma.day_bas, mb.day_bas) : kNaN;
    }
    report.scenarios.push_back(std::move(sr));
  }
  return report;
}

std::vector<std::vector<double>> default_robustness_paths() { return {{0.4, 0.24}, {0.75, 0.375}}; }

std::vector<RobustnessRun> subsample_robustness(std::span<const BucketGrid> days, std::span<const ScenarioPlan> plans,
                                                const std::vector<std::vector<double>>& paths, std::uint64_t seed,
                                                Exec exec, const VolumeBucketScheme& scheme) {
  std::vector<RobustnessRun> runs;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(p)};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> current(days.size());
    std::iota(current.begin(), current.end(), std::size_t{0});
    double previous = 1.0;
    for (double f : paths[p]) {
      if (!(f > 0.0 && f <= previous)) throw ConfigError("robustness fractions must be in (0, 1] and non-increasing");
      previous = f;
      const auto keep = static_cast<std::size_t>(std::llround(f * static_cast<double>(days.size())));
      if (keep == 0) throw EmptySample();
      std::shuffle(current.begin(), current.end(), rng);
      current.resize(std::min(keep, current.size()));
      std::sort(current.begin(), current.end());
      runs.push_back({p, f, run_backtest(days, plans, current, exec, scheme)});
    }
  }
  return runs;
}

nlohmann::json to_json(const BacktestReport& report) {
  nlohmann::json scenarios = nlohmann::json::array();
  for (const auto& sr : report.scenarios) {
    nlohmann::json strategies = nlohmann::json::array();
    for (const auto& m : sr.strategies) {
      strategies.push_back({{"strategy", m.strategy},
                            {"median_bas", m.median_bas},
                            {"mean_bas", m.mean_bas},
                            {"median_buy_price", m.median_buy_price},
                            {"median_sell_price", m.median_sell_price},
                            {"weighted_std", m.weighted_std},
                            {"weighted_std_conventional", m.weighted_std_conventional},
                            {"sample_days", m.sample_days},
                            {"excluded_days", m.excluded_days},
                            {"day_bas", m.day_bas}});
    }
    nlohmann::json pv = nlohmann::json::object();
    for (const auto& [k, v] : sr.p_values) pv[k] = v;
    scenarios.push_back({{"label", sr.scenario.label()},
                         {"volume", sr.scenario.volume},
                         {"lead_minutes", sr.scenario.lead_minutes},
                         {"direction", to_string(sr.scenario.direction)},
                         {"strategies", std::move(strategies)},
                         {"p_values", std::move(pv)}});
  }
  return {{"days", report.days}, {"scenarios", std::move(scenarios)}};
}

BacktestReport backtest_report_from_json(const nlohmann::json& j) {
  try {
    BacktestReport report;
    report.days = j.at("days").get<std::vector<std::size_t>>();
    for (const auto& s : j.at("scenarios")) {
      ScenarioReport sr;
      sr.scenario.volume = s.at("volume").get<double>();
      sr.scenario.lead_minutes = s.at("lead_minutes").get<int>();
      sr.scenario.direction = s.at("direction").get<std::string>() == "sell" ? Side::sell : Side::buy;
      for (const auto& m : s.at("strategies")) {
        StrategyMetrics sm;
        sm.strategy = m.at("strategy").get<std::string>();
        sm.median_bas = json_number(m.at("median_bas"));
        sm.mean_bas = json_number(m.at("mean_bas"));
        sm.median_buy_price = json_number(m.at("median_buy_price"));
        sm.median_sell_price = json_number(m.at("median_sell_price"));
        sm.weighted_std = json_number(m.at("weighted_std"));
        sm.weighted_std_conventional = json_number(m.at("weighted_std_conventional"));
        sm.sample_days = m.at("sample_days").get<std::size_t>();
        sm.excluded_days = m.at("excluded_days").get<std::size_t>();
        sm.day_bas = m.at("day_bas").get<std::vector<double>>();
        sr.strategies.push_back(std::move(sm));
      }
      for (const auto& [k, v] : s.at("p_values").items()) sr.p_values[k] = json_number(v);
      report.scenarios.push_back(std::move(sr));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("backtest report: ") + e.what());
  }
}

nlohmann::json to_json(const std::vector<RobustnessRun>& runs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : runs) out.push_back({{"path", r.path}, {"fraction", r.fraction}, {"report", to_json(r.report)}});
  return out;
}

std::vector<RobustnessRun> robustness_from_json(const nlohmann::json& j) {
  std::vector<RobustnessRun> runs;
  try {
    for (const auto& r : j) {
      runs.push_back({r.at("path").get<std::size_t>(), r.at("fraction").get<double>(),
                      backtest_report_from_json(r.at("report"))});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("robustness report: ") + e.what());
  }
  return runs;
}

void write_table_csv(std::ostream& out, const BacktestReport& report, TableMetric metric) {
  std::vector<std::string> strategies;
  for (const auto& sr : report.scenarios) {
    for (const auto& m : sr.strategies) {
      if (std::find(strategies.begin(), strategies.end(), m.strategy) == strategies.end())
        strategies.push_back(m.strategy);
    }
  }
  out << "strategy";
  for (const auto& sr : report.scenarios) out << ',' << sr.scenario.label();
  out << '\n';
  for (const auto& name : strategies) {
    out << name;
    for (const auto& sr : report.scenarios) {
      out << ',';
      const auto it = std::find_if(sr.strategies.begin(), sr.strategies.end(),
                                   [&](const StrategyMetrics& m) { return m.strategy == name; });
      if (it == sr.strategies.end()) continue;
      switch (metric) {
        case TableMetric::median_bas:
          out << format_number(it->median_bas) << " (" << format_number(it->mean_bas) << ')';
          break;
        case TableMetric::weighted_std:
          out << format_number(it->weighted_std);
          break;
        case TableMetric::buy_price:
          out << format_number(it->median_buy_price);
          break;
        case TableMetric::sell_price:
          out << format_number(it->median_sell_price);
          break;
      }
    }
    out << '\n';
  }
}

void write_pvalues_csv(std::ostream& out, const BacktestReport& report) {
  out << "scenario,comparison,p_value\n";
  for (const auto& sr : report.scenarios) {
    for (const auto& [k, v] : sr.p_values) out << sr.scenario.label() << ',' << k << ',' << format_p(v) << '\n';
  }
}

void write_robustness_csv(std::ostream& out, const std::vector<RobustnessRun>& runs) {
  out << "path,fraction,scenario,strategy,median_bas,mean_bas,sample_days\n";
  for (const auto& r : runs) {
    for (const auto& sr : r.report.scenarios) {
      for (const auto& m : sr.strategies) {
        out << r.path << ',' << format_number(r.fraction) << ',' << sr.scenario.label() << ',' << m.strategy << ','
            << format_number(m.median_bas) << ',' << format_number(m.mean_bas) << ',' << m.sample_days << '\n';
      }
    }
  }
}

}  // namespace intraday
