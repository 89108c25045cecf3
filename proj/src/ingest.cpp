#include "intraday/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <string_view>
#include <tuple>

#include "intraday/error.hpp"

namespace intraday {

namespace {

constexpr std::string_view kColumns = "side,price,volume,valid_from,valid_to,action";

template <class T>
bool parse_number(std::string_view text, T& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

// Divides by the tick count per unit so the result equals the parsed decimal text.
double round_to(double value, double tick) {
  const double per_unit = std::round(1.0 / tick);
  return std::round(value * per_unit) / per_unit;
}

// Ladder depth per level (MWh) and distance from mid in half-spread units.
constexpr std::array<double, 12> kLevelVolume{0.6, 1.4, 3.0, 5.0, 10.0, 20.0,
                                              35.0, 75.0, 150.0, 200.0, 300.0, 400.0};
constexpr std::array<double, 12> kLevelOffset{1.00, 1.05, 1.10, 1.40, 2.0, 3.0,
                                              4.5, 7.0, 11.0, 16.0, 23.0, 32.0};
constexpr double kBaseHalfSpread = 0.45;
constexpr Seconds kQuoteLife = 30;
constexpr double kCancelProbability = 0.04;
constexpr double kTradesPerBlock = 0.75;
constexpr double kImpactResponse = 0.08;

enum class SynthRegime { xbid, cutover, local, area };

SynthRegime synth_regime(const SynthConfig& c, int minutes_to_delivery) {
  if (minutes_to_delivery >= c.xbid_cut_minutes + 2) return SynthRegime::xbid;
  if (minutes_to_delivery >= c.xbid_cut_minutes) return SynthRegime::cutover;
  if (minutes_to_delivery > c.local_start_minutes) return SynthRegime::local;
  return SynthRegime::area;
}

double spread_level(const SynthConfig& c, SynthRegime regime) {
  if (c.spread_profile == ProfileShape::flat) return 1.0;
  switch (regime) {
    case SynthRegime::xbid:
      return 1.0;
    case SynthRegime::cutover:
      return 5.0;
    case SynthRegime::local:
      return 1.8;
    case SynthRegime::area:
      return 2.5;
  }
  return 1.0;
}

double trade_intensity(const SynthConfig& c, SynthRegime regime, int minutes_to_delivery) {
  if (c.volume_profile == ProfileShape::flat) return 1.0;
  switch (regime) {
    case SynthRegime::xbid:
      return 1.0;
    case SynthRegime::cutover:
      return 0.3;
    case SynthRegime::local: {
      const double span = std::max(1, c.xbid_cut_minutes - 1 - c.local_start_minutes);
      const double done = c.xbid_cut_minutes - 1 - minutes_to_delivery;
      return 2.0 + 1.5 * std::clamp(done / span, 0.0, 1.0);
    }
    case SynthRegime::area:
      return 3.5;
  }
  return 1.0;
}

}  // namespace

LobReader::LobReader(std::istream& in) : in_(in) {
  std::map<std::string, std::string, std::less<>> keys;
  std::string line;
  bool have_columns = false;
  while (std::getline(in_, line)) {
    ++line_;
    const auto view = trim_cr(line);
    if (view.starts_with('#')) {
      const auto eq = view.find('=');
      if (eq == std::string_view::npos) throw ParseError(line_, "header line without '='");
      std::string key(view.substr(1, eq - 1));
      std::string value(view.substr(eq + 1));
      if (key == "schema_version" || key == "delivery_start" || key == "observation_start" ||
          key == "timezone") {
        keys[key] = value;
      } else {
        header_.extra.emplace_back(std::move(key), std::move(value));
      }
      continue;
    }
    if (view != kColumns) throw ParseError(line_, "expected column header '" + std::string(kColumns) + "'");
    have_columns = true;
    break;
  }
  if (!have_columns) throw ParseError(line_, "missing column header");
  for (const char* required : {"schema_version", "delivery_start", "observation_start", "timezone"}) {
    if (!keys.contains(required)) throw ParseError(line_, std::string("missing header key ") + required);
  }
  if (!parse_number(keys["schema_version"], header_.schema_version))
    throw ParseError(line_, "schema_version is not an integer");
  if (header_.schema_version != kLobSchemaVersion) throw SchemaVersionMismatch(header_.schema_version);
  try {
    header_.delivery_start = parse_utc(keys["delivery_start"]);
    header_.observation_start = parse_utc(keys["observation_start"]);
  } catch (const Error& e) {
    throw ParseError(line_, e.what());
  }
  header_.timezone = keys["timezone"];
  if (header_.timezone != "UTC") throw ParseError(line_, "timezone must be UTC");
  if (!(header_.observation_start < header_.delivery_start))
    throw ParseError(line_, "observation_start must precede delivery_start");
}

std::optional<OrderEvent> LobReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    const auto view = trim_cr(line);
    if (view.empty()) continue;
    const auto f = split_fields(view);
    if (f.size() != 6) throw ParseError(line_, "expected 6 fields, found " + std::to_string(f.size()));
    OrderEvent e;
    e.delivery_start = header_.delivery_start;
    if (f[0] == "buy") {
      e.side = Side::buy;
    } else if (f[0] == "sell") {
      e.side = Side::sell;
    } else {
      throw ParseError(line_, "side must be buy or sell");
    }
    if (!parse_number(f[1], e.price)) throw ParseError(line_, "malformed price");
    if (!parse_number(f[2], e.volume)) throw ParseError(line_, "malformed volume");
    if (!parse_number(f[3], e.valid_from)) throw ParseError(line_, "malformed valid_from");
    if (!parse_number(f[4], e.valid_to)) throw ParseError(line_, "malformed valid_to");
    if (f[5] == "add") {
      e.action = Action::add;
    } else if (f[5] == "cancel") {
      e.action = Action::cancel;
    } else if (f[5] == "match") {
      e.action = Action::match;
    } else {
      throw ParseError(line_, "action must be add, cancel or match");
    }
    if (auto why = invariant_violation(e); !why.empty()) throw ParseError(line_, why);
    return e;
  }
  return std::nullopt;
}

LobFile read_lob_csv(std::istream& in) {
  LobReader reader(in);
  LobFile file{reader.header(), {}};
  using Key = std::tuple<Side, double, double, Seconds>;
  std::map<Key, std::vector<std::size_t>> open_adds;
  while (auto e = reader.next()) {
    if (e->action == Action::add) {
      open_adds[{e->side, e->price, e->volume, e->valid_from}].push_back(file.events.size());
    } else if (e->action == Action::cancel) {
      auto it = open_adds.find({e->side, e->price, e->volume, e->valid_from});
      if (it == open_adds.end() || it->second.empty())
        throw ParseError(reader.line(), "cancel without a matching add");
      auto& add = file.events[it->second.front()];
      add.valid_to = std::min(add.valid_to, e->valid_to);
      it->second.erase(it->second.begin());
    }
    file.events.push_back(*e);
  }
  std::stable_sort(file.events.begin(), file.events.end(),
                   [](const OrderEvent& a, const OrderEvent& b) { return a.valid_from < b.valid_from; });
  return file;
}

LobFile read_lob_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_lob_csv(in);
}

void write_lob_csv(std::ostream& out, const LobFileHeader& header, std::span<const OrderEvent> events) {
  out << "#schema_version=" << header.schema_version << '\n'
      << "#delivery_start=" << format_utc(header.delivery_start) << '\n'
      << "#observation_start=" << format_utc(header.observation_start) << '\n'
      << "#timezone=" << header.timezone << '\n';
  for (const auto& [k, v] : header.extra) out << '#' << k << '=' << v << '\n';
  out << kColumns << '\n';
  char buf[160];
  for (const auto& e : events) {
    std::snprintf(buf, sizeof buf, "%s,%.2f,%.1f,%lld,%lld,%s\n", to_string(e.side).c_str(), e.price,
                  e.volume, static_cast<long long>(e.valid_from), static_cast<long long>(e.valid_to),
                  to_string(e.action).c_str());
    out << buf;
  }
}

void write_lob_csv(const std::filesystem::path& path, const LobFileHeader& header,
                   std::span<const OrderEvent> events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_lob_csv(out, header, events);
  if (!out) throw IoError("write failed for " + path.string());
}

std::string to_string(ProfileShape p) { return p == ProfileShape::flat ? "flat" : "empirical"; }

ProfileShape parse_profile_shape(const std::string& text) {
  if (text == "flat") return ProfileShape::flat;
  if (text == "empirical" || text == "empirical-shape") return ProfileShape::empirical;
  throw ConfigError("unknown profile shape '" + text + "'");
}

void validate(const SynthConfig& c) {
  if (!(c.daily_volatility >= 0.0)) throw ConfigError("daily_volatility must be >= 0");
  if (!(c.xbid_cut_minutes > c.local_start_minutes))
    throw ConfigError("xbid_cut_minutes must exceed local_start_minutes");
  if (c.local_start_minutes < 0) throw ConfigError("local_start_minutes must be >= 0");
  if (!(c.base_price > kPriceFloor && c.base_price < kPriceCap))
    throw ConfigError("base_price outside the price band");
}

std::vector<OrderEvent> synth_lob(const SynthConfig& config, Timestamp delivery_start,
                                  Timestamp arrival) {
  validate(config);
  const int n_buckets = trading_buckets(arrival, delivery_start);
  const int lead = n_buckets + kCutoffMinutes;
  const auto t = static_cast<std::uint64_t>(delivery_start.time_since_epoch().count());
  const auto a = static_cast<std::uint64_t>(arrival.time_since_epoch().count());
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                    static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::lognormal_distribution<double> trade_size(std::log(2.0), 0.8);

  const bool noisy = config.spread_profile == ProfileShape::empirical;
  const double minute_vol = config.daily_volatility / std::sqrt(1440.0);
  double mid = config.base_price + 0.5 * config.daily_volatility * gauss(rng);
  const double day_factor = noisy ? std::exp(0.15 * gauss(rng)) : 1.0;
  double recent_volume = 0.0;

  std::vector<OrderEvent> events;
  events.reserve(static_cast<std::size_t>(n_buckets) * 56);
  auto price_at = [](double p) { return std::clamp(round_to(p, kPriceTick), kPriceFloor, kPriceCap); };

  for (int j = 0; j < n_buckets; ++j) {
    const int minutes_to_delivery = lead - j;
    const auto regime = synth_regime(config, minutes_to_delivery);
    if (j > 0) mid += minute_vol * gauss(rng);
    for (int block = 0; block < 2; ++block) {
      const Seconds start = kBucketSeconds * j + kQuoteLife * block;
      const Seconds end = start + kQuoteLife;
      const double noise = noisy ? std::exp(0.2 * gauss(rng)) : 1.0;
      const double response = noisy ? 1.0 + kImpactResponse * std::log1p(recent_volume) : 1.0;
      const double half = kBaseHalfSpread * spread_level(config, regime) * day_factor * noise * response;
      double best_bid = 0.0;
      double best_ask = 0.0;
      for (std::size_t level = 0; level < kLevelVolume.size(); ++level) {
        for (Side side : {Side::buy, Side::sell}) {
          const double sign = side == Side::buy ? -1.0 : 1.0;
          OrderEvent e{delivery_start, side, price_at(mid + sign * half * kLevelOffset[level]),
                       kLevelVolume[level], start, end, Action::add};
          if (level == 0) (side == Side::buy ? best_bid : best_ask) = e.price;
          std::optional<OrderEvent> cancel;
          if (level > 0 && unit(rng) < kCancelProbability) {
            const auto at = start + 1 + static_cast<Seconds>(unit(rng) * static_cast<double>(kQuoteLife - 2));
            e.valid_to = at;
            cancel = e;
            cancel->action = Action::cancel;
          }
          events.push_back(e);
          if (cancel) events.push_back(*cancel);
        }
      }
      std::poisson_distribution<int> trades(kTradesPerBlock * trade_intensity(config, regime, minutes_to_delivery));
      const int count = trades(rng);
      double block_volume = 0.0;
      for (int m = 0; m < count; ++m) {
        const auto at = start + static_cast<Seconds>(unit(rng) * static_cast<double>(kQuoteLife));
        const double volume = std::max(kVolumeTick, round_to(std::min(trade_size(rng), 60.0), kVolumeTick));
        const Side aggressor = unit(rng) < 0.5 ? Side::buy : Side::sell;
        events.push_back({delivery_start, aggressor, aggressor == Side::buy ? best_ask : best_bid, volume,
                          std::min(at, end - 1), std::min(at, end - 1) + 1, Action::match});
        block_volume += volume;
      }
      recent_volume = block_volume;
    }
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const OrderEvent& x, const OrderEvent& y) { return x.valid_from < y.valid_from; });
  return events;
}

nlohmann::json grid_to_json(const BucketGrid& grid) {
  nlohmann::json cells = nlohmann::json::object();
  const auto t = format_utc(grid.delivery_start());
  for (int k = 1; k <= grid.n_buckets(); ++k) {
    for (std::size_t r = 1; r <= grid.n_volume_buckets(); ++r) {
      const auto& c = grid.cell(k, r);
      for (Side d : {Side::buy, Side::sell}) {
        const auto& s = c.side(d);
        cells[t + "/" + std::to_string(k) + "/" + std::to_string(r) + "/" + to_string(d)] = {
            {"empty", c.empty},
            {"crossed", c.crossed},
            {"median_bas", c.median_bas},
            {"mean_bas", c.mean_bas},
            {"side_empty", s.empty},
            {"median_price", s.median_price},
            {"traded_volume", s.traded_volume},
            {"order_count", s.order_count}};
      }
    }
  }
  return {{"schema_version", 1},
          {"delivery_start", t},
          {"n_buckets", grid.n_buckets()},
          {"horizon", grid.horizon()},
          {"window_start", grid.window_start()},
          {"n_volume_buckets", grid.n_volume_buckets()},
          {"cells", std::move(cells)}};
}

}  // namespace intraday
