#include "intraday/pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "intraday/error.hpp"

namespace intraday {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"paths", {"train_dir", "test_dir", "model", "output_dir"}},
      {"synth",
       {"base_price", "daily_volatility", "spread_profile", "volume_profile", "xbid_cut_minutes",
        "local_start_minutes", "lead_minutes", "train_start", "train_days", "test_start", "test_days",
        "delivery_hours"}},
      {"model", {"k_knots", "n_knots", "penalty_order", "epsilon", "min_observations"}},
      {"ga",
       {"population_size", "max_stall_iterations", "max_generations", "mutation_rate", "crossover_rate",
        "elitism_count", "tournament_size"}},
      {"run",
       {"seed", "jobs", "y0", "daily_volatility", "drift", "lambda", "scenarios", "strategies",
        "robustness_paths"}},
  };
  return keys;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T convert(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  in >> value;
  if (in.fail() || !(in >> std::ws).eof()) throw ConfigError("bad value for " + key + ": '" + text + "'");
  return value;
}

std::chrono::year_month_day parse_date(const std::string& key, const std::string& text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3)
    throw ConfigError("bad date for " + key + ": '" + text + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw ConfigError("invalid date for " + key + ": '" + text + "'");
  return ymd;
}

std::string format_date(std::chrono::year_month_day d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string file_stamp(Timestamp t) {
  const auto s = format_utc(t);  // YYYY-MM-DDTHH:MM:SSZ
  return s.substr(0, 4) + s.substr(5, 2) + s.substr(8, 2) + "T" + s.substr(11, 2) + s.substr(14, 2);
}

std::string csv_stamp(const RunConfig& c) {
  return "# config_hash=" + config_hash(c) + " seed=" + std::to_string(c.seed) + "\n";
}

void write_text(const fs::path& path, const std::string& text, CommandResult& result) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
  result.written.push_back(path);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
}

// Runs body(i) for i in [0, n) and rethrows the first failure by index.
template <class Body>
void parallel_indices(std::size_t n, Exec exec, Body&& body) {
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
    return;
  }
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json stamp(const RunConfig& c) { return {{"config_hash", config_hash(c)}, {"seed", c.seed}}; }

}  // namespace

const std::vector<std::string>& known_strategies() {
  static const std::vector<std::string> names{"IOBE", "TWAP", "VWAP", "Opti_C", "Opti_sv"};
  return names;
}

std::vector<Scenario> parse_scenarios(const std::string& text) {
  std::vector<Scenario> out;
  for (const auto& item : split(text, ',')) {
    Scenario s;
    auto body = item;
    if (const auto colon = body.find(':'); colon != std::string::npos) {
      const auto dir = body.substr(colon + 1);
      if (dir == "buy") {
        s.direction = Side::buy;
      } else if (dir == "sell") {
        s.direction = Side::sell;
      } else {
        throw ConfigError("bad scenario direction in '" + item + "'");
      }
      body = body.substr(0, colon);
    }
    const auto x = body.find('x');
    if (x == std::string::npos) throw ConfigError("scenario '" + item + "' is not VOLUMExLEAD");
    s.volume = convert<double>("scenario volume", body.substr(0, x));
    s.lead_minutes = convert<int>("scenario lead", body.substr(x + 1));
    validate(s);
    out.push_back(s);
  }
  if (out.empty()) throw ConfigError("no scenarios given");
  return out;
}

std::vector<std::string> parse_strategies(const std::string& text) {
  auto names = split(text, ',');
  for (const auto& n : names) {
    if (std::find(known_strategies().begin(), known_strategies().end(), n) == known_strategies().end())
      throw ConfigError("unknown strategy '" + n + "'");
  }
  if (names.empty()) throw ConfigError("no strategies given");
  return names;
}

RunConfig parse_run_config(std::istream& in, const fs::path& base_dir) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [section, keys] : tree) {
    const auto it = allowed_keys().find(section);
    if (it == allowed_keys().end()) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& kv : keys) {
      if (!it->second.contains(kv.first)) throw ConfigError("unknown config key " + section + "." + kv.first);
    }
  }
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(boost::property_tree::ptree::path_type(key, '.'))) return trim(*v);
    return std::nullopt;
  };
  RunConfig c;
  auto path = [&](const std::string& key, fs::path& out) {
    if (auto v = get(key)) out = fs::path(*v).is_absolute() || base_dir.empty() ? fs::path(*v) : base_dir / *v;
  };
  auto number = [&]<class T>(const std::string& key, T& out) {
    if (auto v = get(key)) out = convert<T>(key, *v);
  };
  path("paths.train_dir", c.train_dir);
  path("paths.test_dir", c.test_dir);
  path("paths.model", c.model_path);
  path("paths.output_dir", c.output_dir);

  number("synth.base_price", c.synth.base_price);
  number("synth.daily_volatility", c.synth.daily_volatility);
  if (auto v = get("synth.spread_profile")) c.synth.spread_profile = parse_profile_shape(*v);
  if (auto v = get("synth.volume_profile")) c.synth.volume_profile = parse_profile_shape(*v);
  number("synth.xbid_cut_minutes", c.synth.xbid_cut_minutes);
  number("synth.local_start_minutes", c.synth.local_start_minutes);
  number("synth.lead_minutes", c.data_lead_minutes);
  if (auto v = get("synth.train_start")) c.train.first_day = parse_date("synth.train_start", *v);
  if (auto v = get("synth.test_start")) c.test.first_day = parse_date("synth.test_start", *v);
  number("synth.train_days", c.train.days);
  number("synth.test_days", c.test.days);
  if (auto v = get("synth.delivery_hours")) {
    std::vector<int> hours;
    for (const auto& h : split(*v, ',')) hours.push_back(convert<int>("synth.delivery_hours", h));
    c.train.delivery_hours = hours;
    c.test.delivery_hours = hours;
  }

  number("model.k_knots", c.fit.k_knots);
  number("model.n_knots", c.fit.n_knots);
  number("model.penalty_order", c.fit.penalty_order);
  number("model.epsilon", c.fit.epsilon);
  number("model.min_observations", c.fit.min_observations);

  number("ga.population_size", c.ga.population_size);
  number("ga.max_stall_iterations", c.ga.max_stall_iterations);
  number("ga.max_generations", c.ga.max_generations);
  number("ga.mutation_rate", c.ga.mutation_rate);
  number("ga.crossover_rate", c.ga.crossover_rate);
  number("ga.elitism_count", c.ga.elitism_count);
  number("ga.tournament_size", c.ga.tournament_size);

  number("run.seed", c.seed);
  number("run.jobs", c.jobs);
  number("run.y0", c.y0);
  number("run.daily_volatility", c.daily_volatility);
  number("run.drift", c.drift);
  number("run.lambda", c.lambda);
  if (auto v = get("run.scenarios")) c.scenarios = parse_scenarios(*v);
  if (auto v = get("run.strategies")) c.strategies = parse_strategies(*v);
  if (auto v = get("run.robustness_paths")) {
    c.robustness_paths.clear();
    for (const auto& p : split(*v, ';')) {
      std::vector<double> fr;
      std::istringstream ss(p);
      std::string tok;
      while (ss >> tok) fr.push_back(convert<double>("run.robustness_paths", tok));
      c.robustness_paths.push_back(fr);
    }
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_run_config(in, path.parent_path());
}

void finalize(RunConfig& c) {
  validate(c.synth);
  validate(c.fit);
  c.synth.seed = c.seed;
  c.ga.seed = c.seed;
  validate(c.ga);
  if (c.drift != 0.0) throw ConfigError("a price drift is not part of the cost model; set run.drift = 0");
  if (!(c.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(c.daily_volatility >= 0.0)) throw ConfigError("run.daily_volatility must be >= 0");
  if (c.data_lead_minutes <= kCutoffMinutes) throw ConfigError("synth.lead_minutes must exceed 30");
  for (const auto* d : {&c.train, &c.test}) {
    if (d->days < 1) throw ConfigError("dataset needs at least one day");
    if (!d->first_day.ok()) throw ConfigError("dataset start date is invalid");
    if (d->delivery_hours.empty()) throw ConfigError("no delivery hours");
    for (int h : d->delivery_hours) {
      if (h < 0 || h > 23) throw ConfigError("delivery hour out of range");
    }
  }
  for (const auto& s : c.scenarios) {
    validate(s);
    if (s.lead_minutes > c.data_lead_minutes)
      throw ConfigError("scenario " + s.label() + " needs more lead time than the data provides");
  }
  for (const auto& p : c.robustness_paths) {
    double prev = 1.0;
    if (p.empty()) throw ConfigError("empty robustness path");
    for (double f : p) {
      if (!(f > 0.0 && f <= prev)) throw ConfigError("robustness fractions must be in (0, 1] and non-increasing");
      prev = f;
    }
  }
  if (c.jobs < 0) throw ConfigError("jobs must be >= 0");
}

std::string canonical_text(const RunConfig& c) {
  std::ostringstream o;
  o << "synth.seed=" << c.seed << '\n'
    << "synth.base_price=" << g17(c.synth.base_price) << '\n'
    << "synth.daily_volatility=" << g17(c.synth.daily_volatility) << '\n'
    << "synth.spread_profile=" << to_string(c.synth.spread_profile) << '\n'
    << "synth.volume_profile=" << to_string(c.synth.volume_profile) << '\n'
    << "synth.xbid_cut_minutes=" << c.synth.xbid_cut_minutes << '\n'
    << "synth.local_start_minutes=" << c.synth.local_start_minutes << '\n'
    << "synth.lead_minutes=" << c.data_lead_minutes << '\n';
  for (const auto& [name, d] : {std::pair{"train", &c.train}, std::pair{"test", &c.test}}) {
    o << "synth." << name << "_start=" << format_date(d->first_day) << '\n'
      << "synth." << name << "_days=" << d->days << '\n'
      << "synth." << name << "_hours=";
    for (int h : d->delivery_hours) o << h << ' ';
    o << '\n';
  }
  o << "model.k_knots=" << c.fit.k_knots << '\n'
    << "model.n_knots=" << c.fit.n_knots << '\n'
    << "model.penalty_order=" << c.fit.penalty_order << '\n'
    << "model.epsilon=" << g17(c.fit.epsilon) << '\n'
    << "model.min_observations=" << c.fit.min_observations << '\n'
    << "model.gamma_grid=";
  for (double g : c.fit.gamma_grid) o << g17(g) << ' ';
  o << '\n'
    << "ga.population_size=" << c.ga.population_size << '\n'
    << "ga.max_stall_iterations=" << c.ga.max_stall_iterations << '\n'
    << "ga.max_generations=" << c.ga.max_generations << '\n'
    << "ga.mutation_rate=" << g17(c.ga.mutation_rate) << '\n'
    << "ga.crossover_rate=" << g17(c.ga.crossover_rate) << '\n'
    << "ga.elitism_count=" << c.ga.elitism_count << '\n'
    << "ga.tournament_size=" << c.ga.tournament_size << '\n'
    << "run.y0=" << g17(c.y0) << '\n'
    << "run.daily_volatility=" << g17(c.daily_volatility) << '\n'
    << "run.drift=" << g17(c.drift) << '\n'
    << "run.lambda=" << g17(c.lambda) << '\n'
    << "run.scenarios=";
  for (const auto& s : c.scenarios) o << s.label() << ' ';
  o << "\nrun.strategies=";
  for (const auto& s : c.strategies) o << s << ' ';
  o << "\nrun.robustness_paths=";
  for (const auto& p : c.robustness_paths) {
    for (double f : p) o << g17(f) << ' ';
    o << "; ";
  }
  o << '\n';
  return o.str();
}

std::string config_hash(const RunConfig& c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a(canonical_text(c)));
  return buf;
}

std::vector<Timestamp> delivery_times(const DatasetSpec& spec) {
  std::vector<Timestamp> out;
  const std::chrono::sys_days first{spec.first_day};
  for (int d = 0; d < spec.days; ++d) {
    for (int h : spec.delivery_hours) out.push_back(first + std::chrono::days{d} + std::chrono::hours{h});
  }
  return out;
}

ProductEvents synth_product(const SynthConfig& synth, Timestamp delivery_start, int lead_minutes) {
  const auto arrival = delivery_start - std::chrono::minutes{lead_minutes};
  return {delivery_start, arrival, arrival, synth_lob(synth, delivery_start, arrival)};
}

ProductEvents read_product(const fs::path& path, int lead_minutes) {
  auto file = read_lob_csv(path);
  const auto arrival = file.header.delivery_start - std::chrono::minutes{lead_minutes};
  if (arrival < file.header.observation_start)
    throw Error(ErrorCategory::data, path.string() + " starts after the configured arrival time");
  return {file.header.delivery_start, file.header.observation_start, arrival, std::move(file.events)};
}

std::vector<fs::path> list_lob_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("data directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no LOB files in " + dir.string());
  return files;
}

TrainingDay training_day(const ProductEvents& p) {
  const auto grid = aggregate(p.events, p.delivery_start, p.observation_start, p.arrival);
  TrainingDay day;
  day.observations = extract_temporary(grid);
  day.temporary = day.observations.size();
  auto perm = extract_permanent(p.events, grid);
  day.permanent = perm.observations.size();
  day.permanent_skipped = perm.skipped_window + perm.skipped_empty;
  day.observations.insert(day.observations.end(), perm.observations.begin(), perm.observations.end());
  for (int k = 1; k <= grid.n_buckets(); ++k) day.traded_volume.push_back(grid.traded_volume(k));
  return day;
}

std::vector<TrainingDay> training_days(const SynthConfig& synth, const DatasetSpec& spec, int lead, Exec exec) {
  const auto times = delivery_times(spec);
  std::vector<TrainingDay> out(times.size());
  parallel_indices(times.size(), exec, [&](std::size_t i) { out[i] = training_day(synth_product(synth, times[i], lead)); });
  return out;
}

std::vector<TrainingDay> training_days(std::span<const fs::path> files, int lead, Exec exec) {
  std::vector<TrainingDay> out(files.size());
  parallel_indices(files.size(), exec, [&](std::size_t i) { out[i] = training_day(read_product(files[i], lead)); });
  return out;
}

std::vector<BucketGrid> test_grids(const SynthConfig& synth, const DatasetSpec& spec, int lead, Exec exec) {
  const auto times = delivery_times(spec);
  std::vector<BucketGrid> out(times.size());
  parallel_indices(times.size(), exec, [&](std::size_t i) {
    const auto p = synth_product(synth, times[i], lead);
    out[i] = aggregate(p.events, p.delivery_start, p.observation_start, p.arrival);
  });
  return out;
}

std::vector<BucketGrid> test_grids(std::span<const fs::path> files, int lead, Exec exec) {
  std::vector<BucketGrid> out(files.size());
  parallel_indices(files.size(), exec, [&](std::size_t i) {
    const auto p = read_product(files[i], lead);
    out[i] = aggregate(p.events, p.delivery_start, p.observation_start, p.arrival);
  });
  return out;
}

FitOutput fit_training(std::span<const TrainingDay> days, int lead, const ImpactFitConfig& config) {
  if (days.empty()) throw InsufficientData("training set is empty");
  FitOutput out;
  std::vector<ImpactObservation> obs;
  std::vector<double> volume(days.front().traded_volume.size(), 0.0);
  for (const auto& d : days) {
    obs.insert(obs.end(), d.observations.begin(), d.observations.end());
    out.temporary_observations += d.temporary;
    out.permanent_observations += d.permanent;
    out.permanent_skipped += d.permanent_skipped;
    if (d.traded_volume.size() != volume.size()) throw LengthMismatch(volume.size(), d.traded_volume.size());
    for (std::size_t k = 0; k < volume.size(); ++k) volume[k] += d.traded_volume[k];
  }
  for (auto& v : volume) v /= static_cast<double>(days.size());
  out.profile = VolumeProfile(std::move(volume));
  out.model = fit_impact_model(obs, lead, config);
  for (auto kind : {ImpactKind::temporary, ImpactKind::permanent}) {
    for (auto regime : {RegimeId::xbid, RegimeId::cutover, RegimeId::local}) {
      const auto& s = out.model.stratum(kind, regime);
      if (!s) continue;
      out.diagnostics.push_back({to_string(kind) + "/" + to_string(regime), s->observations, s->floored,
                                 s->log_mu.k_term.spline.smoothing, s->log_mu.n_term.spline.smoothing,
                                 s->log_mu.gcv});
    }
  }
  return out;
}

TimeMeta planning_meta(const RunConfig& c) {
  const int h = c.test.delivery_hours.front();
  return {false, h >= 8 && h < 20};
}

PlanOutput plan_scenarios(const RunConfig& c, const ImpactSurface& impact, const VolumeProfile& profile, Exec exec) {
  PlanOutput out;
  const auto meta = planning_meta(c);
  auto wants = [&](const std::string& s) { return std::find(c.strategies.begin(), c.strategies.end(), s) != c.strategies.end(); };
  for (std::size_t si = 0; si < c.scenarios.size(); ++si) {
    const auto& sc = c.scenarios[si];
    try {
      const int n = sc.buckets();
      ScenarioPlan plan;
      plan.scenario = sc;
      const auto tw = twap(sc.volume, n, sc.direction);
      const auto vw = vwap(sc.volume, n, profile.tail(static_cast<std::size_t>(n)), sc.direction);
      std::vector<json> traces;
      std::optional<TradeTrajectory> opti_c;
      for (const auto& name : c.strategies) {
        if (name == "IOBE") {
          plan.strategies.push_back({name, iobe(sc.volume, n, sc.direction)});
        } else if (name == "TWAP") {
          plan.strategies.push_back({name, tw});
        } else if (name == "VWAP") {
          plan.strategies.push_back({name, vw});
        } else {
          CostModelParams params{c.y0, bucket_volatility(c.daily_volatility), name == "Opti_C" ? 0.0 : c.lambda,
                                 &impact};
          GaConfig ga = c.ga;
          ga.seed = c.seed * 1000003ULL + si * 16 + (name == "Opti_C" ? 0 : 1);
          std::vector<TradeTrajectory> warm{vw};
          if (opti_c) warm.push_back(*opti_c);
          const auto r = optimize(sc.volume, n, sc.direction, params, ga, meta, warm, exec);
          if (name == "Opti_C") opti_c = r.trajectory;
          plan.strategies.push_back({name, r.trajectory});
          auto t = trace_to_json(r, ga, params);
          t["scenario"] = sc.label();
          t["strategy"] = name;
          traces.push_back(std::move(t));
        }
      }
      for (const auto* o : {"Opti_C", "Opti_sv"}) {
        if (!wants(o)) continue;
        for (const auto& s : c.strategies) {
          if (s == o || (std::string(o) == "Opti_sv" && s == "Opti_C" && wants("Opti_C"))) continue;
          plan.comparisons.emplace_back(o, s);
        }
      }
      out.plans.push_back(std::move(plan));
      for (auto& t : traces) out.traces.push_back(std::move(t));
    } catch (const Error& e) {
      out.failures.push_back(sc.label() + ": " + e.what());
    }
  }
  return out;
}

CommandResult cmd_synth(const RunConfig& c, std::ostream& log) {
  CommandResult result;
  for (const auto& [dir, spec] : {std::pair{c.train_dir, &c.train}, std::pair{c.test_dir, &c.test}}) {
    fs::create_directories(dir);
    for (const auto t : delivery_times(*spec)) {
      const auto p = synth_product(c.synth, t, c.data_lead_minutes);
      LobFileHeader h;
      h.delivery_start = p.delivery_start;
      h.observation_start = p.observation_start;
      h.extra = {{"config_hash", config_hash(c)}, {"seed", std::to_string(c.seed)}};
      const auto path = dir / ("lob_" + file_stamp(t) + ".csv");
      write_lob_csv(path, h, p.events);
      result.written.push_back(path);
    }
  }
  log << "synth: wrote " << result.written.size() << " LOB files\n";
  return result;
}

CommandResult cmd_fit(const RunConfig& c, std::ostream& log) {
  CommandResult result;
  const auto files = list_lob_files(c.train_dir);
  const auto days = training_days(files, c.data_lead_minutes, Exec::parallel);
  const auto fit = fit_training(days, c.data_lead_minutes, c.fit);
  auto j = to_json(fit.model);
  j["volume_profile"] = fit.profile.v_hat();
  j["config_hash"] = config_hash(c);
  j["seed"] = c.seed;
  j["training_files"] = files.size();
  json diag = json::array();
  log << "fit: " << files.size() << " products, " << fit.temporary_observations << " temporary and "
      << fit.permanent_observations << " permanent observations (" << fit.permanent_skipped
      << " clusters skipped)\n";
  for (const auto& d : fit.diagnostics) {
    diag.push_back({{"stratum", d.stratum},
                    {"observations", d.observations},
                    {"floored", d.floored},
                    {"gamma_k", d.gamma_k},
                    {"gamma_n", d.gamma_n},
                    {"gcv", d.gcv}});
    log << "  " << d.stratum << ": n=" << d.observations << " floored=" << d.floored << " gamma_k=" << d.gamma_k
        << " gamma_n=" << d.gamma_n << " gcv=" << d.gcv << '\n';
  }
  j["diagnostics"] = std::move(diag);
  write_text(c.model_path, j.dump(2) + "\n", result);
  log << "fit: model written to " << c.model_path.string() << '\n';
  return result;
}

CommandResult cmd_report(const RunConfig& c, std::ostream& log) {
  CommandResult result;
  const auto results = read_json(c.output_dir / "results.json");
  const auto report = backtest_report_from_json(results.at("report"));
  const auto robustness = robustness_from_json(results.at("robustness"));
  const std::string head = "# config_hash=" + results.at("config_hash").get<std::string>() +
                           " seed=" + std::to_string(results.at("seed").get<std::uint64_t>()) + "\n";
  const std::pair<const char*, TableMetric> tables[] = {{"table_median_bas.csv", TableMetric::median_bas},
                                                       {"table_weighted_std.csv", TableMetric::weighted_std},
                                                       {"table_buy_price.csv", TableMetric::buy_price},
                                                       {"table_sell_price.csv", TableMetric::sell_price}};
  for (const auto& [file, metric] : tables) {
    std::ostringstream o;
    o << head;
    write_table_csv(o, report, metric);
    write_text(c.output_dir / file, o.str(), result);
  }
  {
    std::ostringstream o;
    o << head;
    write_pvalues_csv(o, report);
    write_text(c.output_dir / "table_pvalues.csv", o.str(), result);
  }
  {
    std::ostringstream o;
    o << head;
    write_robustness_csv(o, robustness);
    write_text(c.output_dir / "robustness.csv", o.str(), result);
  }
  json summary{{"config_hash", results.at("config_hash")}, {"seed", results.at("seed")},
               {"failures", results.at("failures")}};
  json scen = json::array();
  for (const auto& sr : report.scenarios) {
    json rows = json::array();
    for (const auto& m : sr.strategies) {
      rows.push_back({{"strategy", m.strategy},
                      {"median_bas", m.median_bas},
                      {"mean_bas", m.mean_bas},
                      {"median_buy_price", m.median_buy_price},
                      {"median_sell_price", m.median_sell_price},
                      {"weighted_std", m.weighted_std},
                      {"sample_days", m.sample_days},
                      {"excluded_days", m.excluded_days}});
    }
    scen.push_back({{"scenario", sr.scenario.label()}, {"strategies", rows}, {"p_values", sr.p_values}});
  }
  summary["scenarios"] = std::move(scen);
  write_text(c.output_dir / "report.json", summary.dump(2) + "\n", result);
  log << "report: " << result.written.size() << " files in " << c.output_dir.string() << '\n';
  return result;
}

CommandResult cmd_run(const RunConfig& c, std::ostream& log) {
  CommandResult result;
  const auto model_doc = read_json(c.model_path);
  const auto model = impact_model_from_json(model_doc);
  if (!model_doc.contains("volume_profile")) throw ParseError(0, "model file has no volume_profile");
  const VolumeProfile profile(model_doc.at("volume_profile").get<std::vector<double>>());
  if (profile.size() != static_cast<std::size_t>(c.data_lead_minutes - kCutoffMinutes))
    throw ConfigError("model was trained with a different lead time than synth.lead_minutes");

  const auto files = list_lob_files(c.test_dir);
  const auto grids = test_grids(files, c.data_lead_minutes, Exec::parallel);
  log << "run: " << grids.size() << " out-of-sample products\n";

  const auto planned = plan_scenarios(c, model, profile, Exec::parallel);
  const auto report = run_backtest(grids, planned.plans, {}, Exec::parallel);
  const auto robustness = subsample_robustness(grids, planned.plans, c.robustness_paths, c.seed, Exec::parallel);

  json trajectories = json::object();
  for (const auto& plan : planned.plans) {
    for (const auto& s : plan.strategies) {
      trajectories[plan.scenario.label()][s.strategy] = s.trajectory.allocations();
      std::ostringstream o;
      o << csv_stamp(c);
      write_trajectory_csv(o, s.trajectory);
      write_text(c.output_dir / "trajectories" / (plan.scenario.label() + "_" + s.strategy + ".csv"), o.str(),
                 result);
    }
  }
  json traces{{"config_hash", config_hash(c)}, {"seed", c.seed}, {"runs", planned.traces}};
  write_text(c.output_dir / "ga_traces.json", traces.dump(1) + "\n", result);

  json results = stamp(c);
  results["report"] = to_json(report);
  results["robustness"] = to_json(robustness);
  results["failures"] = planned.failures;
  results["trajectories"] = std::move(trajectories);
  write_text(c.output_dir / "results.json", results.dump(1) + "\n", result);

  auto rendered = cmd_report(c, log);
  result.written.insert(result.written.end(), rendered.written.begin(), rendered.written.end());
  for (const auto& f : planned.failures) log << "run: scenario failed: " << f << '\n';
  log << "run: " << planned.plans.size() << " scenarios evaluated, " << planned.failures.size() << " failed\n";
  result.exit_code = planned.failures.empty() ? 0 : 5;
  return result;
}

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->category()) {
      case ErrorCategory::config:
        return 2;
      case ErrorCategory::data:
        return 3;
      case ErrorCategory::fit:
        return 4;
      case ErrorCategory::runtime:
        return 1;
    }
  }
  if (dynamic_cast<const fs::filesystem_error*>(&e) != nullptr) return 3;
  return 1;
}

}  // namespace intraday
