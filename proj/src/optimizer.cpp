#include "intraday/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "intraday/error.hpp"

namespace intraday {

namespace {

int horizon_of(int buckets) { return buckets + kCutoffMinutes; }

void require_surface(const CostModelParams& p) {
  if (p.impact == nullptr) throw NotFitted();
}

// Own contribution of trading n (unsigned) in bucket k: temporary impact cost
// plus the risk-weighted variance terms.
double own_term(int k, double n, int horizon, const CostModelParams& p, const TimeMeta& tm) {
  if (n == 0.0) return 0.0;
  const auto temp = p.impact->evaluate(ImpactKind::temporary, n, k, horizon, tm);
  const auto perm = p.impact->evaluate(ImpactKind::permanent, n, k, horizon, tm);
  const double n2 = n * n;
  const double variance = n2 * p.sigma_price * p.sigma_price * k + n2 * perm.sigma * perm.sigma +
                          n2 * temp.sigma * temp.sigma;
  return n * temp.mu + p.lambda * variance;
}

// Permanent impact per MWh that trading n in bucket k leaves for bucket k+1.
double carry_term(int k, double n, int horizon, const CostModelParams& p, const TimeMeta& tm) {
  if (n == 0.0) return 0.0;
  return p.impact->evaluate(ImpactKind::permanent, n, k, horizon, tm).mu;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 child_stream(std::uint64_t seed, std::uint64_t generation, std::uint64_t slot) {
  return std::mt19937_64(mix(mix(mix(seed) ^ generation) ^ slot));
}

using Genome = std::vector<Ticks>;

struct Population {
  std::vector<Genome> genomes;
  std::vector<double> fitness;
  std::vector<std::size_t> rank;  // slots ordered best first, ties by slot

  void sort() {
    rank.resize(genomes.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });
  }
};

std::size_t tournament(const Population& pop, int size, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pop.genomes.size() - 1);
  std::size_t best = pick(rng);
  for (int i = 1; i < size; ++i) {
    const auto c = pick(rng);
    if (pop.fitness[c] < pop.fitness[best] || (pop.fitness[c] == pop.fitness[best] && c < best)) best = c;
  }
  return best;
}

Genome repair(std::vector<double>& v, Ticks total) {
  for (auto& x : v) x = std::max(x, 0.0);
  return apportion(v, total);
}

void mutate(Genome& g, Ticks total, std::mt19937_64& rng) {
  const auto n = g.size();
  if (n < 2 || total == 0) return;
  std::uniform_int_distribution<std::size_t> gene(0, n - 1);
  std::uniform_int_distribution<int> op(0, 4);
  const int which = op(rng);
  if (which >= 3) {
    auto i = gene(rng);
    auto j = gene(rng);
    if (i == j) j = (j + 1) % n;
    if (which == 3) {
      std::swap(g[i], g[j]);
    } else {
      // Shift a segment one bucket along, the end tick count wrapping round.
      if (i > j) std::swap(i, j);
      const auto first = g.begin() + static_cast<std::ptrdiff_t>(i);
      const auto last = g.begin() + static_cast<std::ptrdiff_t>(j) + 1;
      if (op(rng) % 2 == 0) {
        std::rotate(first, last - 1, last);
      } else {
        std::rotate(first, first + 1, last);
      }
    }
    return;
  }
  if (which == 2) {
    // Reset one gene, then put the rest back onto the simplex.
    const Ticks cap = 2 * ((total + static_cast<Ticks>(n) - 1) / static_cast<Ticks>(n));
    std::vector<double> v(g.begin(), g.end());
    v[gene(rng)] = static_cast<double>(std::uniform_int_distribution<Ticks>(0, cap)(rng));
    g = repair(v, total);
    return;
  }
  std::vector<std::size_t> donors;
  for (std::size_t i = 0; i < n; ++i) {
    if (g[i] > 0) donors.push_back(i);
  }
  const auto from = donors[std::uniform_int_distribution<std::size_t>(0, donors.size() - 1)(rng)];
  auto to = gene(rng);
  if (to == from) to = (to + 1) % n;
  const Ticks amount = which == 0 ? std::uniform_int_distribution<Ticks>(1, g[from])(rng) : g[from];
  g[from] -= amount;
  g[to] += amount;
}

// Dense genomes blend the anchor with Dirichlet(1) noise; sparse ones are
// Dirichlet(0.25) draws that sit near the faces and corners of the simplex.
Genome random_genome(int n, Ticks total, const Genome& anchor, bool sparse, std::mt19937_64& rng) {
  std::vector<double> v(static_cast<std::size_t>(n));
  if (sparse) {
    std::gamma_distribution<double> g(0.25, 1.0);
    for (auto& x : v) x = g(rng);
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
    return repair(v, total);
  }
  std::exponential_distribution<double> dirichlet(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double blend = unit(rng);
  const double scale = static_cast<double>(total) / n;
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = (1.0 - blend) * static_cast<double>(anchor[i]) + blend * scale * dirichlet(rng);
  return repair(v, total);
}

template <class Body>
void for_slots(std::size_t begin, std::size_t end, Exec exec, Body&& body) {
  const auto b = static_cast<std::ptrdiff_t>(begin);
  const auto e = static_cast<std::ptrdiff_t>(end);
  if (exec == Exec::serial) {
    for (std::ptrdiff_t s = b; s < e; ++s) body(static_cast<std::size_t>(s));
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = b; s < e; ++s) body(static_cast<std::size_t>(s));
}

}  // namespace

double bucket_volatility(double daily_volatility) { return daily_volatility / std::sqrt(1440.0); }

void validate(const CostModelParams& p) {
  if (!(p.sigma_price >= 0.0)) throw ConfigError("sigma_price must be >= 0");
  if (!(p.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!std::isfinite(p.y0)) throw ConfigError("y0 must be finite");
}

double expected_cost(const TradeTrajectory& traj, const CostModelParams& p, const TimeMeta& tm) {
  require_surface(p);
  const int h = horizon_of(traj.buckets());
  double price = 0.0;
  double perm = 0.0;
  double temp = 0.0;
  for (int k = 1; k <= traj.buckets(); ++k) {
    const double nk = traj.n(k);
    const double a = std::abs(nk);
    price += nk * p.y0;
    if (k >= 2) {
      const double prev = std::abs(traj.n(k - 1));
      if (prev > 0.0) perm += a * p.impact->evaluate(ImpactKind::permanent, prev, k - 1, h, tm).mu;
    }
    if (a > 0.0) temp += a * p.impact->evaluate(ImpactKind::temporary, a, k, h, tm).mu;
  }
  return price + perm + temp;
}

double cost_variance(const TradeTrajectory& traj, const CostModelParams& p, const TimeMeta& tm) {
  require_surface(p);
  const int h = horizon_of(traj.buckets());
  double price = 0.0;
  double perm = 0.0;
  double temp = 0.0;
  for (int k = 1; k <= traj.buckets(); ++k) {
    const double a = std::abs(traj.n(k));
    if (a == 0.0) continue;
    const double n2 = a * a;
    price += n2 * p.sigma_price * p.sigma_price * k;
    const double sp = p.impact->evaluate(ImpactKind::permanent, a, k, h, tm).sigma;
    const double st = p.impact->evaluate(ImpactKind::temporary, a, k, h, tm).sigma;
    perm += n2 * sp * sp;
    temp += n2 * st * st;
  }
  return price + perm + temp;
}

double objective(const TradeTrajectory& traj, const CostModelParams& p, const TimeMeta& tm) {
  require_surface(p);
  const int h = horizon_of(traj.buckets());
  const auto& t = traj.ticks();
  double total = 0.0;
  for (int k = 1; k <= traj.buckets(); ++k) {
    const double n = from_ticks(t[static_cast<std::size_t>(k - 1)]);
    total += own_term(k, n, h, p, tm);
    if (k >= 2) total += n * carry_term(k - 1, from_ticks(t[static_cast<std::size_t>(k - 2)]), h, p, tm);
  }
  return total;
}

CostTable::CostTable(int buckets, Ticks max_ticks, const CostModelParams& params, const TimeMeta& t_meta,
                     Exec exec)
    : buckets_(buckets), max_ticks_(max_ticks) {
  if (buckets < 1 || max_ticks < 0) throw OutOfRange("cost table dimensions");
  require_surface(params);
  const auto size = static_cast<std::size_t>(buckets) * static_cast<std::size_t>(max_ticks + 1);
  own_.assign(size, 0.0);
  carry_.assign(size, 0.0);
  const int h = horizon_of(buckets);
  for_slots(0, static_cast<std::size_t>(buckets), exec, [&](std::size_t b) {
    const int k = static_cast<int>(b) + 1;
    for (Ticks t = 0; t <= max_ticks; ++t) {
      const double n = from_ticks(t);
      own_[index(k, t)] = own_term(k, n, h, params, t_meta);
      carry_[index(k, t)] = carry_term(k, n, h, params, t_meta);
    }
  });
}

double CostTable::evaluate(std::span<const Ticks> ticks) const {
  double total = 0.0;
  for (int k = 1; k <= buckets_; ++k) {
    const Ticks t = ticks[static_cast<std::size_t>(k - 1)];
    total += own(k, t);
    if (k >= 2) total += from_ticks(t) * carry(k - 1, ticks[static_cast<std::size_t>(k - 2)]);
  }
  return total;
}

void validate(const GaConfig& c) {
  if (c.population_size < 10) throw ConfigError("population_size must be >= 10");
  if (!(c.mutation_rate >= 0.0 && c.mutation_rate <= 1.0)) throw ConfigError("mutation_rate must be in [0,1]");
  if (!(c.crossover_rate >= 0.0 && c.crossover_rate <= 1.0)) throw ConfigError("crossover_rate must be in [0,1]");
  if (c.elitism_count < 1 || c.elitism_count >= c.population_size)
    throw ConfigError("elitism_count must be in [1, population_size)");
  if (c.max_stall_iterations < 1 || c.max_generations < 1) throw ConfigError("GA iteration limits must be >= 1");
  if (c.tournament_size < 1) throw ConfigError("tournament_size must be >= 1");
}

OptimizeResult optimize(double X, int N, Side direction, const CostModelParams& params, const GaConfig& ga,
                        const TimeMeta& t_meta, std::span<const TradeTrajectory> warm_starts, Exec exec) {
  validate(ga);
  validate(params);
  require_surface(params);
  const Ticks total = to_ticks(X);
  const auto base = twap(X, N, direction);
  const CostTable table(N, total, params, t_meta, exec);

  const auto p = static_cast<std::size_t>(ga.population_size);
  Population pop;
  pop.genomes.resize(p);
  pop.fitness.resize(p);
  std::size_t seeded = 0;
  pop.genomes[seeded++] = base.ticks();
  for (const auto& w : warm_starts) {
    if (seeded == p) break;
    if (w.buckets() != N) throw LengthMismatch(static_cast<std::size_t>(N), static_cast<std::size_t>(w.buckets()));
    if (w.total_ticks() != total) throw OutOfRange("warm start does not trade the full position");
    pop.genomes[seeded++] = w.ticks();
  }
  for_slots(seeded, p, exec, [&](std::size_t s) {
    auto rng = child_stream(ga.seed, 0, s);
    pop.genomes[s] = random_genome(N, total, base.ticks(), s % 2 == 1, rng);
  });
  for_slots(0, p, exec, [&](std::size_t s) { pop.fitness[s] = table.evaluate(pop.genomes[s]); });
  pop.sort();

  OptimizeResult result;
  double best = pop.fitness[pop.rank[0]];
  result.trace.best_objective.push_back(best);
  int stall = 0;
  int generation = 0;
  Population next;
  next.genomes.resize(p);
  next.fitness.resize(p);
  const auto elites = static_cast<std::size_t>(ga.elitism_count);

  while (stall < ga.max_stall_iterations && generation < ga.max_generations) {
    ++generation;
    for (std::size_t e = 0; e < elites; ++e) {
      next.genomes[e] = pop.genomes[pop.rank[e]];
      next.fitness[e] = pop.fitness[pop.rank[e]];
    }
    for_slots(elites, p, exec, [&](std::size_t s) {
      auto rng = child_stream(ga.seed, static_cast<std::uint64_t>(generation), s);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const auto& a = pop.genomes[tournament(pop, ga.tournament_size, rng)];
      Genome child;
      if (unit(rng) < ga.crossover_rate) {
        const auto& b = pop.genomes[tournament(pop, ga.tournament_size, rng)];
        const double alpha = unit(rng);
        std::vector<double> v(a.size());
        for (std::size_t i = 0; i < v.size(); ++i)
          v[i] = alpha * static_cast<double>(a[i]) + (1.0 - alpha) * static_cast<double>(b[i]);
        child = repair(v, total);
      } else {
        child = a;
      }
      if (unit(rng) < ga.mutation_rate) mutate(child, total, rng);
      next.fitness[s] = table.evaluate(child);
      next.genomes[s] = std::move(child);
    });
    std::swap(pop.genomes, next.genomes);
    std::swap(pop.fitness, next.fitness);
    pop.sort();
    const double gen_best = pop.fitness[pop.rank[0]];
    if (gen_best < best) {
      best = gen_best;
      stall = 0;
    } else {
      ++stall;
    }
    result.trace.best_objective.push_back(best);
  }
  result.trace.generations = generation;
  result.trace.stalled = stall >= ga.max_stall_iterations;
  result.trajectory = TradeTrajectory(direction, pop.genomes[pop.rank[0]]);
  result.objective = objective(result.trajectory, params, t_meta);
  return result;
}

nlohmann::json trace_to_json(const OptimizeResult& r, const GaConfig& ga, const CostModelParams& params) {
  return {{"seed", ga.seed},
          {"config",
           {{"population_size", ga.population_size},
            {"max_stall_iterations", ga.max_stall_iterations},
            {"max_generations", ga.max_generations},
            {"mutation_rate", ga.mutation_rate},
            {"crossover_rate", ga.crossover_rate},
            {"elitism_count", ga.elitism_count},
            {"tournament_size", ga.tournament_size}}},
          {"params", {{"y0", params.y0}, {"sigma_price", params.sigma_price}, {"lambda", params.lambda}}},
          {"generations", r.trace.generations},
          {"stalled", r.trace.stalled},
          {"best_objective", r.trace.best_objective},
          {"objective", r.objective},
          {"trajectory", r.trajectory.allocations()}};
}

}  // namespace intraday
