#include "intraday/lob_core.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <utility>

#include "intraday/error.hpp"

namespace intraday {

namespace {

constexpr double kSliver = 1e-9;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool better_price(Side side, double a, double b) { return side == Side::buy ? a > b : a < b; }

// Emits (position, bucket, amount) for every slice of the best-first volumes.
template <class Volumes, class Emit>
void walk_slices(const Volumes& volumes, const VolumeBucketScheme& scheme, Emit&& emit) {
  double cumulative = 0.0;
  std::size_t r = 1;
  std::size_t pos = 0;
  for (double v : volumes) {
    const double lo = cumulative;
    const double hi = cumulative + v;
    while (r < scheme.size() && lo >= scheme.upper(r)) ++r;
    for (std::size_t b = r; b <= scheme.size(); ++b) {
      const double amount = std::min(hi, scheme.upper(b)) - std::max(lo, scheme.lower(b));
      if (amount > kSliver) emit(pos, b, amount);
      if (hi <= scheme.upper(b)) break;
    }
    cumulative = hi;
    ++pos;
  }
}

struct SegmentLevels {
  std::array<std::vector<double>, 2> volume;
  std::array<std::vector<double>, 2> notional;
  // (order index into the event span, bucket) per side
  std::array<std::vector<std::pair<std::size_t, std::size_t>>, 2> contributions;

  explicit SegmentLevels(std::size_t buckets) {
    for (auto& v : volume) v.assign(buckets, 0.0);
    for (auto& v : notional) v.assign(buckets, 0.0);
  }

  void reset() {
    for (auto& v : volume) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : notional) std::fill(v.begin(), v.end(), 0.0);
    for (auto& c : contributions) c.clear();
  }

  double level(Side d, std::size_t r) const {
    const auto i = index_of(d);
    return volume[i][r - 1] > 0.0 ? notional[i][r - 1] / volume[i][r - 1] : kNaN;
  }
};

// Sweeps [begin, end) in runs of constant book state, split at minute
// boundaries relative to begin, and reports per-bucket levels of each run.
template <class OnSegment>
void sweep_book(std::span<const OrderEvent> events, Seconds begin, Seconds end,
                const VolumeBucketScheme& scheme, OnSegment&& on_segment) {
  struct Live {
    std::size_t index;
    Seconds from;
    Seconds to;
  };
  std::vector<Live> adds;
  std::vector<Seconds> cuts;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.action != Action::add) continue;
    const Seconds from = std::max(e.valid_from, begin);
    const Seconds to = std::min(e.valid_to, end);
    if (from >= to) continue;
    adds.push_back({i, from, to});
    cuts.push_back(from);
    cuts.push_back(to);
  }
  for (Seconds s = begin; s <= end; s += kBucketSeconds) cuts.push_back(s);
  cuts.push_back(end);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::stable_sort(adds.begin(), adds.end(),
                   [](const Live& a, const Live& b) { return a.from < b.from; });

  SegmentLevels levels(scheme.size());
  std::vector<Live> active;
  std::array<std::vector<std::size_t>, 2> book;
  std::vector<double> volumes;
  std::size_t next = 0;

  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const Seconds p = cuts[c];
    const Seconds q = cuts[c + 1];
    if (p < begin || q > end) continue;
    std::erase_if(active, [p](const Live& a) { return a.to <= p; });
    while (next < adds.size() && adds[next].from <= p) {
      if (adds[next].to > p) active.push_back(adds[next]);
      ++next;
    }
    levels.reset();
    for (auto& b : book) b.clear();
    for (const auto& a : active) book[index_of(events[a.index].side)].push_back(a.index);
    for (Side d : {Side::buy, Side::sell}) {
      auto& side_book = book[index_of(d)];
      std::stable_sort(side_book.begin(), side_book.end(), [&](std::size_t a, std::size_t b) {
        if (events[a].price != events[b].price)
          return better_price(d, events[a].price, events[b].price);
        return a < b;
      });
      volumes.clear();
      for (auto i : side_book) volumes.push_back(events[i].volume);
      const auto di = index_of(d);
      walk_slices(volumes, scheme, [&](std::size_t pos, std::size_t r, double amount) {
        const auto order = side_book[pos];
        levels.volume[di][r - 1] += amount;
        levels.notional[di][r - 1] += amount * events[order].price;
        levels.contributions[di].emplace_back(order, r);
      });
    }
    on_segment(p, q, levels);
  }
}

// Median of values each repeated weight times (weights are seconds).
double weighted_median(std::vector<std::pair<double, Seconds>>& values) {
  std::sort(values.begin(), values.end());
  Seconds total = 0;
  for (const auto& [v, w] : values) total += w;
  const Seconds lo_pos = (total - 1) / 2;
  const Seconds hi_pos = total / 2;
  double lo = 0.0;
  double hi = 0.0;
  Seconds seen = 0;
  bool have_lo = false;
  for (const auto& [v, w] : values) {
    if (!have_lo && lo_pos < seen + w) {
      lo = v;
      have_lo = true;
    }
    if (hi_pos < seen + w) {
      hi = v;
      break;
    }
    seen += w;
  }
  return 0.5 * (lo + hi);
}

double weighted_mean(const std::vector<std::pair<double, Seconds>>& values) {
  double sum = 0.0;
  Seconds total = 0;
  for (const auto& [v, w] : values) {
    sum += v * static_cast<double>(w);
    total += w;
  }
  return sum / static_cast<double>(total);
}

}  // namespace

std::string to_string(Side d) { return d == Side::buy ? "buy" : "sell"; }

std::string to_string(Action a) {
  switch (a) {
    case Action::add:
      return "add";
    case Action::cancel:
      return "cancel";
    case Action::match:
      return "match";
  }
  return "add";
}

std::string invariant_violation(const OrderEvent& e) {
  if (!(e.volume > 0.0)) return "volume must be positive";
  if (!(e.valid_from < e.valid_to)) return "valid_from must precede valid_to";
  if (!(e.price >= kPriceFloor && e.price <= kPriceCap)) return "price outside [-500, 3000]";
  return {};
}

const VolumeBucketScheme& VolumeBucketScheme::standard() {
  static const VolumeBucketScheme scheme{{1, 5, 10, 15, 20, 25, 30, 40, 50, 60, 70, 80, 90, 100, 125,
                                          150, 175, 200, 250, 300, 400, 500,
                                          std::numeric_limits<double>::infinity()}};
  return scheme;
}

VolumeBucketScheme::VolumeBucketScheme(std::vector<double> upper_bounds)
    : upper_(std::move(upper_bounds)) {
  if (upper_.empty() || !std::isinf(upper_.back()))
    throw std::invalid_argument("volume buckets must end at +inf");
  for (std::size_t i = 0; i < upper_.size(); ++i) {
    const double lo = i == 0 ? 0.0 : upper_[i - 1];
    if (!(upper_[i] > lo)) throw std::invalid_argument("volume bucket bounds must increase");
  }
}

double VolumeBucketScheme::lower(std::size_t r) const {
  if (r < 1 || r > size()) throw OutOfRange("volume bucket " + std::to_string(r));
  return r == 1 ? 0.0 : upper_[r - 2];
}

double VolumeBucketScheme::upper(std::size_t r) const {
  if (r < 1 || r > size()) throw OutOfRange("volume bucket " + std::to_string(r));
  return upper_[r - 1];
}

std::size_t VolumeBucketScheme::bucket_of(double cumulative) const {
  if (!(cumulative >= 0.0)) throw OutOfRange("negative cumulative volume");
  auto it = std::lower_bound(upper_.begin(), upper_.end(), cumulative);
  return static_cast<std::size_t>(it - upper_.begin()) + 1;
}

double VolumeBucketScheme::representative(std::size_t r) const {
  if (std::isinf(upper(r))) return lower(r);
  return 0.5 * (lower(r) + upper(r));
}

bool time_bucket_membership(const OrderEvent& order, int k, Seconds window_start) {
  return order.valid_from < window_start + kBucketSeconds * k &&
         order.valid_to >= window_start + kBucketSeconds * (k - 1);
}

void sort_best_first(std::vector<OrderEvent>& orders, Side side) {
  std::stable_sort(orders.begin(), orders.end(), [side](const OrderEvent& a, const OrderEvent& b) {
    return better_price(side, a.price, b.price);
  });
}

VolumeSplit cumulative_volume_split(std::span<const OrderEvent> orders, Side side,
                                    const VolumeBucketScheme& scheme) {
  if (orders.empty()) throw EmptyBook();
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (orders[i].side != side) throw std::invalid_argument("orders must share one side");
    if (i > 0 && better_price(side, orders[i].price, orders[i - 1].price))
      throw std::invalid_argument("orders must be sorted best-first");
  }
  VolumeSplit split(scheme.size());
  std::vector<double> volumes;
  volumes.reserve(orders.size());
  for (const auto& o : orders) volumes.push_back(o.volume);
  walk_slices(volumes, scheme, [&](std::size_t pos, std::size_t r, double amount) {
    split[r - 1].push_back({pos, amount});
  });
  return split;
}

double bas_for_bucket(std::optional<double> buy_price, std::optional<double> sell_price) {
  if (!buy_price || !sell_price) throw MissingSide();
  return *sell_price - *buy_price;
}

BucketGrid::BucketGrid(Timestamp delivery_start, int n_buckets, std::size_t n_volume_buckets,
                       Seconds window_start)
    : delivery_start_(delivery_start),
      n_buckets_(n_buckets),
      n_volume_(n_volume_buckets),
      window_start_(window_start),
      cells_(static_cast<std::size_t>(std::max(n_buckets, 0)) * n_volume_buckets) {}

const GridCell& BucketGrid::cell(int k, std::size_t r) const {
  if (k < 1 || k > n_buckets_ || r < 1 || r > n_volume_)
    throw OutOfRange("grid cell k=" + std::to_string(k) + " r=" + std::to_string(r));
  return cells_[static_cast<std::size_t>(k - 1) * n_volume_ + (r - 1)];
}

GridCell& BucketGrid::cell(int k, std::size_t r) {
  return const_cast<GridCell&>(std::as_const(*this).cell(k, r));
}

double BucketGrid::traded_volume(int k) const {
  double total = 0.0;
  for (std::size_t r = 1; r <= n_volume_; ++r) {
    const auto& c = cell(k, r);
    total += c.side(Side::buy).traded_volume + c.side(Side::sell).traded_volume;
  }
  return total;
}

BucketGrid BucketGrid::tail(int n) const {
  if (n < 1 || n > n_buckets_) throw OutOfRange("tail of " + std::to_string(n) + " buckets");
  const int skip = n_buckets_ - n;
  BucketGrid out(delivery_start_, n, n_volume_, window_start_ + kBucketSeconds * skip);
  const auto offset = static_cast<std::ptrdiff_t>(skip) * static_cast<std::ptrdiff_t>(n_volume_);
  std::copy(cells_.begin() + offset, cells_.end(), out.cells_.begin());
  return out;
}

int trading_buckets(Timestamp arrival, Timestamp delivery_start) {
  const auto lead = std::chrono::floor<std::chrono::minutes>(delivery_start - arrival).count();
  const auto n = lead - kCutoffMinutes;
  if (n < 1) throw ArrivalAfterCutoff();
  return static_cast<int>(n);
}

BookTimeline BookTimeline::build(std::span<const OrderEvent> events, Seconds begin, Seconds end,
                                 const VolumeBucketScheme& scheme) {
  BookTimeline timeline;
  sweep_book(events, begin, end, scheme, [&](Seconds p, Seconds q, const SegmentLevels& levels) {
    Segment seg{p, q, std::vector<double>(scheme.size()), std::vector<double>(scheme.size())};
    for (std::size_t r = 1; r <= scheme.size(); ++r) {
      seg.buy_level[r - 1] = levels.level(Side::buy, r);
      seg.sell_level[r - 1] = levels.level(Side::sell, r);
    }
    timeline.segments_.push_back(std::move(seg));
  });
  return timeline;
}

std::optional<double> BookTimeline::median_bas(Seconds begin, Seconds end, std::size_t r) const {
  std::vector<std::pair<double, Seconds>> values;
  auto it = std::lower_bound(segments_.begin(), segments_.end(), begin,
                             [](const Segment& s, Seconds t) { return s.end <= t; });
  for (; it != segments_.end() && it->begin < end; ++it) {
    const Seconds overlap = std::min(end, it->end) - std::max(begin, it->begin);
    const double buy = it->buy_level[r - 1];
    const double sell = it->sell_level[r - 1];
    if (overlap > 0 && !std::isnan(buy) && !std::isnan(sell)) values.emplace_back(sell - buy, overlap);
  }
  if (values.empty()) return std::nullopt;
  return weighted_median(values);
}

BucketGrid aggregate(std::span<const OrderEvent> events, Timestamp delivery_start,
                     Timestamp observation_start, Timestamp arrival,
                     const VolumeBucketScheme& scheme) {
  const int n_buckets = trading_buckets(arrival, delivery_start);
  const Seconds begin = (arrival - observation_start).count();
  const Seconds end = begin + kBucketSeconds * n_buckets;
  BucketGrid grid(delivery_start, n_buckets, scheme.size(), begin);

  for (const auto& e : events) {
    if (e.delivery_start != delivery_start)
      throw Error(ErrorCategory::data, "event belongs to delivery " + format_utc(e.delivery_start));
    if (e.action != Action::match || e.valid_from < begin || e.valid_from >= end) continue;
    const int k = static_cast<int>((e.valid_from - begin) / kBucketSeconds) + 1;
    grid.cell(k, scheme.bucket_of(e.volume)).side(e.side).traded_volume += e.volume;
  }

  const std::size_t nb = scheme.size();
  std::vector<std::vector<std::pair<double, Seconds>>> bas(nb);
  std::array<std::vector<std::vector<std::pair<double, Seconds>>>, 2> price{
      std::vector<std::vector<std::pair<double, Seconds>>>(nb),
      std::vector<std::vector<std::pair<double, Seconds>>>(nb)};
  std::array<std::vector<std::vector<std::size_t>>, 2> ids{std::vector<std::vector<std::size_t>>(nb),
                                                           std::vector<std::vector<std::size_t>>(nb)};
  std::vector<char> crossed(nb, 0);
  int current = 0;

  auto flush = [&](int k) {
    for (std::size_t r = 1; r <= nb; ++r) {
      auto& cell = grid.cell(k, r);
      auto& b = bas[r - 1];
      if (!b.empty()) {
        cell.empty = false;
        cell.crossed = crossed[r - 1] != 0;
        cell.mean_bas = weighted_mean(b);
        cell.median_bas = weighted_median(b);
      }
      for (Side d : {Side::buy, Side::sell}) {
        auto& p = price[index_of(d)][r - 1];
        auto& id = ids[index_of(d)][r - 1];
        auto& side = cell.side(d);
        if (!p.empty()) {
          side.empty = false;
          side.median_price = weighted_median(p);
          std::sort(id.begin(), id.end());
          side.order_count = static_cast<int>(std::unique(id.begin(), id.end()) - id.begin());
        }
        p.clear();
        id.clear();
      }
      b.clear();
      crossed[r - 1] = 0;
    }
  };

  sweep_book(events, begin, end, scheme, [&](Seconds p, Seconds q, const SegmentLevels& levels) {
    const int k = static_cast<int>((p - begin) / kBucketSeconds) + 1;
    if (k != current) {
      if (current != 0) flush(current);
      current = k;
    }
    const Seconds w = q - p;
    for (std::size_t r = 1; r <= nb; ++r) {
      const double buy = levels.level(Side::buy, r);
      const double sell = levels.level(Side::sell, r);
      if (!std::isnan(buy)) price[index_of(Side::buy)][r - 1].emplace_back(buy, w);
      if (!std::isnan(sell)) price[index_of(Side::sell)][r - 1].emplace_back(sell, w);
      if (!std::isnan(buy) && !std::isnan(sell)) {
        const double spread = sell - buy;
        if (spread < 0.0) crossed[r - 1] = 1;
        bas[r - 1].emplace_back(spread, w);
      }
    }
    for (Side d : {Side::buy, Side::sell}) {
      for (const auto& [order, r] : levels.contributions[index_of(d)])
        ids[index_of(d)][r - 1].push_back(order);
    }
  });
  if (current != 0) flush(current);
  return grid;
}

std::vector<BucketGrid> aggregate_batch(std::span<const ProductEvents> products,
                                        const VolumeBucketScheme& scheme, Exec exec) {
  std::vector<BucketGrid> grids(products.size());
  const auto n = static_cast<std::ptrdiff_t>(products.size());
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto& p = products[static_cast<std::size_t>(i)];
      grids[static_cast<std::size_t>(i)] =
          aggregate(p.events, p.delivery_start, p.observation_start, p.arrival, scheme);
    }
    return grids;
  }
  std::vector<std::exception_ptr> errors(products.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      const auto& p = products[idx];
      grids[idx] = aggregate(p.events, p.delivery_start, p.observation_start, p.arrival, scheme);
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return grids;
}

}  // namespace intraday
