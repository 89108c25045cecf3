#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "intraday/calendar.hpp"
#include "intraday/exec.hpp"

// Order-book domain types and the time/volume discretization of LOB data.
//
// Index conventions: minute buckets k and volume buckets r are 1-based in
// every public function, matching how the grid is reported. Event times are
// integer seconds since the observation start of the file they came from.

namespace intraday {

enum class Side : std::uint8_t { buy = 0, sell = 1 };
enum class Action : std::uint8_t { add, cancel, match };

using Seconds = std::int64_t;

inline constexpr double kPriceTick = 0.01;
inline constexpr double kVolumeTick = 0.1;
inline constexpr double kPriceFloor = -500.0;
inline constexpr double kPriceCap = 3000.0;
inline constexpr int kCutoffMinutes = 30;
inline constexpr Seconds kBucketSeconds = 60;

constexpr Side opposite(Side d) { return d == Side::buy ? Side::sell : Side::buy; }
constexpr std::size_t index_of(Side d) { return static_cast<std::size_t>(d); }

std::string to_string(Side d);
std::string to_string(Action a);

struct OrderEvent {
  Timestamp delivery_start{};
  Side side = Side::buy;
  double price = 0.0;   // EUR/MWh, 2 decimals
  double volume = 0.0;  // MWh, 1 decimal
  Seconds valid_from = 0;
  Seconds valid_to = 0;
  Action action = Action::add;

  bool operator==(const OrderEvent&) const = default;
};

// Empty when the event satisfies its invariants, otherwise the first violation.
std::string invariant_violation(const OrderEvent& e);

// Cumulative-volume intervals b_1..b_R. b_1 = [0, u_1], b_r = (u_{r-1}, u_r].
class VolumeBucketScheme {
 public:
  // The 23-bucket scheme: [0,1], (1,5], 5-wide to 30, 10-wide to 100,
  // 25-wide to 200, (200,250], (250,300], (300,400], (400,500], (500,inf).
  static const VolumeBucketScheme& standard();

  // Strictly increasing upper bounds; the last one must be +inf.
  explicit VolumeBucketScheme(std::vector<double> upper_bounds);

  std::size_t size() const { return upper_.size(); }
  double lower(std::size_t r) const;
  double upper(std::size_t r) const;
  std::size_t bucket_of(double cumulative) const;
  // Interval midpoint; the unbounded last bucket reports its lower bound.
  double representative(std::size_t r) const;

  bool operator==(const VolumeBucketScheme&) const = default;

 private:
  std::vector<double> upper_;
};

// Membership of an order in minute bucket k of a window starting at
// window_start: valid_from < start + 60k and valid_to >= start + 60(k-1).
bool time_bucket_membership(const OrderEvent& order, int k, Seconds window_start = 0);

struct Allocation {
  std::size_t order = 0;  // index into the split input
  double volume = 0.0;

  bool operator==(const Allocation&) const = default;
};

// Allocations per volume bucket; element r-1 holds bucket r.
using VolumeSplit = std::vector<std::vector<Allocation>>;

// Orders of one side sorted best-first (buy: price descending, sell: ascending).
// Ties keep their input order.
void sort_best_first(std::vector<OrderEvent>& orders, Side side);

// Walks the best-first book and slices each order's volume into the buckets
// its cumulative position covers. Throws EmptyBook for an empty book and
// std::invalid_argument when the input is not one side sorted best-first.
VolumeSplit cumulative_volume_split(std::span<const OrderEvent> orders, Side side,
                                    const VolumeBucketScheme& scheme = VolumeBucketScheme::standard());

// y_sell - y_buy. Throws MissingSide when either price is absent.
double bas_for_bucket(std::optional<double> buy_price, std::optional<double> sell_price);

struct SideCell {
  bool empty = true;
  double median_price = 0.0;
  double traded_volume = 0.0;
  int order_count = 0;

  bool operator==(const SideCell&) const = default;
};

struct GridCell {
  bool empty = true;     // no second with liquidity on both sides in this bucket
  bool crossed = false;  // some second had sell level below buy level
  double median_bas = 0.0;
  double mean_bas = 0.0;
  std::array<SideCell, 2> sides{};

  const SideCell& side(Side d) const { return sides[index_of(d)]; }
  SideCell& side(Side d) { return sides[index_of(d)]; }

  bool operator==(const GridCell&) const = default;
};

// Aggregated statistics per (minute bucket k, volume bucket r, side d) of one
// delivery product.
class BucketGrid {
 public:
  BucketGrid() = default;
  BucketGrid(Timestamp delivery_start, int n_buckets, std::size_t n_volume_buckets,
             Seconds window_start);

  Timestamp delivery_start() const { return delivery_start_; }
  // Trading buckets; the last one ends at the 30-minute cutoff.
  int n_buckets() const { return n_buckets_; }
  // Minutes from the start of bucket 1 to delivery (= n_buckets + 30).
  int horizon() const { return n_buckets_ + kCutoffMinutes; }
  std::size_t n_volume_buckets() const { return n_volume_; }
  // Start of bucket 1 in seconds since the observation start.
  Seconds window_start() const { return window_start_; }

  const GridCell& cell(int k, std::size_t r) const;
  GridCell& cell(int k, std::size_t r);

  // Traded volume in minute k summed over volume buckets and sides.
  double traded_volume(int k) const;

  // The last n buckets as a grid of its own, as if the position arrived
  // n + 30 minutes before delivery.
  BucketGrid tail(int n) const;

  bool operator==(const BucketGrid&) const = default;

 private:
  Timestamp delivery_start_{};
  int n_buckets_ = 0;
  std::size_t n_volume_ = 0;
  Seconds window_start_ = 0;
  std::vector<GridCell> cells_;
};

// Trading buckets between arrival and the cutoff: floor(minutes) - 30.
// Throws ArrivalAfterCutoff when no full bucket remains.
int trading_buckets(Timestamp arrival, Timestamp delivery_start);

// Per-second book state, stored as runs of seconds over which no order
// starts or ends. Used for spread statistics over arbitrary windows.
class BookTimeline {
 public:
  struct Segment {
    Seconds begin = 0;
    Seconds end = 0;
    std::vector<double> buy_level;   // per bucket, NaN when that depth is absent
    std::vector<double> sell_level;
  };

  static BookTimeline build(std::span<const OrderEvent> events, Seconds begin, Seconds end,
                            const VolumeBucketScheme& scheme = VolumeBucketScheme::standard());

  const std::vector<Segment>& segments() const { return segments_; }

  // Median over the seconds of [begin, end) that have both sides at bucket r.
  std::optional<double> median_bas(Seconds begin, Seconds end, std::size_t r) const;

 private:
  std::vector<Segment> segments_;
};

// Buckets the events of one delivery product into minute and
// cumulative-volume cells. Adds define resting liquidity, cancel rows are
// ignored (their adds are already truncated), matches feed traded volume.
BucketGrid aggregate(std::span<const OrderEvent> events, Timestamp delivery_start,
                     Timestamp observation_start, Timestamp arrival,
                     const VolumeBucketScheme& scheme = VolumeBucketScheme::standard());

struct ProductEvents {
  Timestamp delivery_start{};
  Timestamp observation_start{};
  Timestamp arrival{};
  std::vector<OrderEvent> events;
};

// aggregate() over many delivery products; one grid per input, same order.
std::vector<BucketGrid> aggregate_batch(std::span<const ProductEvents> products,
                                        const VolumeBucketScheme& scheme, Exec exec);

}  // namespace intraday
