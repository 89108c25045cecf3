#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "intraday/error.hpp"
#include "intraday/lob_core.hpp"
#include "support.hpp"

using namespace intraday;
using namespace testing_support;

namespace {

// Per-second reference: rebuild the book every second, walk it best-first,
// and collect each bucket's levels second by second.
struct OracleCell {
  std::vector<double> bas;
  std::array<std::vector<double>, 2> price;
};

double plain_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::map<std::pair<int, std::size_t>, OracleCell> brute_force(const std::vector<OrderEvent>& events, Seconds begin,
                                                              int n_buckets, const VolumeBucketScheme& scheme) {
  std::map<std::pair<int, std::size_t>, OracleCell> cells;
  for (Seconds s = begin; s < begin + 60 * n_buckets; ++s) {
    const int k = static_cast<int>((s - begin) / 60) + 1;
    std::array<std::vector<double>, 2> level;
    for (Side d : {Side::buy, Side::sell}) {
      std::vector<std::pair<double, std::size_t>> book;  // (price, index)
      for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        if (e.action == Action::add && e.side == d && e.valid_from <= s && s < e.valid_to) book.emplace_back(e.price, i);
      }
      std::stable_sort(book.begin(), book.end(), [d](const auto& a, const auto& b) {
        if (a.first != b.first) return d == Side::buy ? a.first > b.first : a.first < b.first;
        return a.second < b.second;
      });
      std::vector<double> vol(scheme.size(), 0.0);
      std::vector<double> notional(scheme.size(), 0.0);
      double cum = 0.0;
      for (const auto& [price, i] : book) {
        const double lo = cum;
        const double hi = cum + events[i].volume;
        for (std::size_t r = 1; r <= scheme.size(); ++r) {
          const double a = std::min(hi, scheme.upper(r)) - std::max(lo, scheme.lower(r));
          if (a > 1e-12) {
            vol[r - 1] += a;
            notional[r - 1] += a * price;
          }
        }
        cum = hi;
      }
      level[index_of(d)].resize(scheme.size());
      for (std::size_t r = 0; r < scheme.size(); ++r)
        level[index_of(d)][r] = vol[r] > 0 ? notional[r] / vol[r] : std::numeric_limits<double>::quiet_NaN();
    }
    for (std::size_t r = 1; r <= scheme.size(); ++r) {
      const double b = level[0][r - 1];
      const double a = level[1][r - 1];
      auto& c = cells[{k, r}];
      if (!std::isnan(b)) c.price[0].push_back(b);
      if (!std::isnan(a)) c.price[1].push_back(a);
      if (!std::isnan(a) && !std::isnan(b)) c.bas.push_back(a - b);
    }
  }
  return cells;
}

void expect_matches_oracle(const std::vector<OrderEvent>& events, Timestamp d, Timestamp obs, Timestamp arrival,
                           const VolumeBucketScheme& scheme) {
  const auto grid = aggregate(events, d, obs, arrival, scheme);
  const auto oracle = brute_force(events, grid.window_start(), grid.n_buckets(), scheme);
  for (int k = 1; k <= grid.n_buckets(); ++k) {
    for (std::size_t r = 1; r <= scheme.size(); ++r) {
      const auto& cell = grid.cell(k, r);
      const auto it = oracle.find({k, r});
      const bool oracle_empty = it == oracle.end() || it->second.bas.empty();
      ASSERT_EQ(cell.empty, oracle_empty) << "k=" << k << " r=" << r;
      if (!oracle_empty) {
        EXPECT_NEAR(cell.median_bas, plain_median(it->second.bas), 1e-9) << "k=" << k << " r=" << r;
        double mean = 0.0;
        for (double v : it->second.bas) mean += v;
        EXPECT_NEAR(cell.mean_bas, mean / static_cast<double>(it->second.bas.size()), 1e-9);
      }
      for (Side s : {Side::buy, Side::sell}) {
        const bool side_empty = it == oracle.end() || it->second.price[index_of(s)].empty();
        ASSERT_EQ(cell.side(s).empty, side_empty);
        if (!side_empty) EXPECT_NEAR(cell.side(s).median_price, plain_median(it->second.price[index_of(s)]), 1e-9);
      }
    }
  }
}

}  // namespace

TEST(TimeBucketMembership, Examples) {
  const auto o = add(Side::buy, 50, 1, 30, 90);
  EXPECT_TRUE(time_bucket_membership(o, 1));
  EXPECT_TRUE(time_bucket_membership(o, 2));
  EXPECT_FALSE(time_bucket_membership(add(Side::buy, 50, 1, 120, 130), 1));
  EXPECT_TRUE(time_bucket_membership(add(Side::buy, 50, 1, 120, 130), 1, 100));
}

TEST(VolumeBucketScheme, StandardBounds) {
  const auto& s = VolumeBucketScheme::standard();
  ASSERT_EQ(s.size(), 23u);
  EXPECT_EQ(s.upper(1), 1.0);
  EXPECT_EQ(s.upper(2), 5.0);
  EXPECT_EQ(s.upper(22), 500.0);
  EXPECT_TRUE(std::isinf(s.upper(23)));
  EXPECT_EQ(s.bucket_of(0.0), 1u);
  EXPECT_EQ(s.bucket_of(1.0), 1u);
  EXPECT_EQ(s.bucket_of(1.05), 2u);
  EXPECT_EQ(s.bucket_of(300.0), 20u);
  EXPECT_EQ(s.bucket_of(1e6), 23u);
  EXPECT_EQ(s.representative(1), 0.5);
  EXPECT_EQ(s.representative(23), 500.0);
  EXPECT_THROW(s.bucket_of(-1.0), OutOfRange);
  EXPECT_THROW(VolumeBucketScheme({1.0, 2.0}), std::invalid_argument);
}

TEST(VolumeBucketScheme, EveryVolumeInExactlyOneBucket) {
  const auto& s = VolumeBucketScheme::standard();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 800.0);
  for (int i = 0; i < 2000; ++i) {
    const double v = i < 600 ? i * 0.5 : u(rng);
    int hits = 0;
    for (std::size_t r = 1; r <= s.size(); ++r) {
      const bool in = r == 1 ? (v >= 0 && v <= s.upper(1)) : (v > s.lower(r) && v <= s.upper(r));
      hits += in ? 1 : 0;
      if (in) EXPECT_EQ(s.bucket_of(v), r);
    }
    EXPECT_EQ(hits, 1) << v;
  }
}

TEST(CumulativeVolumeSplit, BoundaryArithmetic) {
  std::vector<OrderEvent> sells{add(Side::sell, 50, 0.6, 0, 10), add(Side::sell, 51, 0.8, 0, 10)};
  const auto split = cumulative_volume_split(sells, Side::sell);
  ASSERT_EQ(split[0].size(), 2u);
  EXPECT_EQ(split[0][0], (Allocation{0, 0.6}));
  EXPECT_EQ(split[0][1].order, 1u);
  EXPECT_NEAR(split[0][1].volume, 0.4, 1e-12);
  ASSERT_EQ(split[1].size(), 1u);
  EXPECT_NEAR(split[1][0].volume, 0.4, 1e-12);

  const auto one = cumulative_volume_split(std::vector{add(Side::buy, 49, 1.0, 0, 10)}, Side::buy);
  ASSERT_EQ(one[0].size(), 1u);
  EXPECT_EQ(one[0][0].volume, 1.0);
  for (std::size_t r = 1; r < one.size(); ++r) EXPECT_TRUE(one[r].empty());
}

TEST(CumulativeVolumeSplit, LargeOrderCoversIntervalWidths) {
  const auto& s = VolumeBucketScheme::standard();
  const auto split = cumulative_volume_split(std::vector{add(Side::sell, 60, 500.0, 0, 10)}, Side::sell);
  double total = 0.0;
  for (std::size_t r = 1; r <= 22; ++r) {
    ASSERT_EQ(split[r - 1].size(), 1u) << r;
    EXPECT_NEAR(split[r - 1][0].volume, s.upper(r) - s.lower(r), 1e-9);
    total += split[r - 1][0].volume;
  }
  EXPECT_NEAR(total, 500.0, 1e-9);
  EXPECT_TRUE(split[22].empty());
}

TEST(CumulativeVolumeSplit, RejectsBadInput) {
  EXPECT_THROW(cumulative_volume_split(std::vector<OrderEvent>{}, Side::buy), EmptyBook);
  std::vector<OrderEvent> unsorted{add(Side::sell, 51, 1, 0, 10), add(Side::sell, 50, 1, 0, 10)};
  EXPECT_THROW(cumulative_volume_split(unsorted, Side::sell), std::invalid_argument);
  std::vector<OrderEvent> mixed{add(Side::sell, 51, 1, 0, 10), add(Side::buy, 50, 1, 0, 10)};
  EXPECT_THROW(cumulative_volume_split(mixed, Side::sell), std::invalid_argument);
}

TEST(SortBestFirst, StableOnTies) {
  std::vector<OrderEvent> buys{add(Side::buy, 49, 1, 0, 10), add(Side::buy, 50, 2, 0, 10), add(Side::buy, 49, 3, 0, 10)};
  sort_best_first(buys, Side::buy);
  EXPECT_EQ(buys[0].price, 50);
  EXPECT_EQ(buys[1].volume, 1);
  EXPECT_EQ(buys[2].volume, 3);
}

TEST(BasForBucket, Examples) {
  EXPECT_DOUBLE_EQ(bas_for_bucket(50.0, 51.0), 1.0);
  EXPECT_DOUBLE_EQ(bas_for_bucket(47.22, 47.22), 0.0);
  EXPECT_THROW(bas_for_bucket(std::nullopt, 51.0), MissingSide);
  EXPECT_THROW(bas_for_bucket(50.0, std::nullopt), MissingSide);

  // Bucket 2 of a toy book with sells 52 x 2.0 and 53 x 2.0 covers one MWh
  // at 52 and two at 53: level (52 + 2 * 53) / 3.
  std::vector<OrderEvent> sells{add(Side::sell, 52, 2.0, 0, 10), add(Side::sell, 53, 2.0, 0, 10)};
  const auto split = cumulative_volume_split(sells, Side::sell);
  double notional = 0.0;
  double volume = 0.0;
  for (const auto& a : split[1]) {
    notional += a.volume * sells[a.order].price;
    volume += a.volume;
  }
  EXPECT_NEAR(bas_for_bucket(50.0, notional / volume), 52.0 + 2.0 / 3.0 - 50.0, 1e-12);
}

TEST(TradingBuckets, LeadTimes) {
  const auto d = delivery();
  EXPECT_EQ(trading_buckets(d - std::chrono::minutes{300}, d), 270);
  EXPECT_EQ(trading_buckets(d - std::chrono::minutes{90}, d), 60);
  EXPECT_EQ(trading_buckets(d - std::chrono::seconds{90 * 60 + 59}, d), 60);
  EXPECT_THROW(trading_buckets(d - std::chrono::minutes{30}, d), ArrivalAfterCutoff);
}

TEST(Aggregate, EmptyInputGivesEmptyGrid) {
  const auto d = delivery();
  const auto arrival = d - std::chrono::minutes{40};
  const auto grid = aggregate({}, d, arrival, arrival);
  ASSERT_EQ(grid.n_buckets(), 10);
  EXPECT_EQ(grid.horizon(), 40);
  for (int k = 1; k <= 10; ++k)
    for (std::size_t r = 1; r <= grid.n_volume_buckets(); ++r) EXPECT_TRUE(grid.cell(k, r).empty);
}

TEST(Aggregate, ToyBookHandComputed) {
  const auto d = delivery();
  const auto arrival = d - std::chrono::minutes{32};  // two buckets
  std::vector<OrderEvent> ev{
      add(Side::buy, 50.0, 1.0, 0, 120),   add(Side::sell, 51.0, 1.0, 0, 60),
      add(Side::sell, 52.0, 4.0, 0, 120),  add(Side::buy, 49.0, 4.0, 30, 120),
      add(Side::sell, 50.5, 1.0, 60, 120), match(Side::buy, 51.0, 0.4, 70),
  };
  const auto grid = aggregate(ev, d, arrival, arrival);
  ASSERT_EQ(grid.n_buckets(), 2);
  // k=1, r=1: sell 51 over the whole minute, buy 50 -> 1.0.
  EXPECT_DOUBLE_EQ(grid.cell(1, 1).median_bas, 1.0);
  // k=2, r=1: sell 50.5 ahead of 52 -> 0.5.
  EXPECT_DOUBLE_EQ(grid.cell(2, 1).median_bas, 0.5);
  // k=1, r=2: sells 52 x 4 fill (1, 5] throughout; buys reach r=2 from second 30.
  EXPECT_DOUBLE_EQ(grid.cell(1, 2).median_bas, 3.0);
  EXPECT_DOUBLE_EQ(grid.cell(1, 2).side(Side::buy).median_price, 49.0);
  EXPECT_EQ(grid.cell(1, 2).side(Side::sell).order_count, 1);
  EXPECT_TRUE(grid.cell(1, 3).empty);
  EXPECT_DOUBLE_EQ(grid.traded_volume(2), 0.4);
  EXPECT_DOUBLE_EQ(grid.traded_volume(1), 0.0);
  expect_matches_oracle(ev, d, arrival, arrival, VolumeBucketScheme::standard());
}

TEST(Aggregate, MatchesPerSecondOracleOnRandomBooks) {
  const VolumeBucketScheme scheme({1, 3, 6, std::numeric_limits<double>::infinity()});
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = delivery();
    const auto obs = d - std::chrono::minutes{40};
    const auto arrival = d - std::chrono::minutes{35};  // window starts 300 s in, 5 buckets
    std::uniform_int_distribution<int> t(250, 640);
    std::uniform_int_distribution<int> life(1, 200);
    std::uniform_int_distribution<int> cents(-150, 150);
    std::uniform_int_distribution<int> vol(1, 40);
    std::vector<OrderEvent> ev;
    for (int i = 0; i < 40; ++i) {
      const Side s = i % 2 == 0 ? Side::buy : Side::sell;
      const Seconds from = t(rng);
      const double base = s == Side::buy ? 49.0 : 51.0;
      ev.push_back(add(s, base + cents(rng) / 100.0, vol(rng) / 10.0, from, from + life(rng), d));
    }
    expect_matches_oracle(ev, d, obs, arrival, scheme);
  }
}

TEST(Aggregate, RejectsForeignDelivery) {
  const auto d = delivery();
  std::vector<OrderEvent> ev{add(Side::buy, 50, 1, 0, 10, delivery(8))};
  EXPECT_THROW(aggregate(ev, d, d - std::chrono::minutes{40}, d - std::chrono::minutes{40}), Error);
}

TEST(BucketGrid, TailKeepsLastBuckets) {
  SynthConfig synth;
  const auto d = delivery();
  const auto p = synth_product(synth, d, 100);
  const auto full = aggregate(p.events, p.delivery_start, p.observation_start, p.arrival);
  const auto tail = full.tail(20);
  ASSERT_EQ(tail.n_buckets(), 20);
  for (int k = 1; k <= 20; ++k)
    for (std::size_t r = 1; r <= full.n_volume_buckets(); ++r) EXPECT_EQ(tail.cell(k, r), full.cell(k + 50, r));
  // Aggregating from the later arrival gives the same cells.
  const auto direct = aggregate(p.events, p.delivery_start, p.observation_start, d - std::chrono::minutes{50});
  EXPECT_EQ(direct, tail);
  EXPECT_THROW(full.tail(0), OutOfRange);
  EXPECT_THROW(full.tail(71), OutOfRange);
}

TEST(BookTimeline, MedianMatchesGridCell) {
  SynthConfig synth;
  const auto p = synth_product(synth, delivery(), 45);
  const auto grid = aggregate(p.events, p.delivery_start, p.observation_start, p.arrival);
  const auto tl = BookTimeline::build(p.events, grid.window_start(), grid.window_start() + 60 * grid.n_buckets());
  for (int k = 1; k <= grid.n_buckets(); ++k) {
    for (std::size_t r = 1; r <= 4; ++r) {
      const auto m = tl.median_bas(grid.window_start() + 60 * (k - 1), grid.window_start() + 60 * k, r);
      ASSERT_EQ(m.has_value(), !grid.cell(k, r).empty);
      if (m) EXPECT_DOUBLE_EQ(*m, grid.cell(k, r).median_bas);
    }
  }
}

TEST(AggregateBatch, SerialEqualsParallel) {
  SynthConfig synth;
  synth.seed = 3;
  std::vector<ProductEvents> products;
  for (int day = 1; day <= 6; ++day) products.push_back(synth_product(synth, delivery(day), 120));
  const auto serial = aggregate_batch(products, VolumeBucketScheme::standard(), Exec::serial);
  const auto parallel = aggregate_batch(products, VolumeBucketScheme::standard(), Exec::parallel);
  EXPECT_EQ(serial, parallel);
  for (std::size_t i = 0; i < products.size(); ++i) {
    const auto& p = products[i];
    EXPECT_EQ(serial[i], aggregate(p.events, p.delivery_start, p.observation_start, p.arrival));
  }
}

TEST(OrderEvent, Invariants) {
  EXPECT_TRUE(invariant_violation(add(Side::buy, 50, 1, 0, 10)).empty());
  EXPECT_FALSE(invariant_violation(add(Side::buy, 50, 0, 0, 10)).empty());
  EXPECT_FALSE(invariant_violation(add(Side::buy, 50, 1, 10, 10)).empty());
  EXPECT_FALSE(invariant_violation(add(Side::buy, 3000.01, 1, 0, 10)).empty());
  EXPECT_FALSE(invariant_violation(add(Side::buy, -500.01, 1, 0, 10)).empty());
}
