#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace intraday {

using Timestamp = std::chrono::sys_seconds;

// "YYYY-MM-DDTHH:MM:SSZ"
Timestamp parse_utc(std::string_view text);
std::string format_utc(Timestamp t);

// Delivery-product calendar flags used as model dummies.
struct TimeMeta {
  bool weekend = false;
  bool peak = false;

  bool operator==(const TimeMeta&) const = default;
};

// Weekend = Saturday/Sunday (UTC); peak = delivery start hour in [8, 20).
TimeMeta time_meta(Timestamp delivery_start);

}  // namespace intraday
