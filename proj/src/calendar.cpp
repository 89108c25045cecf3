#include "intraday/calendar.hpp"

#include <charconv>
#include <cstdio>

#include "intraday/error.hpp"

namespace intraday {

namespace {

int parse_field(std::string_view text, std::size_t pos, std::size_t len) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
  if (ec != std::errc{} || ptr != text.data() + pos + len) {
    throw Error(ErrorCategory::data, "malformed timestamp '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

Timestamp parse_utc(std::string_view text) {
  if (text.size() != 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
      text[13] != ':' || text[16] != ':' || text[19] != 'Z') {
    throw Error(ErrorCategory::data, "malformed timestamp '" + std::string(text) + "'");
  }
  using namespace std::chrono;
  const year_month_day ymd{year{parse_field(text, 0, 4)},
                           month{static_cast<unsigned>(parse_field(text, 5, 2))},
                           day{static_cast<unsigned>(parse_field(text, 8, 2))}};
  const int hh = parse_field(text, 11, 2);
  const int mm = parse_field(text, 14, 2);
  const int ss = parse_field(text, 17, 2);
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 59) {
    throw Error(ErrorCategory::data, "invalid timestamp '" + std::string(text) + "'");
  }
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss};
}

std::string format_utc(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

TimeMeta time_meta(Timestamp delivery_start) {
  using namespace std::chrono;
  const auto day = floor<days>(delivery_start);
  const weekday wd{day};
  const auto hour = duration_cast<hours>(delivery_start - day).count();
  return TimeMeta{wd == Saturday || wd == Sunday, hour >= 8 && hour < 20};
}

}  // namespace intraday
