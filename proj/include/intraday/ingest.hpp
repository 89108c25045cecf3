#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "intraday/calendar.hpp"
#include "intraday/lob_core.hpp"

// LOB CSV v1 and the synthetic order-book generator.
//
// File layout (UTF-8):
//   #schema_version=1
//   #delivery_start=2019-01-07T14:00:00Z
//   #observation_start=2019-01-07T09:00:00Z
//   #timezone=UTC
//   [#<key>=<value> ...]            additional keys are preserved, in order
//   side,price,volume,valid_from,valid_to,action
//   buy,47.12,0.6,0,30,add
// Prices carry 2 decimals, volumes 1 decimal, times are integer seconds
// since observation_start. A cancel row refers to the earliest unmatched add
// with the same side, price, volume and valid_from; its valid_to is the
// cancellation time.

namespace intraday {

inline constexpr int kLobSchemaVersion = 1;

struct LobFileHeader {
  int schema_version = kLobSchemaVersion;
  Timestamp delivery_start{};
  Timestamp observation_start{};
  std::string timezone = "UTC";
  std::vector<std::pair<std::string, std::string>> extra;

  bool operator==(const LobFileHeader&) const = default;
};

// Single-pass row reader; memory use is independent of file size.
class LobReader {
 public:
  explicit LobReader(std::istream& in);

  const LobFileHeader& header() const { return header_; }
  // Next data row, validated against the OrderEvent invariants.
  std::optional<OrderEvent> next();
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  LobFileHeader header_;
  std::size_t line_ = 0;
};

struct LobFile {
  LobFileHeader header;
  std::vector<OrderEvent> events;
};

// Whole file: events in valid_from order, cancel rows matched to their adds
// and the adds' lifetimes truncated to the cancellation time.
LobFile read_lob_csv(const std::filesystem::path& path);
LobFile read_lob_csv(std::istream& in);

void write_lob_csv(const std::filesystem::path& path, const LobFileHeader& header,
                   std::span<const OrderEvent> events);
void write_lob_csv(std::ostream& out, const LobFileHeader& header,
                   std::span<const OrderEvent> events);

enum class ProfileShape { flat, empirical };

std::string to_string(ProfileShape p);
ProfileShape parse_profile_shape(const std::string& text);

struct SynthConfig {
  std::uint64_t seed = 1;
  double base_price = 47.22;
  double daily_volatility = 20.57;
  ProfileShape spread_profile = ProfileShape::empirical;
  ProfileShape volume_profile = ProfileShape::empirical;
  int xbid_cut_minutes = 60;
  int local_start_minutes = 30;
};

// Throws ConfigError on invariant violations.
void validate(const SynthConfig& config);

// Synthetic event stream for one delivery product, observed from arrival to
// the 30-minute trading cutoff. Times are seconds since arrival. Quotes are
// refreshed every 30 s as a 12-level price ladder per side; the empirical
// spread profile adds the XBID/cutover/local regime levels, lognormal noise
// and a spread response to recent traded volume.
std::vector<OrderEvent> synth_lob(const SynthConfig& config, Timestamp delivery_start,
                                  Timestamp arrival);

// Cells keyed "t/k/r/d" with t the UTC delivery start.
nlohmann::json grid_to_json(const BucketGrid& grid);

}  // namespace intraday
