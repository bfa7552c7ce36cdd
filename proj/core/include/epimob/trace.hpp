#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "epimob/rng.hpp"

namespace epimob {

struct MobilityModel;

inline constexpr std::int64_t kSecondsPerDay = 86400;

enum class DayPeriod : std::int8_t { morning = 0, afternoon = 1, night = 2 };
enum class DayType : std::int8_t { weekday = 0, weekend = 1 };

/// (period-of-day, weekday/weekend) pair conditioning the mobility model.
/// Periods: morning [06:00, 13:00), afternoon [13:00, 20:00), night [20:00, 06:00).
struct TimeBucket {
  DayPeriod period = DayPeriod::morning;
  DayType daytype = DayType::weekday;

  static constexpr int kCount = 6;
  constexpr int index() const {
    return static_cast<int>(period) * 2 + static_cast<int>(daytype);
  }
  friend bool operator==(const TimeBucket&, const TimeBucket&) = default;
};

/// Timestamps are local clock time, anchored so that t = 0 is 00:00 on a Monday.
/// A record between 00:00 and 06:00 belongs to the night period of its own
/// calendar day; day type comes from that same calendar day.
TimeBucket bucket_of_time(std::int64_t timestamp);

struct CallRecord {
  std::int32_t antenna = 0;  // 1-based antenna id
  std::int64_t timestamp = 0;
  friend bool operator==(const CallRecord&, const CallRecord&) = default;
};

struct UserTrace {
  std::string user;
  std::vector<CallRecord> records;  // sorted by timestamp
  friend bool operator==(const UserTrace&, const UserTrace&) = default;
};

struct Trace {
  std::int32_t antenna_count = 0;
  std::int32_t subpref_count = 0;
  std::vector<std::int32_t> subpref_of_antenna;  // index antenna-1; empty if absent
  std::vector<UserTrace> users;                  // sorted by user id
  std::int64_t malformed_lines = 0;

  std::int64_t record_count() const;
  bool has_subpref_map() const { return !subpref_of_antenna.empty(); }
  friend bool operator==(const Trace&, const Trace&) = default;
};

enum class TraceFormat { csv };

/// Reads a trace CSV (header `user_id,antenna_id,timestamp`). Records are
/// sorted per user; malformed lines are counted, not fatal. antenna_count > 0
/// fixes the antenna domain; ids outside [1, antenna_count] are an error.
/// antenna_count == 0 infers the domain as the largest id seen.
Trace parse_trace(const std::string& path, TraceFormat format, std::int32_t antenna_count = 0);

void write_trace_csv(const std::string& path, const Trace& trace);

/// Sub-prefecture map CSV: header `antenna_id,subpref_id`. Returns the map
/// (index antenna-1) and the number of sub-prefectures.
std::pair<std::vector<std::int32_t>, std::int32_t> load_subpref_map(const std::string& path,
                                                                    std::int32_t antenna_count);

void write_subpref_map_csv(const std::string& path, const std::vector<std::int32_t>& map);

/// Keeps users that visited >= 2 distinct antennas and made on average more
/// than one call per day (record count > observation_days).
Trace filter_users(const Trace& trace, int observation_days);

/// Span of the trace in whole days (ceiling), at least 1. Convenience for
/// callers that do not know the observation window.
int observation_days_of(const Trace& trace);

/// Per-user uniform random split without replacement. Every user keeps at
/// least one training record; the union of the two parts is the input.
std::pair<Trace, Trace> split_train_test(const Trace& trace, double test_fraction,
                                         std::uint64_t rng_seed);

struct GeneratedTrace {
  Trace trace;
  std::vector<std::pair<std::string, std::int32_t>> homes;  // planted ground truth
};

/// Synthetic trace with planted ground truth. Users get a uniform random home
/// antenna; call times form a homogeneous point process at calls_per_day; each
/// call's antenna is drawn from planted(home, bucket(time)).
GeneratedTrace generate_trace(const MobilityModel& planted, int users, int days,
                              double calls_per_day, std::uint64_t rng_seed);

void write_homes_csv(const std::string& path,
                     const std::vector<std::pair<std::string, std::int32_t>>& homes);

}  // namespace epimob
