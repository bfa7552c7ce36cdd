#include "epimob/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include "epimob/mobility.hpp"
#include "text_util.hpp"

namespace epimob {

using detail::fail;

TimeBucket bucket_of_time(std::int64_t timestamp) {
  std::int64_t sec = timestamp % kSecondsPerDay;
  if (sec < 0) sec += kSecondsPerDay;
  const std::int64_t day = (timestamp - sec) / kSecondsPerDay;

  DayPeriod period;
  if (sec >= 6 * 3600 && sec < 13 * 3600) {
    period = DayPeriod::morning;
  } else if (sec >= 13 * 3600 && sec < 20 * 3600) {
    period = DayPeriod::afternoon;
  } else {
    period = DayPeriod::night;
  }
  const int dow = static_cast<int>(((day % 7) + 7) % 7);  // 0 = Monday
  const DayType daytype = dow >= 5 ? DayType::weekend : DayType::weekday;
  return {period, daytype};
}

std::int64_t Trace::record_count() const {
  std::int64_t n = 0;
  for (const auto& u : users) n += static_cast<std::int64_t>(u.records.size());
  return n;
}

namespace {

void sort_users(Trace& trace) {
  for (auto& u : trace.users) {
    std::stable_sort(u.records.begin(), u.records.end(),
                     [](const CallRecord& a, const CallRecord& b) { return a.timestamp < b.timestamp; });
  }
  std::sort(trace.users.begin(), trace.users.end(),
            [](const UserTrace& a, const UserTrace& b) { return a.user < b.user; });
}

}  // namespace

Trace parse_trace(const std::string& path, TraceFormat format, std::int32_t antenna_count) {
  if (format != TraceFormat::csv) fail("parse_trace: unknown trace format");
  std::ifstream in(path);
  if (!in) fail("parse_trace: cannot open '" + path + "'");

  Trace trace;
  std::map<std::string, std::size_t> user_index;
  std::string line;
  bool first = true;
  std::int32_t max_antenna = 0;

  while (std::getline(in, line)) {
    std::string_view sv = detail::trim(line);
    if (sv.empty()) continue;
    if (first) {
      first = false;
      if (sv == "user_id,antenna_id,timestamp") continue;  // header optional
    }
    const auto fields = detail::split(sv, ',');
    std::int32_t antenna = 0;
    std::int64_t ts = 0;
    if (fields.size() != 3 || detail::trim(fields[0]).empty() ||
        !detail::parse_i32(fields[1], antenna) || !detail::parse_i64(fields[2], ts)) {
      ++trace.malformed_lines;
      continue;
    }
    if (antenna < 1 || (antenna_count > 0 && antenna > antenna_count)) {
      fail("parse_trace: antenna id out of range: " + std::to_string(antenna));
    }
    max_antenna = std::max(max_antenna, antenna);
    const std::string user(detail::trim(fields[0]));
    auto [it, inserted] = user_index.try_emplace(user, trace.users.size());
    if (inserted) trace.users.push_back(UserTrace{user, {}});
    trace.users[it->second].records.push_back(CallRecord{antenna, ts});
  }
  trace.antenna_count = antenna_count > 0 ? antenna_count : max_antenna;
  sort_users(trace);
  return trace;
}

void write_trace_csv(const std::string& path, const Trace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("write_trace_csv: cannot open '" + path + "'");
  out << "user_id,antenna_id,timestamp\n";
  for (const auto& u : trace.users) {
    for (const auto& rec : u.records) {
      out << u.user << ',' << rec.antenna << ',' << rec.timestamp << '\n';
    }
  }
  if (!out) fail("write_trace_csv: write failed for '" + path + "'");
}

std::pair<std::vector<std::int32_t>, std::int32_t> load_subpref_map(const std::string& path,
                                                                    std::int32_t antenna_count) {
  std::ifstream in(path);
  if (!in) fail("load_subpref_map: cannot open '" + path + "'");
  std::vector<std::int32_t> map(antenna_count, 0);
  std::string line;
  bool first = true;
  std::int32_t max_sp = 0;
  while (std::getline(in, line)) {
    std::string_view sv = detail::trim(line);
    if (sv.empty()) continue;
    if (first) {
      first = false;
      if (sv == "antenna_id,subpref_id") continue;
    }
    const auto fields = detail::split(sv, ',');
    std::int32_t antenna = 0, sp = 0;
    if (fields.size() != 2 || !detail::parse_i32(fields[0], antenna) || !detail::parse_i32(fields[1], sp)) {
      fail("load_subpref_map: malformed line '" + std::string(sv) + "'");
    }
    if (antenna < 1 || antenna > antenna_count) {
      fail("load_subpref_map: antenna id out of range: " + std::to_string(antenna));
    }
    if (sp < 1) fail("load_subpref_map: subpref id must be >= 1");
    map[antenna - 1] = sp;
    max_sp = std::max(max_sp, sp);
  }
  for (std::int32_t a = 0; a < antenna_count; ++a) {
    if (map[a] == 0) fail("load_subpref_map: no sub-prefecture for antenna " + std::to_string(a + 1));
  }
  return {std::move(map), max_sp};
}

void write_subpref_map_csv(const std::string& path, const std::vector<std::int32_t>& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("write_subpref_map_csv: cannot open '" + path + "'");
  out << "antenna_id,subpref_id\n";
  for (std::size_t a = 0; a < map.size(); ++a) out << (a + 1) << ',' << map[a] << '\n';
}

Trace filter_users(const Trace& trace, int observation_days) {
  if (observation_days <= 0) fail("filter_users: observation_days must be > 0");
  Trace out = trace;
  out.users.clear();
  for (const auto& u : trace.users) {
    if (static_cast<std::int64_t>(u.records.size()) <= observation_days) continue;
    std::int32_t first_antenna = u.records.empty() ? 0 : u.records.front().antenna;
    bool multi = false;
    for (const auto& rec : u.records) {
      if (rec.antenna != first_antenna) {
        multi = true;
        break;
      }
    }
    if (multi) out.users.push_back(u);
  }
  return out;
}

int observation_days_of(const Trace& trace) {
  std::int64_t lo = 0, hi = 0;
  bool any = false;
  for (const auto& u : trace.users) {
    if (u.records.empty()) continue;
    const std::int64_t a = u.records.front().timestamp;
    const std::int64_t b = u.records.back().timestamp;
    if (!any) {
      lo = a;
      hi = b;
      any = true;
    } else {
      lo = std::min(lo, a);
      hi = std::max(hi, b);
    }
  }
  if (!any) return 1;
  return static_cast<int>(std::max<std::int64_t>(1, (hi - lo + kSecondsPerDay - 1) / kSecondsPerDay));
}

std::pair<Trace, Trace> split_train_test(const Trace& trace, double test_fraction,
                                         std::uint64_t rng_seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    fail("split_train_test: test_fraction must be in (0, 1)");
  }
  RngEngine rng = make_engine(derive_seed(rng_seed, 0, "split"));
  Trace train = trace;
  Trace test = trace;
  for (auto& u : train.users) u.records.clear();
  for (auto& u : test.users) u.records.clear();

  std::vector<std::size_t> idx;
  for (std::size_t ui = 0; ui < trace.users.size(); ++ui) {
    const auto& records = trace.users[ui].records;
    const std::size_t k = records.size();
    std::size_t n_test = static_cast<std::size_t>(std::floor(static_cast<double>(k) * test_fraction));
    if (n_test >= k) n_test = k - 1;  // each user keeps at least one training record

    idx.resize(k);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // partial Fisher-Yates: the first n_test entries are the test sample
    for (std::size_t j = 0; j < n_test; ++j) {
      const std::size_t swap_with = j + static_cast<std::size_t>(uniform_below(rng, k - j));
      std::swap(idx[j], idx[swap_with]);
    }
    std::vector<char> is_test(k, 0);
    for (std::size_t j = 0; j < n_test; ++j) is_test[idx[j]] = 1;
    for (std::size_t j = 0; j < k; ++j) {
      (is_test[j] ? test.users[ui] : train.users[ui]).records.push_back(records[j]);
    }
  }
  // drop users that ended up with no test records from the test side
  std::erase_if(test.users, [](const UserTrace& u) { return u.records.empty(); });
  return {std::move(train), std::move(test)};
}

GeneratedTrace generate_trace(const MobilityModel& planted, int users, int days,
                              double calls_per_day, std::uint64_t rng_seed) {
  if (users <= 0 || days <= 0) fail("generate_trace: users and days must be > 0");
  if (!(calls_per_day > 0.0)) fail("generate_trace: calls_per_day must be > 0");
  if (planted.kind != ModelKind::home_antenna_time) {
    fail("generate_trace: planted model must be home_antenna_time");
  }
  const std::int32_t m = planted.antenna_count;
  RngEngine rng = make_engine(derive_seed(rng_seed, 0, "generate"));

  GeneratedTrace out;
  out.trace.antenna_count = m;
  out.trace.subpref_count = planted.subpref_count;
  out.trace.subpref_of_antenna = planted.subpref_of_antenna;
  out.trace.users.reserve(static_cast<std::size_t>(users));
  out.homes.reserve(static_cast<std::size_t>(users));

  const std::int64_t window = static_cast<std::int64_t>(days) * kSecondsPerDay;
  const double mean_calls = calls_per_day * days;
  char name[32];
  std::vector<std::int64_t> times;
  for (int u = 0; u < users; ++u) {
    std::snprintf(name, sizeof(name), "u%06d", u);
    const std::int32_t home = static_cast<std::int32_t>(uniform_below(rng, static_cast<std::uint64_t>(m))) + 1;

    std::poisson_distribution<int> n_calls_dist(mean_calls);
    const int n_calls = n_calls_dist(rng);
    times.clear();
    times.reserve(static_cast<std::size_t>(n_calls));
    for (int c = 0; c < n_calls; ++c) {
      times.push_back(static_cast<std::int64_t>(uniform_below(rng, static_cast<std::uint64_t>(window))));
    }
    std::sort(times.begin(), times.end());

    UserTrace ut;
    ut.user = name;
    ut.records.reserve(times.size());
    for (const std::int64_t t : times) {
      const std::int32_t antenna = sample_destination(planted, home, bucket_of_time(t), rng);
      ut.records.push_back(CallRecord{antenna, t});
    }
    out.trace.users.push_back(std::move(ut));
    out.homes.emplace_back(name, home);
  }
  return out;
}

void write_homes_csv(const std::string& path,
                     const std::vector<std::pair<std::string, std::int32_t>>& homes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("write_homes_csv: cannot open '" + path + "'");
  out << "user_id,antenna_id\n";
  for (const auto& [user, antenna] : homes) out << user << ',' << antenna << '\n';
}

}  // namespace epimob
