#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epimob/mobility.hpp"
#include "epimob/strategies.hpp"

namespace epimob {

enum class Weekday : std::int8_t { monday = 0, tuesday, wednesday, thursday, friday, saturday, sunday };

std::string to_string(Weekday day);
Weekday weekday_from_string(const std::string& name);

/// Bucket of simulation step n: three periods per day starting at `start` in
/// the morning; Saturday and Sunday are weekend.
TimeBucket bucket_for_step(std::int64_t step, Weekday start);

struct PopulationSetup {
  std::vector<std::int64_t> region_population;  // N*_i, index region-1; L == M classes
  double mobile_fraction = 0.55;
  std::vector<std::pair<std::int32_t, std::int64_t>> seed_infectives;  // (region, count)

  std::int64_t total_population() const;
};

struct EpidemicParams {
  double beta = 1.0;  // contact probability per step, (0, 1]
  double g = 0.5;     // recovery probability per step, (0, 1]
  std::int64_t steps = 400;
  int steps_per_day = 3;
  Weekday start_day = Weekday::monday;
};

/// Counts of one (region, class) group, split by compartment and mobility.
/// Immobile individuals exist only in their class's home region.
struct GroupCounts {
  std::int64_t s_mobile = 0, s_immobile = 0;
  std::int64_t i_mobile = 0, i_immobile = 0;
  std::int64_t r_mobile = 0, r_immobile = 0;

  std::int64_t s() const { return s_mobile + s_immobile; }
  std::int64_t i() const { return i_mobile + i_immobile; }
  std::int64_t r() const { return r_mobile + r_immobile; }
  std::int64_t total() const { return s() + i() + r(); }
  bool empty() const { return total() == 0; }
  friend bool operator==(const GroupCounts&, const GroupCounts&) = default;
};

/// Sparse per-class occupancy: class l (home antenna l) holds a region-sorted
/// list of non-empty groups. Class totals are invariant over time.
struct EpidemicState {
  std::int32_t region_count = 0;
  std::vector<std::vector<std::pair<std::int32_t, GroupCounts>>> classes;  // index class-1
  std::int64_t step = 0;

  struct Totals {
    std::int64_t s = 0, i = 0, r = 0;
    std::int64_t n() const { return s + i + r; }
  };
  Totals totals() const;
  Totals class_totals(std::int32_t cls) const;
  /// Fills per-region aggregates (1-based arrays of size region_count + 1).
  void region_aggregates(std::vector<std::int64_t>& n, std::vector<std::int64_t>& i) const;
  std::vector<std::int64_t> region_infective() const;  // index region-1
};

/// Everyone susceptible except the seed infectives; per region-class, mobile
/// count is floor(mobile_fraction * N*_i), the remainder immobile. Seeds are
/// taken from the seed region's local class, mobile individuals first.
EpidemicState init_state(const PopulationSetup& setup);

struct StepRow {
  std::int64_t s = 0, i = 0, r = 0;
  StepTrips trips;
  friend bool operator==(const StepRow&, const StepRow&) = default;
};

struct RunRecord {
  std::int64_t total_population = 0;
  int steps_per_day = 3;
  std::vector<StepRow> steps;  // steps[0] is the initial state
  std::vector<std::vector<std::int64_t>> region_infective;  // optional, parallel to steps
  std::vector<StepTrips> triplogs() const;
};

struct RunOptions {
  bool record_regions = false;
  bool validate = false;  // recheck conservation/immobility after every phase
};

/// Two-phase discrete-time engine. One instance owns scratch buffers and is
/// used by one run at a time; the model/sampler/params it references are
/// shared immutably across concurrent engines.
class SimulationEngine {
 public:
  SimulationEngine(const MobilityModel& model, const DestinationSampler& sampler,
                   const EpidemicParams& params, const StrategyConfig& strategy);

  /// Every mobile individual draws a destination from its class distribution;
  /// draws landing elsewhere are proposed trips routed through the strategy
  /// hook (cancel keeps the individual at the source, redirect sends it home).
  StepTrips mobility_phase(EpidemicState& state, TimeBucket bucket, RngEngine& rng);

  /// Per group: infections Binomial(S, lambda) and recoveries Binomial(I, g),
  /// with lambda fixed at phase start (an individual infected this step cannot
  /// recover this step). Empty regions contribute lambda = 0.
  void epidemic_phase(EpidemicState& state, RngEngine& rng);

  RunRecord run(const PopulationSetup& setup, std::uint64_t rng_seed, const RunOptions& options = {});

 private:
  double lambda_for_group(std::int32_t region, std::int32_t cls, const GroupCounts& counts) const;
  void snapshot_regions(const EpidemicState& state);

  const MobilityModel& model_;
  const DestinationSampler& sampler_;
  EpidemicParams params_;
  StrategyConfig strategy_;
  StrategyKind active_kind_;
  double beta_home_ = 0.0;

  // scratch, 1-based by region
  std::vector<std::int64_t> region_n_, region_i_, region_i_loc_;
  std::vector<std::int64_t> dest_s_, dest_i_, dest_r_;
  std::vector<std::int32_t> touched_;
  std::vector<char> touched_flag_;
  // decrease_mix per_community scope: per (region, community) totals
  std::vector<std::int64_t> comm_n_, comm_i_;
  std::vector<std::int32_t> mix_group_of_class_;
  std::int32_t mix_group_count_ = 0;
};

/// Convenience single-run entry point.
RunRecord run_simulation(const PopulationSetup& setup, const MobilityModel& model,
                         const DestinationSampler& sampler, const EpidemicParams& params,
                         const StrategyConfig& strategy, std::uint64_t rng_seed,
                         const RunOptions& options = {});

/// Population CSV: header `antenna_id,population`; must cover 1..M exactly once.
std::vector<std::int64_t> read_population_csv(const std::string& path);
void write_population_csv(const std::string& path, const std::vector<std::int64_t>& populations);

/// Throws if conservation, class-total, or immobility invariants are violated.
void validate_state(const EpidemicState& state,
                    const std::vector<std::int64_t>& expected_class_totals);

}  // namespace epimob
