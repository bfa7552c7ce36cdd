#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epimob/epidemic.hpp"
#include "epimob/mobility.hpp"
#include "epimob/strategies.hpp"

namespace epimob {

/// One cell of a strategy comparison: a strategy kind plus its parameter.
struct CompareCell {
  StrategyKind kind = StrategyKind::baseline;
  double p = 0.0;
  double q = 1.0;
  std::string label() const;
  friend bool operator==(const CompareCell&, const CompareCell&) = default;
};

/// Declarative scenario description, loaded from a flat `key = value` file
/// (the README documents the schema). Defaults mirror the reference scenario:
/// beta 1, g 0.5, 55% mobile, 3 steps/day, 23 seed infectives in 5 antennas.
struct ScenarioConfig {
  int version = 1;

  // inputs (paths resolved relative to the config file at load)
  std::string population_path;
  std::string model_path;   // either a saved model ...
  std::string trace_path;   // ... or a trace to fit
  std::string subpref_map_path;
  int observation_days = 0;  // 0: derive from the trace span
  double alpha = 0.5;
  ModelKind model_kind = ModelKind::home_antenna_time;

  // epidemic
  double beta = 1.0;
  double g = 0.5;
  std::int64_t steps = 400;
  int steps_per_day = 3;
  double mobile_fraction = 0.55;
  Weekday start_day = Weekday::monday;
  std::vector<std::pair<std::int32_t, std::int64_t>> seed_infectives = {
      {57, 5}, {146, 5}, {330, 5}, {836, 4}, {926, 4}};

  // strategy
  StrategyKind strategy = StrategyKind::baseline;
  double p = 0.0;
  double q = 1.0;
  double beta_home = -1.0;  // < 0: default to g
  DecreaseMixScope decreasemix_scope = DecreaseMixScope::per_class;
  bool gohome_inverted = false;

  // communities
  double graph_epsilon = 1e-6;
  std::uint64_t louvain_seed = 1;
  double resolution = 1.0;
  bool export_communities = false;

  // execution
  int ensemble = 1;
  int workers = 1;
  std::uint64_t master_seed = 1;
  std::string output_dir = "out";
  bool record_regions = false;
  bool write_region_csv = false;

  std::vector<CompareCell> compare_cells;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Parses and fully validates a config file; every violation is reported with
/// its key. Referenced input files must exist.
ScenarioConfig load_config(const std::string& path);
ScenarioConfig load_config_text(const std::string& text, const std::string& base_dir);

/// Canonical re-emission; load(emit(cfg)) == cfg.
std::string emit_config(const ScenarioConfig& cfg);

std::vector<CompareCell> parse_compare_cells(const std::string& text);

}  // namespace epimob
