#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epimob/config.hpp"
#include "epimob/metrics.hpp"

namespace epimob {

/// Record of one completed scenario: enough to reproduce every output byte
/// for byte on the same build. Serialized as JSON next to the outputs.
struct RunManifest {
  std::string version;
  std::string config_text;  // resolved config echo
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> run_seeds;
  std::vector<std::pair<std::string, std::uint64_t>> outputs;  // relative path, fnv1a64 of bytes
  double total_ms = 0.0;
  std::vector<std::pair<std::string, double>> stage_ms;
};

void write_manifest(const std::string& path, const RunManifest& manifest);
RunManifest read_manifest(const std::string& path);

/// Scenario config embedded in a manifest, ready to rerun.
ScenarioConfig config_from_manifest(const std::string& manifest_path);

/// Full pipeline: inputs -> model -> (communities) -> ensemble -> metrics ->
/// files. Any stage failure is rethrown tagged with the stage name. Run r uses
/// the seed derive_seed(master_seed, r, "simulate").
RunManifest run_scenario(const ScenarioConfig& cfg);

struct CellSummary {
  CompareCell cell;
  EnsembleMetrics metrics;
};

/// Matched-seed comparison across strategy cells sharing the scenario's
/// population/model/communities: run r of every cell starts from the same
/// derived seed, so differences isolate the strategy effect.
std::vector<CellSummary> compare_strategies(const ScenarioConfig& cfg, RunManifest* manifest = nullptr);

std::uint64_t fnv1a64_file(const std::string& path);

}  // namespace epimob
