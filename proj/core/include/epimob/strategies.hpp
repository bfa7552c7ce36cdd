#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "epimob/communities.hpp"
#include "epimob/rng.hpp"

namespace epimob {

enum class StrategyKind : std::int8_t { baseline = 0, cut_communities = 1, decrease_mix = 2, go_home = 3 };
enum class DecreaseMixScope : std::int8_t { per_class = 0, per_community = 1 };

std::string to_string(StrategyKind kind);
StrategyKind strategy_kind_from_string(const std::string& name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::baseline;
  double p = 0.0;          // compliance probability (cut_communities, go_home)
  double q = 1.0;          // mixing parameter (decrease_mix)
  double beta_home = -1.0; // go_home home contact probability; < 0 means "use g"
  bool gohome_inverted = false;  // sensitivity flag: trigger on the opposite inequality
  DecreaseMixScope scope = DecreaseMixScope::per_class;
  const CommunityAssignment* communities = nullptr;  // cut_communities, per_community scope
};

/// cut_communities and go_home with p == 0 are exact no-ops and collapse to
/// baseline; the inert paths must consume no randomness.
StrategyKind effective_kind(const StrategyConfig& cfg);

enum class TripOutcome : std::int8_t { proceed = 0, cancel = 1, redirect_home = 2 };

/// Phase-start snapshot of per-region aggregates, as seen by the service
/// operator when a trip is requested. Index 0 unused; regions are 1-based.
struct RegionView {
  std::span<const std::int64_t> infective;
  std::span<const std::int64_t> population;
};

/// Cancel with probability p when the trip crosses community boundaries and
/// either endpoint has at least one infective. Consumes randomness only when
/// the gate fires and p is in (0, 1).
TripOutcome cut_communities_decision(std::int32_t src, std::int32_t dst,
                                     const StrategyConfig& cfg, const RegionView& view,
                                     RngEngine& rng);

/// Redirect home with probability p when the destination's infective
/// proportion is lower than the source's (strict; empty regions count as 0).
TripOutcome gohome_decision(std::int32_t src, std::int32_t dst, const StrategyConfig& cfg,
                            const RegionView& view, RngEngine& rng);

/// Dispatch on the effective strategy kind; baseline and decrease_mix always proceed.
TripOutcome trip_decision(const StrategyConfig& cfg, std::int32_t src, std::int32_t dst,
                          std::int32_t home_region, const RegionView& view, RngEngine& rng);

struct BetaSplit {
  double own = 0.0;    // beta_{i,C}
  double other = 0.0;  // beta_{i,C-bar} = beta - beta_{i,C}, exact by construction
};

BetaSplit decreasemix_beta_split(double q, std::int64_t n_class, std::int64_t n_region, double beta);

/// lambda_{i,C} = beta_{i,C} I_{i,C}/N_{i,C} + beta_{i,C-bar} I_{i,C-bar}/N_{i,C-bar};
/// zero-denominator terms are 0. q == 1 reduces algebraically to random mixing
/// beta I_i/N_i and is returned in exactly that form.
double decreasemix_lambda(double beta, double q, std::int64_t n_class, std::int64_t i_class,
                          std::int64_t n_region, std::int64_t i_region);

struct GoHomeLambdas {
  double loc = 0.0;  // residents of the region
  double vis = 0.0;  // everyone else present
};

/// lambda_loc = beta_home I_i/N_i; lambda_vis = beta I_vis/N_i + beta_home I_loc/N_i.
GoHomeLambdas gohome_lambdas(double beta, double beta_home, std::int64_t i_loc,
                             std::int64_t i_vis, std::int64_t n_region);

/// Per-step trip accounting from one mobility phase. A proposed trip is a
/// destination draw that differs from the current region.
struct StepTrips {
  std::int64_t proposed = 0;
  std::int64_t canceled = 0;
  std::int64_t redirected = 0;

  std::int64_t affected() const { return canceled + redirected; }
  friend bool operator==(const StepTrips&, const StepTrips&) = default;
};

struct AffectedSummary {
  std::vector<double> per_step;  // (canceled+redirected)/proposed; 0 when nothing proposed
  double mean = 0.0;
  double max = 0.0;
  std::int64_t argmax_step = 0;
};

AffectedSummary affected_movements(std::span<const StepTrips> triplogs);

}  // namespace epimob
