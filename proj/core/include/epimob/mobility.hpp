#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "epimob/rng.hpp"
#include "epimob/trace.hpp"

namespace epimob {

enum class ModelKind : std::int8_t {
  home_antenna_time = 0,  // p(x | home antenna, period, day type)
  subpref_time = 1,       // SPM: p(x | home sub-prefecture, period, day type)
  time_only = 2,          // TM: p(x | period, day type)
  markov = 3,             // MC: p(x | previous antenna)
};

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// One conditional categorical distribution over antennas, stored as explicit
/// probabilities on a sparse support plus a uniform tail over every antenna
/// outside the support. A Dirichlet-smoothed fit has
///   entry weight = (count + alpha) / (total + alpha * |A|),
///   tail        =          alpha  / (total + alpha * |A|),
/// so the vector is exact by construction and strictly positive when alpha > 0.
struct ContextDist {
  std::vector<std::pair<std::int32_t, double>> entries;  // sorted by antenna id
  double tail = 0.0;  // probability of each antenna not in entries

  double prob(std::int32_t antenna) const;
  double entry_mass() const;
  friend bool operator==(const ContextDist&, const ContextDist&) = default;
};

struct MobilityModel {
  ModelKind kind = ModelKind::home_antenna_time;
  double alpha = 0.0;  // 0 only for directly constructed (planted) tables
  std::int32_t antenna_count = 0;
  std::int32_t subpref_count = 0;
  std::vector<std::int32_t> subpref_of_antenna;  // required for subpref_time
  std::vector<ContextDist> contexts;

  std::size_t context_count() const { return contexts.size(); }
  /// Context of a (home antenna, time bucket) pair for the time-conditioned kinds.
  int context_index(std::int32_t home_antenna, TimeBucket bucket) const;
  /// Context of a previous antenna (markov kind).
  int markov_context(std::int32_t prev_antenna) const;
  friend bool operator==(const MobilityModel&, const MobilityModel&) = default;
};

/// Most visited antenna during night periods; ties break to the lowest id.
/// Users with no night records fall back to the most visited antenna overall.
struct HomeAssignment {
  std::unordered_map<std::string, std::int32_t> home_of;

  std::int32_t at(const std::string& user) const;  // throws on unknown user
};

HomeAssignment infer_homes(const Trace& train);

/// Dirichlet-smoothed fit: p(x | ctx) = (count(x, ctx) + alpha) / (total(ctx) + alpha |A|).
/// Unobserved contexts are uniform. For the markov kind the first record of
/// each user contributes no transition. alpha must be > 0.
MobilityModel fit(const Trace& train, const HomeAssignment& homes, ModelKind kind, double alpha);

/// Dense probability vector over antennas (index antenna-1) for one context.
std::vector<double> predict(const MobilityModel& model, int context_index);

/// Probability of one antenna under one context; O(log support).
double score(const MobilityModel& model, int context_index, std::int32_t antenna);

struct EvalReport {
  ModelKind kind = ModelKind::home_antenna_time;
  double avg_loglik = 0.0;  // mean natural-log likelihood per scored record
  std::int64_t n_test = 0;
};

/// Mean test log-likelihood. Homes must cover every test user (inferred on
/// training data). The markov kind conditions each test record on the user's
/// previous record in the merged train+test timeline and needs `train`;
/// each user's first-ever record is skipped.
EvalReport evaluate(const MobilityModel& model, const Trace& test, const HomeAssignment& homes,
                    const Trace* train = nullptr);

/// One draw from predict(model, (home, bucket)); model kind home_antenna_time.
std::int32_t sample_destination(const MobilityModel& model, std::int32_t home_antenna,
                                TimeBucket bucket, RngEngine& rng);

/// Alias-method sampler over every (home class, bucket) context of a
/// home_antenna_time model. Immutable after construction; one build serves
/// any number of concurrently running simulations.
class DestinationSampler {
 public:
  explicit DestinationSampler(const MobilityModel& model);

  std::int32_t antenna_count() const { return antenna_count_; }
  std::int32_t sample(std::int32_t home_antenna, TimeBucket bucket, RngEngine& rng) const {
    return sample_context((home_antenna - 1) * TimeBucket::kCount + bucket.index(), rng);
  }
  std::int32_t sample_context(int context_index, RngEngine& rng) const;

 private:
  struct ContextSampler {
    std::vector<std::int32_t> support;   // sorted antenna ids
    std::vector<double> accept;          // alias acceptance probabilities
    std::vector<std::int32_t> alias;
    double entry_mass = 1.0;             // P(draw lands in support)
  };
  std::int32_t antenna_count_ = 0;
  std::vector<ContextSampler> contexts_;
};

/// Lossless binary model file ("EPMOB1"). Doubles are stored bit-exact.
void save_model(const std::string& path, const MobilityModel& model);
MobilityModel load_model(const std::string& path);

/// Hub placement for planted models. per_subpref: each sub-prefecture has its
/// own hub antennas, the same for every bucket (commuting within the block).
/// global_per_bucket: every bucket has its own country-wide hub set, so the
/// time bucket carries most of the information a single location does not.
enum class HubScope : std::int8_t { per_subpref = 0, global_per_bucket = 1 };

/// Parameters of a synthetic "planted" country: antennas split into equal
/// contiguous sub-prefecture blocks, with hub antennas that attract daytime
/// trips. Distributions are home-concentrated and time-varying.
struct PlantedSpec {
  std::int32_t antennas = 50;
  std::int32_t subprefs = 5;  // must divide antennas
  double night_home_mass = 0.8;
  double day_home_mass = 0.3;
  double day_work_mass = 0.45;
  double weekend_home_mass = 0.6;
  double weekend_work_mass = 0.2;
  int hubs_per_subpref = 2;
  double leak_fraction = 0.2;  // share of the residual that leaves the home sub-prefecture
  HubScope hub_scope = HubScope::per_subpref;
};

MobilityModel make_planted_model(const PlantedSpec& spec);

/// Degenerate model: everyone stays at the home antenna, all buckets.
MobilityModel make_point_mass_model(std::int32_t antennas);

}  // namespace epimob
