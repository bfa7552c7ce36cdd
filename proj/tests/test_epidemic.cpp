#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "epimob/epidemic.hpp"
#include "epimob/metrics.hpp"
#include "testutil.hpp"

using namespace epimob;
using namespace epimob::testutil;

namespace {

EpidemicParams params_with(double beta, double g, std::int64_t steps) {
  EpidemicParams params;
  params.beta = beta;
  params.g = g;
  params.steps = steps;
  return params;
}

}  // namespace

TEST_CASE("bucket_for_step cycles periods and weekdays") {
  CHECK(bucket_for_step(0, Weekday::monday) == TimeBucket{DayPeriod::morning, DayType::weekday});
  CHECK(bucket_for_step(1, Weekday::monday) == TimeBucket{DayPeriod::afternoon, DayType::weekday});
  CHECK(bucket_for_step(2, Weekday::monday) == TimeBucket{DayPeriod::night, DayType::weekday});
  CHECK(bucket_for_step(3, Weekday::monday) == TimeBucket{DayPeriod::morning, DayType::weekday});
  // Monday start: steps 15..20 fall on Saturday and Sunday
  CHECK(bucket_for_step(14, Weekday::monday).daytype == DayType::weekday);
  CHECK(bucket_for_step(15, Weekday::monday).daytype == DayType::weekend);
  CHECK(bucket_for_step(20, Weekday::monday).daytype == DayType::weekend);
  CHECK(bucket_for_step(21, Weekday::monday).daytype == DayType::weekday);
  // Sunday start: weekend immediately
  CHECK(bucket_for_step(0, Weekday::sunday).daytype == DayType::weekend);
  CHECK(bucket_for_step(3, Weekday::sunday).daytype == DayType::weekday);
}

TEST_CASE("init_state seeds the reference scenario") {
  PopulationSetup setup;
  setup.region_population.assign(1231, 800);
  setup.mobile_fraction = 0.55;
  setup.seed_infectives = {{57, 5}, {146, 5}, {330, 5}, {836, 4}, {926, 4}};
  const EpidemicState state = init_state(setup);
  const auto totals = state.totals();
  CHECK(totals.i == 23);
  CHECK(totals.s == 1231 * 800 - 23);
  CHECK(totals.r == 0);
  CHECK(totals.n() == 1231 * 800);
  // seeds land in the mobile sub-population of the local class
  const auto& group = state.classes[56].front();
  CHECK(group.first == 57);
  CHECK(group.second.i_mobile == 5);
  CHECK(group.second.i_immobile == 0);
}

TEST_CASE("init_state boundary cases") {
  PopulationSetup setup;
  setup.region_population = {100, 50};
  setup.mobile_fraction = 0.0;
  const EpidemicState state = init_state(setup);
  for (const auto& groups : state.classes) {
    for (const auto& [region, counts] : groups) {
      CHECK(counts.s_mobile == 0);
      CHECK(counts.s_immobile > 0);
    }
  }

  PopulationSetup bad = setup;
  bad.region_population = {100, 0};
  bad.seed_infectives = {{2, 1}};
  CHECK_THROWS_WITH_AS(init_state(bad), doctest::Contains("zero population"), std::runtime_error);

  PopulationSetup overful = setup;
  overful.seed_infectives = {{2, 51}};
  CHECK_THROWS_AS(init_state(overful), std::runtime_error);

  // floor rounding: 0.55 * 9 = 4.95 -> 4 mobile, 5 immobile
  PopulationSetup fractional;
  fractional.region_population = {9};
  fractional.mobile_fraction = 0.55;
  const EpidemicState tiny = init_state(fractional);
  CHECK(tiny.classes[0].front().second.s_mobile == 4);
  CHECK(tiny.classes[0].front().second.s_immobile == 5);
}

TEST_CASE("mobility_phase with point-mass model sends everyone home") {
  const MobilityModel model = make_point_mass_model(3);
  const DestinationSampler sampler(model);
  // class 1: 40 mobile at region 2, 10 mobile + 5 immobile at home region 1
  EpidemicState state;
  state.region_count = 3;
  state.classes.resize(3);
  GroupCounts at_home;
  at_home.s_mobile = 10;
  at_home.s_immobile = 5;
  GroupCounts away;
  away.s_mobile = 30;
  away.i_mobile = 10;
  state.classes[0] = {{1, at_home}, {2, away}};

  SimulationEngine engine(model, sampler, params_with(1.0, 0.5, 1), StrategyConfig{});
  RngEngine rng = make_engine(1);
  const StepTrips trips = engine.mobility_phase(state, TimeBucket{}, rng);
  CHECK(trips.proposed == 40);  // everyone away from home proposes the trip home
  CHECK(trips.canceled == 0);
  CHECK(trips.redirected == 0);
  REQUIRE(state.classes[0].size() == 1);
  CHECK(state.classes[0].front().first == 1);
  CHECK(state.classes[0].front().second.s_mobile == 40);
  CHECK(state.classes[0].front().second.s_immobile == 5);
  CHECK(state.classes[0].front().second.i_mobile == 10);
}

TEST_CASE("mobility_phase preserves class totals") {
  PlantedSpec spec;
  spec.antennas = 10;
  spec.subprefs = 2;
  const MobilityModel model = make_planted_model(spec);
  const DestinationSampler sampler(model);
  PopulationSetup setup;
  setup.region_population.assign(10, 500);
  setup.seed_infectives = {{1, 5}};
  EpidemicState state = init_state(setup);
  std::vector<std::int64_t> before;
  for (std::int32_t c = 1; c <= 10; ++c) before.push_back(state.class_totals(c).n());

  SimulationEngine engine(model, sampler, params_with(1.0, 0.5, 1), StrategyConfig{});
  RngEngine rng = make_engine(3);
  for (int step = 0; step < 5; ++step) {
    engine.mobility_phase(state, bucket_for_step(step, Weekday::monday), rng);
    validate_state(state, before);
  }
}

TEST_CASE("mobility allocation matches conditional-binomial reference in distribution") {
  // one class, three destinations (stay 0.5, go 0.3, go 0.2), 1e4 mobile
  MobilityModel model;
  model.kind = ModelKind::home_antenna_time;
  model.antenna_count = 3;
  model.contexts.resize(3 * TimeBucket::kCount);
  for (auto& ctx : model.contexts) ctx = ContextDist{{{1, 0.5}, {2, 0.3}, {3, 0.2}}, 0.0};
  const DestinationSampler sampler(model);
  const std::vector<double> p = {0.5, 0.3, 0.2};
  const std::int64_t group = 10000;

  // engine allocation, averaged over repetitions
  const int reps = 100;
  std::vector<double> engine_mean(3, 0.0);
  SimulationEngine engine(model, sampler, params_with(1.0, 0.5, 1), StrategyConfig{});
  RngEngine rng = make_engine(7);
  for (int rep = 0; rep < reps; ++rep) {
    EpidemicState state;
    state.region_count = 3;
    state.classes.resize(3);
    GroupCounts counts;
    counts.s_mobile = group;
    state.classes[0] = {{1, counts}};
    engine.mobility_phase(state, TimeBucket{}, rng);
    for (const auto& [region, after] : state.classes[0]) {
      engine_mean[static_cast<std::size_t>(region - 1)] +=
          static_cast<double>(after.s_mobile) / reps;
    }
  }
  // reference allocation via an independent conditional-binomial chain
  std::vector<double> reference_mean(3, 0.0);
  RngEngine ref_rng = make_engine(8);
  for (int rep = 0; rep < reps; ++rep) {
    const auto counts = multinomial_conditional_binomial(ref_rng, group, p);
    for (int k = 0; k < 3; ++k) reference_mean[static_cast<std::size_t>(k)] += static_cast<double>(counts[static_cast<std::size_t>(k)]) / reps;
  }
  // both must sit within 3 sigma of the exact multinomial mean
  for (int k = 0; k < 3; ++k) {
    const double mean = static_cast<double>(group) * p[static_cast<std::size_t>(k)];
    const double sigma = std::sqrt(mean * (1.0 - p[static_cast<std::size_t>(k)]) / reps);
    CHECK(std::abs(engine_mean[static_cast<std::size_t>(k)] - mean) <= 3.0 * sigma);
    CHECK(std::abs(reference_mean[static_cast<std::size_t>(k)] - mean) <= 3.0 * sigma);
  }
}

TEST_CASE("epidemic_phase with no infectives changes nothing but recoveries") {
  const MobilityModel model = make_point_mass_model(4);
  const DestinationSampler sampler(model);
  PopulationSetup setup;
  setup.region_population.assign(4, 1000);
  EpidemicState state = init_state(setup);
  SimulationEngine engine(model, sampler, params_with(1.0, 0.5, 1), StrategyConfig{});
  RngEngine rng = make_engine(5);
  const auto before = state.totals();
  engine.epidemic_phase(state, rng);
  const auto after = state.totals();
  CHECK(after.s == before.s);
  CHECK(after.i == 0);
  CHECK(after.r == 0);
}

TEST_CASE("epidemic_phase binomial expectation") {
  // S = 1000, I = 100, N = 1100, beta = 1: E[new infections] = 1000 * 100/1100
  const MobilityModel model = make_point_mass_model(1);
  const DestinationSampler sampler(model);
  SimulationEngine engine(model, sampler, params_with(1.0, 0.5, 1), StrategyConfig{});
  RngEngine rng = make_engine(11);
  const int reps = 10000;
  double total_new = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    EpidemicState state;
    state.region_count = 1;
    state.classes.resize(1);
    GroupCounts counts;
    counts.s_mobile = 1000;
    counts.i_mobile = 100;
    state.classes[0] = {{1, counts}};
    const std::int64_t s_before = state.totals().s;
    engine.epidemic_phase(state, rng);
    total_new += static_cast<double>(s_before - state.totals().s);
  }
  const double expected = 1000.0 * 100.0 / 1100.0;
  CHECK(std::abs(total_new / reps - expected) / expected < 0.01);
}

TEST_CASE("epidemic_phase g = 1 recovers every infective") {
  const MobilityModel model = make_point_mass_model(2);
  const DestinationSampler sampler(model);
  SimulationEngine engine(model, sampler, params_with(0.5, 1.0, 1), StrategyConfig{});
  EpidemicState state;
  state.region_count = 2;
  state.classes.resize(2);
  GroupCounts counts;
  counts.i_mobile = 40;
  counts.i_immobile = 10;
  state.classes[1] = {{2, counts}};
  RngEngine rng = make_engine(13);
  engine.epidemic_phase(state, rng);
  CHECK(state.totals().i == 0);
  CHECK(state.totals().r == 50);
}

TEST_CASE("run with zero steps returns only the initial state") {
  PlantedSpec spec;
  spec.antennas = 10;
  spec.subprefs = 2;
  const MobilityModel model = make_planted_model(spec);
  const DestinationSampler sampler(model);
  PopulationSetup setup;
  setup.region_population.assign(10, 100);
  setup.seed_infectives = {{3, 2}};
  const RunRecord record =
      run_simulation(setup, model, sampler, params_with(1.0, 0.5, 0), StrategyConfig{}, 1);
  REQUIRE(record.steps.size() == 1);
  CHECK(record.steps[0].i == 2);
  CHECK(record.total_population == 1000);
}

TEST_CASE("run is deterministic per seed") {
  PlantedSpec spec;
  spec.antennas = 12;
  spec.subprefs = 3;
  const MobilityModel model = make_planted_model(spec);
  const DestinationSampler sampler(model);
  PopulationSetup setup;
  setup.region_population.assign(12, 400);
  setup.seed_infectives = {{1, 3}};
  RunOptions options;
  options.record_regions = true;
  const EpidemicParams params = params_with(1.0, 0.5, 40);
  const RunRecord a = run_simulation(setup, model, sampler, params, StrategyConfig{}, 77, options);
  const RunRecord b = run_simulation(setup, model, sampler, params, StrategyConfig{}, 77, options);
  CHECK(a.steps == b.steps);
  CHECK(a.region_infective == b.region_infective);
  const RunRecord c = run_simulation(setup, model, sampler, params, StrategyConfig{}, 78, options);
  CHECK(a.steps != c.steps);
}

TEST_CASE("run conserves population and keeps R monotone") {
  PlantedSpec spec;
  spec.antennas = 15;
  spec.subprefs = 3;
  const MobilityModel model = make_planted_model(spec);
  const DestinationSampler sampler(model);
  PopulationSetup setup;
  setup.region_population.assign(15, 300);
  setup.seed_infectives = {{5, 5}};
  RunOptions options;
  options.validate = true;  // class totals and immobility rechecked every phase
  const RunRecord record =
      run_simulation(setup, model, sampler, params_with(1.0, 0.5, 80), StrategyConfig{}, 9, options);
  const std::int64_t n = record.total_population;
  for (std::size_t k = 0; k < record.steps.size(); ++k) {
    CHECK(record.steps[k].s + record.steps[k].i + record.steps[k].r == n);
    if (k > 0) {
      CHECK(record.steps[k].r >= record.steps[k - 1].r);
      CHECK(record.steps[k].s <= record.steps[k - 1].s);
    }
  }
}

TEST_CASE("absorbing state: aggregates constant once infectives vanish") {
  PlantedSpec spec;
  spec.antennas = 8;
  spec.subprefs = 2;
  const MobilityModel model = make_planted_model(spec);
  const DestinationSampler sampler(model);
  PopulationSetup setup;
  setup.region_population.assign(8, 200);
  setup.seed_infectives = {{1, 4}};
  const RunRecord record =
      run_simulation(setup, model, sampler, params_with(0.9, 0.9, 120), StrategyConfig{}, 2);
  bool absorbed = false;
  for (std::size_t k = 1; k < record.steps.size(); ++k) {
    if (absorbed) {
      CHECK(record.steps[k].s == record.steps[k - 1].s);
      CHECK(record.steps[k].i == 0);
      CHECK(record.steps[k].r == record.steps[k - 1].r);
    }
    if (record.steps[k].i == 0) absorbed = true;
  }
  CHECK(absorbed);  // g = 0.9 burns out quickly on this small country
}

TEST_CASE("mean-field oracle at reduced scale") {
  // single region, no mobility: the ensemble mean tracks the deterministic
  // SIR recursion (full-scale version lives in the acceptance suite)
  const MobilityModel model = make_point_mass_model(1);
  const DestinationSampler sampler(model);
  PopulationSetup setup;
  setup.region_population = {10000};
  setup.mobile_fraction = 0.0;
  setup.seed_infectives = {{1, 10}};
  const EpidemicParams params = params_with(1.0, 0.5, 60);

  const int runs = 200;
  std::vector<double> mean_i(61, 0.0);
  double mean_q = 0.0;
  SimulationEngine engine(model, sampler, params, StrategyConfig{});
  for (int r = 0; r < runs; ++r) {
    const RunRecord record = engine.run(setup, derive_seed(400, static_cast<std::uint64_t>(r), "mf"));
    for (std::size_t k = 0; k < record.steps.size(); ++k) {
      mean_i[k] += static_cast<double>(record.steps[k].i) / runs;
    }
    mean_q += static_cast<double>(record.steps.back().r) / (10000.0 * runs);
  }
  const auto recursion = sir_recursion(10000.0, 10.0, 1.0, 0.5, 60);
  double peak_sim = 0.0, peak_ref = 0.0;
  for (std::size_t k = 0; k < recursion.size(); ++k) {
    peak_sim = std::max(peak_sim, mean_i[k]);
    peak_ref = std::max(peak_ref, recursion[k].i);
  }
  CHECK(std::abs(peak_sim - peak_ref) / peak_ref < 0.05);
  CHECK(std::abs(mean_q - recursion.back().r / 10000.0) < 0.02);
}

TEST_CASE("population csv round-trip and validation") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "epimob_population.csv").string();
  write_population_csv(path, {100, 200, 300});
  CHECK(read_population_csv(path) == std::vector<std::int64_t>{100, 200, 300});

  std::ofstream out(path, std::ios::binary);
  out << "antenna_id,population\n1,100\n3,50\n";
  out.close();
  CHECK_THROWS_AS(read_population_csv(path), std::runtime_error);
  fs::remove(path);
}
