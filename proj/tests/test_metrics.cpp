#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "epimob/metrics.hpp"
#include "testutil.hpp"

using namespace epimob;
using namespace epimob::testutil;

namespace {

RunRecord record_from_series(std::int64_t n, const std::vector<std::int64_t>& infective,
                             std::int64_t recovered_last = -1) {
  RunRecord record;
  record.total_population = n;
  record.steps_per_day = 3;
  std::int64_t r = 0;
  for (std::size_t k = 0; k < infective.size(); ++k) {
    if (k + 1 == infective.size() && recovered_last >= 0) r = recovered_last;
    record.steps.push_back(StepRow{n - infective[k] - r, infective[k], r, StepTrips{}});
  }
  return record;
}

}  // namespace

TEST_CASE("compute_metrics direct inspection") {
  const RunRecord record = record_from_series(10, {1, 3, 2}, 4);
  const RunMetrics m = compute_metrics(record);
  CHECK(m.i_star == doctest::Approx(0.3));
  CHECK(m.t_star == 1);
  CHECK(m.t_star_day == doctest::Approx(1.0 / 3.0));
  CHECK(m.q_star == doctest::Approx(0.4));
  CHECK(m.q_truncated);  // I(horizon) = 2 > 0
}

TEST_CASE("compute_metrics exact q_star when absorbed") {
  const RunRecord record = record_from_series(10, {1, 3, 0}, 4);
  const RunMetrics m = compute_metrics(record);
  CHECK_FALSE(m.q_truncated);
  CHECK(m.q_star == doctest::Approx(0.4));
}

TEST_CASE("compute_metrics breaks argmax ties to the earliest step") {
  const RunRecord record = record_from_series(10, {5, 5, 5});
  CHECK(compute_metrics(record).t_star == 0);
}

TEST_CASE("compute_metrics invariant under post-absorption padding") {
  const RunRecord record = record_from_series(100, {2, 8, 4, 0}, 14);
  RunRecord padded = record;
  for (int k = 0; k < 5; ++k) padded.steps.push_back(padded.steps.back());
  const RunMetrics a = compute_metrics(record);
  const RunMetrics b = compute_metrics(padded);
  CHECK(a.i_star == b.i_star);
  CHECK(a.t_star == b.t_star);
  CHECK(a.q_star == b.q_star);
  CHECK(a.q_truncated == b.q_truncated);
}

TEST_CASE("compute_metrics rejects empty records") {
  RunRecord empty;
  empty.total_population = 10;
  CHECK_THROWS_AS(compute_metrics(empty), std::runtime_error);
}

TEST_CASE("ensemble of identical runs has zero spread") {
  const RunRecord record = record_from_series(50, {1, 4, 9, 3}, 12);
  const std::vector<RunRecord> records(10, record);
  const EnsembleMetrics ensemble = ensemble_metrics(records);
  CHECK(ensemble.stddev.i_star == 0.0);
  CHECK(ensemble.stddev.q_star == 0.0);
  CHECK(ensemble.mean.i_star == doctest::Approx(compute_metrics(record).i_star));
  CHECK(ensemble.mean.t_star == compute_metrics(record).t_star);
}

TEST_CASE("ensemble mean of t_star is the arithmetic mean") {
  std::vector<std::int64_t> early(25, 0), late(25, 0);
  early[10] = 5;
  late[20] = 5;
  const std::vector<RunRecord> records = {record_from_series(50, early),
                                          record_from_series(50, late)};
  const EnsembleMetrics ensemble = ensemble_metrics(records);
  CHECK(ensemble.mean.t_star == 15);
  CHECK(ensemble.mean.t_star_day == doctest::Approx(5.0));
}

TEST_CASE("ensemble rejects mixed horizons") {
  const std::vector<RunRecord> records = {record_from_series(10, {1, 2, 3}),
                                          record_from_series(10, {1, 2})};
  CHECK_THROWS_AS(ensemble_metrics(records), std::runtime_error);
}

TEST_CASE("mean of maxima dominates the mean-trajectory peak on real ensembles") {
  const Country country = make_country(16, 4, 400, 0.55, {{3, 4}});
  const DestinationSampler sampler(country.model);
  EpidemicParams params;
  params.steps = 60;
  std::vector<RunRecord> records;
  SimulationEngine engine(country.model, sampler, params, StrategyConfig{});
  for (std::uint64_t r = 0; r < 8; ++r) {
    records.push_back(engine.run(country.setup, derive_seed(3, r, "ens")));
  }
  const EnsembleMetrics ensemble = ensemble_metrics(records);  // throws if the inequality fails
  double traj_peak = 0.0;
  for (const auto& row : ensemble.mean_trajectory) traj_peak = std::max(traj_peak, row.i);
  CHECK(ensemble.mean.i_star + 1e-12 >=
        traj_peak / static_cast<double>(ensemble.total_population));
}
