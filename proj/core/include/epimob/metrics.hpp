#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "epimob/epidemic.hpp"
#include "epimob/strategies.hpp"

namespace epimob {

struct RunMetrics {
  double i_star = 0.0;       // max_n I(n)/N
  std::int64_t t_star = 0;   // argmax_n I(n), earliest on ties
  double t_star_day = 0.0;   // t_star / steps_per_day
  double q_star = 0.0;       // R(horizon)/N
  bool q_truncated = false;  // I(horizon) > 0: the limit was not reached
  double affected_mean = 0.0;
  double affected_max = 0.0;
};

RunMetrics compute_metrics(const RunRecord& record);

struct TrajectoryRow {
  double s = 0.0, i = 0.0, r = 0.0;
  double proposed = 0.0, affected = 0.0;
};

struct EnsembleMetrics {
  std::vector<RunMetrics> per_run;
  RunMetrics mean;
  RunMetrics stddev;  // sample standard deviation; 0 for a single run
  std::vector<TrajectoryRow> mean_trajectory;
  std::int64_t total_population = 0;
};

/// Mean and sample std of each metric plus the mean trajectory. All records
/// must share one horizon. Checks the max-of-means <= mean-of-maxes sanity
/// inequality on the infective series and throws if it fails.
EnsembleMetrics ensemble_metrics(std::span<const RunRecord> records);

}  // namespace epimob
