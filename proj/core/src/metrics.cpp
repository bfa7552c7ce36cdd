#include "epimob/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "text_util.hpp"

namespace epimob {

using detail::fail;

RunMetrics compute_metrics(const RunRecord& record) {
  if (record.steps.empty()) fail("compute_metrics: empty run record");
  if (record.total_population <= 0) fail("compute_metrics: total population must be > 0");
  RunMetrics m;
  std::int64_t peak = -1;
  for (std::size_t n = 0; n < record.steps.size(); ++n) {
    if (record.steps[n].i > peak) {  // strict: ties keep the earliest step
      peak = record.steps[n].i;
      m.t_star = static_cast<std::int64_t>(n);
    }
  }
  const double pop = static_cast<double>(record.total_population);
  m.i_star = static_cast<double>(peak) / pop;
  m.t_star_day = static_cast<double>(m.t_star) / record.steps_per_day;
  m.q_star = static_cast<double>(record.steps.back().r) / pop;
  m.q_truncated = record.steps.back().i > 0;

  const auto logs = record.triplogs();
  const AffectedSummary affected = affected_movements(logs);
  m.affected_mean = affected.mean;
  m.affected_max = affected.max;
  return m;
}

EnsembleMetrics ensemble_metrics(std::span<const RunRecord> records) {
  if (records.empty()) fail("ensemble_metrics: no runs");
  const std::size_t horizon = records.front().steps.size();
  const std::int64_t pop = records.front().total_population;
  for (const auto& rec : records) {
    if (rec.steps.size() != horizon) fail("ensemble_metrics: runs have mixed horizons");
    if (rec.total_population != pop) fail("ensemble_metrics: runs have mixed populations");
  }

  EnsembleMetrics out;
  out.total_population = pop;
  out.per_run.reserve(records.size());
  for (const auto& rec : records) out.per_run.push_back(compute_metrics(rec));

  const double n_runs = static_cast<double>(records.size());
  const auto mean_std = [&](auto getter, double& mean, double& stddev) {
    double sum = 0.0;
    bool identical = true;
    for (const auto& m : out.per_run) {
      sum += getter(m);
      identical = identical && getter(m) == getter(out.per_run.front());
    }
    if (identical) {  // degenerate ensemble: exactly the single-run value, zero spread
      mean = getter(out.per_run.front());
      stddev = 0.0;
      return;
    }
    mean = sum / n_runs;
    if (records.size() < 2) {
      stddev = 0.0;
      return;
    }
    double ss = 0.0;
    for (const auto& m : out.per_run) {
      const double d = getter(m) - mean;
      ss += d * d;
    }
    stddev = std::sqrt(ss / (n_runs - 1.0));
  };
  double t_mean = 0.0, t_std = 0.0;
  mean_std([](const RunMetrics& m) { return m.i_star; }, out.mean.i_star, out.stddev.i_star);
  mean_std([](const RunMetrics& m) { return static_cast<double>(m.t_star); }, t_mean, t_std);
  mean_std([](const RunMetrics& m) { return m.t_star_day; }, out.mean.t_star_day, out.stddev.t_star_day);
  mean_std([](const RunMetrics& m) { return m.q_star; }, out.mean.q_star, out.stddev.q_star);
  mean_std([](const RunMetrics& m) { return m.affected_mean; }, out.mean.affected_mean,
           out.stddev.affected_mean);
  mean_std([](const RunMetrics& m) { return m.affected_max; }, out.mean.affected_max,
           out.stddev.affected_max);
  out.mean.t_star = static_cast<std::int64_t>(std::llround(t_mean));
  out.stddev.t_star = static_cast<std::int64_t>(std::llround(t_std));
  bool any_truncated = false;
  for (const auto& m : out.per_run) any_truncated = any_truncated || m.q_truncated;
  out.mean.q_truncated = any_truncated;

  out.mean_trajectory.assign(horizon, TrajectoryRow{});
  for (const auto& rec : records) {
    for (std::size_t n = 0; n < horizon; ++n) {
      out.mean_trajectory[n].s += static_cast<double>(rec.steps[n].s) / n_runs;
      out.mean_trajectory[n].i += static_cast<double>(rec.steps[n].i) / n_runs;
      out.mean_trajectory[n].r += static_cast<double>(rec.steps[n].r) / n_runs;
      out.mean_trajectory[n].proposed += static_cast<double>(rec.steps[n].trips.proposed) / n_runs;
      out.mean_trajectory[n].affected += static_cast<double>(rec.steps[n].trips.affected()) / n_runs;
    }
  }

  // max of means <= mean of maxes, always; a violation means broken accounting
  double traj_peak = 0.0;
  for (const auto& row : out.mean_trajectory) traj_peak = std::max(traj_peak, row.i);
  if (traj_peak / static_cast<double>(pop) > out.mean.i_star + 1e-9) {
    fail("ensemble_metrics: mean-trajectory peak exceeds mean of per-run peaks");
  }
  return out;
}

}  // namespace epimob
