#pragma once

// Shared fixtures and independent oracles for the test suites. Everything here
// is deliberately separate from the library implementation paths it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

#include "epimob/communities.hpp"
#include "epimob/epidemic.hpp"
#include "epimob/mobility.hpp"
#include "epimob/rng.hpp"

namespace epimob::testutil {

/// Deterministic SIR recursion (expected difference equations under random
/// mixing): S' = S - lambda S, I' = I + lambda S - g I, R' = R + g I.
struct SirPoint {
  double s, i, r;
};

inline std::vector<SirPoint> sir_recursion(double n, double i0, double beta, double g, int steps) {
  std::vector<SirPoint> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  SirPoint x{n - i0, i0, 0.0};
  out.push_back(x);
  for (int t = 0; t < steps; ++t) {
    const double lambda = beta * x.i / n;
    const double new_inf = lambda * x.s;
    const double new_rec = g * x.i;
    x = SirPoint{x.s - new_inf, x.i + new_inf - new_rec, x.r + new_rec};
    out.push_back(x);
  }
  return out;
}

/// Reference multinomial allocation by a chain of conditional binomials; an
/// independent route against the engine's per-draw alias sampling.
inline std::vector<std::int64_t> multinomial_conditional_binomial(RngEngine& rng, std::int64_t n,
                                                                  const std::vector<double>& p) {
  std::vector<std::int64_t> counts(p.size(), 0);
  double rest = std::accumulate(p.begin(), p.end(), 0.0);
  std::int64_t remaining = n;
  for (std::size_t k = 0; k + 1 < p.size() && remaining > 0; ++k) {
    const double prob = rest > 0.0 ? std::min(1.0, p[k] / rest) : 0.0;
    const std::int64_t draw = binomial_draw(rng, remaining, prob);
    counts[k] = draw;
    remaining -= draw;
    rest -= p[k];
  }
  if (!p.empty()) counts.back() += remaining;
  return counts;
}

/// All partitions of {0..n-1} as restricted growth strings; usable up to n ~ 10.
inline std::vector<std::vector<std::int32_t>> all_partitions(int n) {
  std::vector<std::vector<std::int32_t>> out;
  std::vector<std::int32_t> a(static_cast<std::size_t>(n), 0);
  for (;;) {
    out.push_back(a);
    int k = n - 1;
    for (; k > 0; --k) {
      std::int32_t max_prefix = 0;
      for (int j = 0; j < k; ++j) max_prefix = std::max(max_prefix, a[static_cast<std::size_t>(j)]);
      if (a[static_cast<std::size_t>(k)] <= max_prefix) break;
    }
    if (k == 0) return out;
    ++a[static_cast<std::size_t>(k)];
    for (int j = k + 1; j < n; ++j) a[static_cast<std::size_t>(j)] = 0;
  }
}

/// Exhaustive maximum-modularity partition for small graphs.
inline double brute_force_best_modularity(const MobilityGraph& graph) {
  double best = -1.0;
  for (const auto& partition : all_partitions(graph.node_count)) {
    CommunityAssignment assignment;
    assignment.community_of = partition;
    assignment.community_count = *std::max_element(partition.begin(), partition.end()) + 1;
    best = std::max(best, modularity(graph, assignment));
  }
  return best;
}

/// Adjusted Rand Index between two labelings.
inline double adjusted_rand_index(const std::vector<std::int32_t>& a,
                                  const std::vector<std::int32_t>& b) {
  const auto comb2 = [](double x) { return x * (x - 1.0) / 2.0; };
  std::map<std::pair<std::int32_t, std::int32_t>, std::int64_t> cells;
  std::map<std::int32_t, std::int64_t> row, col;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ++cells[{a[k], b[k]}];
    ++row[a[k]];
    ++col[b[k]];
  }
  double sum_cells = 0.0, sum_row = 0.0, sum_col = 0.0;
  for (const auto& [key, c] : cells) sum_cells += comb2(static_cast<double>(c));
  for (const auto& [key, c] : row) sum_row += comb2(static_cast<double>(c));
  for (const auto& [key, c] : col) sum_col += comb2(static_cast<double>(c));
  const double total = comb2(static_cast<double>(a.size()));
  const double expected = sum_row * sum_col / total;
  const double max_index = (sum_row + sum_col) / 2.0;
  if (max_index == expected) return 1.0;
  return (sum_cells - expected) / (max_index - expected);
}

/// 100-antenna synthetic country shared by strategy-effect tests.
struct Country {
  MobilityModel model;
  std::vector<std::int64_t> populations;
  PopulationSetup setup;
};

inline Country make_country(std::int32_t antennas, std::int32_t subprefs, std::int64_t per_antenna,
                            double mobile_fraction,
                            const std::vector<std::pair<std::int32_t, std::int64_t>>& seeds) {
  Country country;
  PlantedSpec spec;
  spec.antennas = antennas;
  spec.subprefs = subprefs;
  country.model = make_planted_model(spec);
  country.populations.assign(static_cast<std::size_t>(antennas), per_antenna);
  country.setup.region_population = country.populations;
  country.setup.mobile_fraction = mobile_fraction;
  country.setup.seed_infectives = seeds;
  return country;
}

}  // namespace epimob::testutil
