#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "epimob/mobility.hpp"

namespace epimob {

/// Weighted undirected antenna graph. Nodes are 0-based (antenna id - 1);
/// no self-loops; adjacency is symmetric by construction.
struct MobilityGraph {
  std::int32_t node_count = 0;
  std::vector<std::vector<std::pair<std::int32_t, double>>> adj;

  void add_edge(std::int32_t a, std::int32_t b, double weight);
  std::int64_t edge_count() const;
  double total_weight() const;  // sum over undirected edges
};

/// Expected trips per day between antenna pairs under the fitted model:
/// individuals of class h (population populations[h-1]) draw a destination
/// from p(. | h, bucket) each step; a draw j != h is a trip h -> j. Flows are
/// averaged over buckets (weekday/weekend calendar frequencies), summed over
/// both directions, scaled by steps_per_day, and thresholded at epsilon.
MobilityGraph build_graph(const MobilityModel& model, const std::vector<std::int64_t>& populations,
                          int steps_per_day, double epsilon = 1e-6);

struct CommunityAssignment {
  std::vector<std::int32_t> community_of;  // node index -> community id (contiguous from 0)
  std::int32_t community_count = 0;
};

/// Weighted Newman modularity Q = sum_c [ in_c/2m - (tot_c/2m)^2 ].
/// Throws on a graph with zero total weight.
double modularity(const MobilityGraph& graph, const CommunityAssignment& assignment);

struct LouvainResult {
  CommunityAssignment assignment;
  double modularity = 0.0;
  std::vector<double> level_modularity;  // after each aggregation level; non-decreasing
};

/// Two-phase Louvain: seeded-shuffle local moves to a single-move optimum,
/// community aggregation, repeat until modularity stops increasing, with a
/// finest-level refinement sweep between rounds. `restarts` runs the whole
/// procedure from independent shuffle orders (derived from the seed) and keeps
/// the highest-modularity result; the output stays deterministic per seed.
/// Isolated nodes end up as singleton communities. An edgeless graph yields
/// all singletons and modularity 0 by convention.
LouvainResult louvain(const MobilityGraph& graph, std::uint64_t rng_seed, double resolution = 1.0,
                      int restarts = 1);

/// CSV exports: `antenna_a,antenna_b,weight` and `antenna_id,community_id`.
void write_graph_csv(const std::string& path, const MobilityGraph& graph);
void write_assignment_csv(const std::string& path, const CommunityAssignment& assignment);
CommunityAssignment read_assignment_csv(const std::string& path);

}  // namespace epimob
