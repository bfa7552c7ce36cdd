#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "epimob/communities.hpp"
#include "testutil.hpp"

using namespace epimob;
using namespace epimob::testutil;
namespace fs = std::filesystem;

namespace {

MobilityGraph make_graph(std::int32_t n, const std::vector<std::tuple<int, int, double>>& edges) {
  MobilityGraph graph;
  graph.node_count = n;
  graph.adj.resize(static_cast<std::size_t>(n));
  for (const auto& [a, b, w] : edges) graph.add_edge(a, b, w);
  return graph;
}

MobilityGraph two_cliques(int size, double bridge_weight) {
  std::vector<std::tuple<int, int, double>> edges;
  for (int a = 0; a < size; ++a) {
    for (int b = a + 1; b < size; ++b) {
      edges.emplace_back(a, b, 1.0);
      edges.emplace_back(size + a, size + b, 1.0);
    }
  }
  if (bridge_weight > 0.0) edges.emplace_back(0, size, bridge_weight);
  return make_graph(2 * size, edges);
}

}  // namespace

TEST_CASE("build_graph point-mass model has no edges") {
  const MobilityModel point = make_point_mass_model(8);
  const std::vector<std::int64_t> populations(8, 1000);
  const MobilityGraph graph = build_graph(point, populations, 3);
  CHECK(graph.edge_count() == 0);
}

TEST_CASE("build_graph two-antenna expected flow") {
  // both classes stay home 90% and visit the other antenna 10%
  MobilityModel model;
  model.kind = ModelKind::home_antenna_time;
  model.antenna_count = 2;
  model.contexts.resize(2 * TimeBucket::kCount);
  for (std::int32_t home = 1; home <= 2; ++home) {
    for (int b = 0; b < TimeBucket::kCount; ++b) {
      model.contexts[static_cast<std::size_t>((home - 1) * TimeBucket::kCount + b)] =
          ContextDist{{{home, 0.9}, {home == 1 ? 2 : 1, 0.1}}, 0.0};
    }
  }
  const std::int64_t pop = 1000;
  const MobilityGraph graph = build_graph(model, {pop, pop}, 3);
  REQUIRE(graph.edge_count() == 1);
  // per step each class sends 0.1 P across; both directions and 3 steps/day
  const double expected = 0.2 * static_cast<double>(pop) * 3.0;
  CHECK(graph.adj[0][0].second == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("build_graph equals brute-force flow accumulation") {
  PlantedSpec spec;
  spec.antennas = 12;
  spec.subprefs = 3;
  const MobilityModel model = make_planted_model(spec);
  std::vector<std::int64_t> populations;
  for (int a = 0; a < 12; ++a) populations.push_back(500 + 37 * a);
  const int steps_per_day = 3;
  const MobilityGraph graph = build_graph(model, populations, steps_per_day, 1e-12);

  const double freq_weekday = (1.0 / 3.0) * (5.0 / 7.0);
  const double freq_weekend = (1.0 / 3.0) * (2.0 / 7.0);
  for (std::int32_t i = 0; i < 12; ++i) {
    for (std::int32_t j = i + 1; j < 12; ++j) {
      double weight = 0.0;
      for (int b = 0; b < TimeBucket::kCount; ++b) {
        const double freq = b % 2 == 0 ? freq_weekday : freq_weekend;
        const std::vector<double> pi = predict(model, i * TimeBucket::kCount + b);
        const std::vector<double> pj = predict(model, j * TimeBucket::kCount + b);
        weight += freq * (static_cast<double>(populations[static_cast<std::size_t>(i)]) *
                              pi[static_cast<std::size_t>(j)] +
                          static_cast<double>(populations[static_cast<std::size_t>(j)]) *
                              pj[static_cast<std::size_t>(i)]);
      }
      weight *= steps_per_day;
      double stored = 0.0;
      for (const auto& [v, w] : graph.adj[static_cast<std::size_t>(i)]) {
        if (v == j) stored = w;
      }
      CHECK(stored == doctest::Approx(weight).epsilon(1e-9));
    }
  }
}

TEST_CASE("modularity analytic values") {
  const MobilityGraph cliques = two_cliques(4, 0.0);
  CommunityAssignment one;
  one.community_of.assign(8, 0);
  one.community_count = 1;
  CHECK(modularity(cliques, one) == doctest::Approx(0.0).epsilon(1e-12));

  CommunityAssignment split;
  split.community_of = {0, 0, 0, 0, 1, 1, 1, 1};
  split.community_count = 2;
  CHECK(modularity(cliques, split) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("modularity matches the direct double-sum formula") {
  RngEngine rng = make_engine(8);
  for (int trial = 0; trial < 10; ++trial) {
    // random weighted graph on 8 nodes
    std::vector<std::tuple<int, int, double>> edges;
    for (int a = 0; a < 8; ++a) {
      for (int b = a + 1; b < 8; ++b) {
        if (uniform01(rng) < 0.5) edges.emplace_back(a, b, 0.1 + uniform01(rng));
      }
    }
    if (edges.empty()) continue;
    const MobilityGraph graph = make_graph(8, edges);
    CommunityAssignment assignment;
    assignment.community_count = 3;
    assignment.community_of.resize(8);
    for (auto& c : assignment.community_of) c = static_cast<std::int32_t>(uniform_below(rng, 3));

    // Q = (1/2m) sum_ij (w_ij - k_i k_j / 2m) delta(c_i, c_j), dense double loop
    std::vector<std::vector<double>> w(8, std::vector<double>(8, 0.0));
    std::vector<double> degree(8, 0.0);
    double m2 = 0.0;
    for (const auto& [a, b, weight] : edges) {
      w[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = weight;
      w[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = weight;
      degree[static_cast<std::size_t>(a)] += weight;
      degree[static_cast<std::size_t>(b)] += weight;
      m2 += 2.0 * weight;
    }
    double q = 0.0;
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 8; ++j) {
        if (assignment.community_of[static_cast<std::size_t>(i)] !=
            assignment.community_of[static_cast<std::size_t>(j)]) {
          continue;
        }
        q += w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
             degree[static_cast<std::size_t>(i)] * degree[static_cast<std::size_t>(j)] / m2;
      }
    }
    q /= m2;
    CHECK(modularity(graph, assignment) == doctest::Approx(q).epsilon(1e-12));
  }
}

TEST_CASE("modularity rejects an empty graph") {
  MobilityGraph empty;
  empty.node_count = 3;
  empty.adj.resize(3);
  CommunityAssignment assignment;
  assignment.community_of = {0, 1, 2};
  assignment.community_count = 3;
  CHECK_THROWS_AS(modularity(empty, assignment), std::runtime_error);
}

TEST_CASE("louvain separates two cliques") {
  const MobilityGraph graph = two_cliques(5, 1.0);
  const LouvainResult result = louvain(graph, 1);
  CHECK(result.assignment.community_count == 2);
  for (int k = 0; k < 5; ++k) {
    CHECK(result.assignment.community_of[static_cast<std::size_t>(k)] ==
          result.assignment.community_of[0]);
    CHECK(result.assignment.community_of[static_cast<std::size_t>(5 + k)] ==
          result.assignment.community_of[5]);
  }
  CHECK(result.assignment.community_of[0] != result.assignment.community_of[5]);
  CHECK(result.modularity == doctest::Approx(modularity(graph, result.assignment)).epsilon(1e-12));
}

TEST_CASE("louvain reaches the exact optimum on 6-node graphs") {
  RngEngine rng = make_engine(6);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::tuple<int, int, double>> edges;
    for (int a = 0; a < 6; ++a) {
      for (int b = a + 1; b < 6; ++b) {
        if (uniform01(rng) < 0.6) edges.emplace_back(a, b, 0.1 + uniform01(rng));
      }
    }
    if (edges.empty()) {
      edges.emplace_back(0, 1, 1.0);
    }
    const MobilityGraph graph = make_graph(6, edges);
    const double best = brute_force_best_modularity(graph);
    const LouvainResult result = louvain(graph, 17, 1.0, 16);
    CHECK(result.modularity == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("louvain recovers a planted partition") {
  // 4 blocks of 30, p_in = 0.3, p_out = 0.01
  std::vector<std::int32_t> truth(120);
  for (int v = 0; v < 120; ++v) truth[static_cast<std::size_t>(v)] = v / 30;
  int recovered = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RngEngine rng = make_engine(derive_seed(900, seed, "sbm"));
    std::vector<std::tuple<int, int, double>> edges;
    for (int a = 0; a < 120; ++a) {
      for (int b = a + 1; b < 120; ++b) {
        const double p = truth[static_cast<std::size_t>(a)] == truth[static_cast<std::size_t>(b)] ? 0.3 : 0.01;
        if (uniform01(rng) < p) edges.emplace_back(a, b, 1.0);
      }
    }
    const MobilityGraph graph = make_graph(120, edges);
    const LouvainResult result = louvain(graph, seed);
    if (adjusted_rand_index(truth, result.assignment.community_of) >= 0.9) ++recovered;
  }
  CHECK(recovered == 10);
}

TEST_CASE("louvain is deterministic per seed") {
  const MobilityGraph graph = two_cliques(6, 0.8);
  const LouvainResult a = louvain(graph, 99);
  const LouvainResult b = louvain(graph, 99);
  CHECK(a.assignment.community_of == b.assignment.community_of);
  CHECK(a.modularity == b.modularity);
}

TEST_CASE("isolated nodes become singletons") {
  MobilityGraph graph = two_cliques(3, 0.5);
  graph.node_count += 2;  // two isolated antennas
  graph.adj.resize(static_cast<std::size_t>(graph.node_count));
  const LouvainResult result = louvain(graph, 4);
  const std::int32_t c6 = result.assignment.community_of[6];
  const std::int32_t c7 = result.assignment.community_of[7];
  CHECK(c6 != c7);
  for (int v = 0; v < 6; ++v) {
    CHECK(result.assignment.community_of[static_cast<std::size_t>(v)] != c6);
    CHECK(result.assignment.community_of[static_cast<std::size_t>(v)] != c7);
  }
}

TEST_CASE("edgeless graph yields singletons and zero modularity") {
  MobilityGraph graph;
  graph.node_count = 4;
  graph.adj.resize(4);
  const LouvainResult result = louvain(graph, 1);
  CHECK(result.assignment.community_count == 4);
  CHECK(result.modularity == 0.0);
}

TEST_CASE("louvain level modularity is non-decreasing") {
  PlantedSpec spec;
  spec.antennas = 60;
  spec.subprefs = 6;
  const MobilityModel model = make_planted_model(spec);
  const std::vector<std::int64_t> populations(60, 800);
  const MobilityGraph graph = build_graph(model, populations, 3);
  const LouvainResult result = louvain(graph, 3);
  for (std::size_t k = 1; k < result.level_modularity.size(); ++k) {
    CHECK(result.level_modularity[k] >= result.level_modularity[k - 1] - 1e-12);
  }
  CHECK(result.assignment.community_count >= 2);
}

TEST_CASE("assignment is a partition with contiguous ids") {
  const MobilityGraph graph = two_cliques(5, 1.0);
  const LouvainResult result = louvain(graph, 12);
  std::vector<char> seen(static_cast<std::size_t>(result.assignment.community_count), 0);
  for (const std::int32_t c : result.assignment.community_of) {
    REQUIRE(c >= 0);
    REQUIRE(c < result.assignment.community_count);
    seen[static_cast<std::size_t>(c)] = 1;
  }
  CHECK(std::count(seen.begin(), seen.end(), 1) == result.assignment.community_count);
}

TEST_CASE("graph and assignment csv round-trip") {
  const MobilityGraph graph = two_cliques(3, 0.25);
  const LouvainResult result = louvain(graph, 2);
  const std::string dir = fs::temp_directory_path().string();
  const std::string assignment_path = dir + "/epimob_assignment.csv";
  write_assignment_csv(assignment_path, result.assignment);
  const CommunityAssignment loaded = read_assignment_csv(assignment_path);
  CHECK(loaded.community_of == result.assignment.community_of);
  fs::remove(assignment_path);

  const std::string graph_path = dir + "/epimob_graph.csv";
  write_graph_csv(graph_path, graph);
  std::ifstream in(graph_path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "antenna_a,antenna_b,weight");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == graph.edge_count());
  fs::remove(graph_path);
}
