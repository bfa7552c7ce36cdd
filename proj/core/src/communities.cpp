#include "epimob/communities.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "text_util.hpp"

namespace epimob {

using detail::fail;

void MobilityGraph::add_edge(std::int32_t a, std::int32_t b, double weight) {
  if (a == b) fail("MobilityGraph: self-loops are not stored");
  if (a < 0 || b < 0 || a >= node_count || b >= node_count) fail("MobilityGraph: node out of range");
  if (!(weight > 0.0)) fail("MobilityGraph: edge weight must be > 0");
  adj[static_cast<std::size_t>(a)].emplace_back(b, weight);
  adj[static_cast<std::size_t>(b)].emplace_back(a, weight);
}

std::int64_t MobilityGraph::edge_count() const {
  std::int64_t twice = 0;
  for (const auto& nbrs : adj) twice += static_cast<std::int64_t>(nbrs.size());
  return twice / 2;
}

double MobilityGraph::total_weight() const {
  double twice = 0.0;
  for (const auto& nbrs : adj) {
    for (const auto& [node, w] : nbrs) twice += w;
  }
  return twice / 2.0;
}

MobilityGraph build_graph(const MobilityModel& model, const std::vector<std::int64_t>& populations,
                          int steps_per_day, double epsilon) {
  if (model.kind != ModelKind::home_antenna_time) fail("build_graph: model kind must be home_antenna_time");
  const std::int32_t m = model.antenna_count;
  if (static_cast<std::int32_t>(populations.size()) != m) {
    fail("build_graph: populations size must equal antenna count");
  }
  if (steps_per_day <= 0) fail("build_graph: steps_per_day must be > 0");

  // Calendar frequency of each bucket: 1/3 of a day per period, 5/7 vs 2/7 days.
  double bucket_freq[TimeBucket::kCount];
  for (int b = 0; b < TimeBucket::kCount; ++b) {
    const auto daytype = static_cast<DayType>(b % 2);
    bucket_freq[b] = (1.0 / 3.0) * (daytype == DayType::weekday ? 5.0 / 7.0 : 2.0 / 7.0);
  }

  // flow[i][j]: expected per-step trips of class i+1 from home to antenna j+1
  std::vector<std::vector<double>> flow(static_cast<std::size_t>(m),
                                        std::vector<double>(static_cast<std::size_t>(m), 0.0));
  for (std::int32_t home = 1; home <= m; ++home) {
    const double pop = static_cast<double>(populations[static_cast<std::size_t>(home - 1)]);
    if (pop <= 0.0) continue;
    for (int b = 0; b < TimeBucket::kCount; ++b) {
      const TimeBucket bucket{static_cast<DayPeriod>(b / 2), static_cast<DayType>(b % 2)};
      const std::vector<double> p = predict(model, model.context_index(home, bucket));
      const double scale = pop * bucket_freq[b];
      auto& row = flow[static_cast<std::size_t>(home - 1)];
      for (std::int32_t j = 0; j < m; ++j) {
        if (j != home - 1) row[static_cast<std::size_t>(j)] += scale * p[static_cast<std::size_t>(j)];
      }
    }
  }

  MobilityGraph graph;
  graph.node_count = m;
  graph.adj.resize(static_cast<std::size_t>(m));
  for (std::int32_t i = 0; i < m; ++i) {
    for (std::int32_t j = i + 1; j < m; ++j) {
      const double w = (flow[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +
                        flow[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]) *
                       steps_per_day;
      if (w >= epsilon) graph.add_edge(i, j, w);
    }
  }
  return graph;
}

double modularity(const MobilityGraph& graph, const CommunityAssignment& assignment) {
  if (static_cast<std::int32_t>(assignment.community_of.size()) != graph.node_count) {
    fail("modularity: assignment does not cover the graph");
  }
  double m2 = 0.0;
  std::vector<double> tot(static_cast<std::size_t>(assignment.community_count), 0.0);
  std::vector<double> in(static_cast<std::size_t>(assignment.community_count), 0.0);
  for (std::int32_t u = 0; u < graph.node_count; ++u) {
    const std::int32_t cu = assignment.community_of[static_cast<std::size_t>(u)];
    if (cu < 0 || cu >= assignment.community_count) fail("modularity: community id out of range");
    double k_u = 0.0;
    for (const auto& [v, w] : graph.adj[static_cast<std::size_t>(u)]) {
      k_u += w;
      if (assignment.community_of[static_cast<std::size_t>(v)] == cu) in[static_cast<std::size_t>(cu)] += w;
    }
    tot[static_cast<std::size_t>(cu)] += k_u;
    m2 += k_u;
  }
  if (m2 <= 0.0) fail("modularity: graph has zero total weight");
  double q = 0.0;
  for (std::int32_t c = 0; c < assignment.community_count; ++c) {
    const double t = tot[static_cast<std::size_t>(c)] / m2;
    q += in[static_cast<std::size_t>(c)] / m2 - t * t;
  }
  return q;
}

namespace {

struct WorkGraph {
  std::int32_t n = 0;
  std::vector<std::vector<std::pair<std::int32_t, double>>> adj;  // no self entries
  std::vector<double> self_loop;  // internal weight kept by aggregation
  std::vector<double> degree;     // weighted degree incl. 2 * self_loop
  double m2 = 0.0;
};

WorkGraph from_graph(const MobilityGraph& graph) {
  WorkGraph g;
  g.n = graph.node_count;
  g.adj = graph.adj;
  g.self_loop.assign(static_cast<std::size_t>(g.n), 0.0);
  g.degree.assign(static_cast<std::size_t>(g.n), 0.0);
  for (std::int32_t u = 0; u < g.n; ++u) {
    double k = 0.0;
    for (const auto& [v, w] : g.adj[static_cast<std::size_t>(u)]) k += w;
    g.degree[static_cast<std::size_t>(u)] = k;
    g.m2 += k;
  }
  return g;
}

/// One Louvain level: repeated seeded-order sweeps of single-node moves until
/// a full sweep makes no move. comm is updated in place; returns whether any
/// node moved at all.
bool one_level(const WorkGraph& g, std::vector<std::int32_t>& comm, double resolution, RngEngine& rng) {
  std::vector<std::int32_t> order(static_cast<std::size_t>(g.n));
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t j = order.size(); j > 1; --j) {
    std::swap(order[j - 1], order[static_cast<std::size_t>(uniform_below(rng, j))]);
  }

  std::vector<double> tot(static_cast<std::size_t>(g.n), 0.0);
  for (std::int32_t u = 0; u < g.n; ++u) {
    tot[static_cast<std::size_t>(comm[static_cast<std::size_t>(u)])] += g.degree[static_cast<std::size_t>(u)];
  }

  std::vector<double> link(static_cast<std::size_t>(g.n), 0.0);  // weight from u to each community
  std::vector<std::int32_t> seen;
  bool any_move = false;
  bool moved = true;
  while (moved) {
    moved = false;
    for (const std::int32_t u : order) {
      const std::int32_t a = comm[static_cast<std::size_t>(u)];
      seen.clear();
      seen.push_back(a);
      link[static_cast<std::size_t>(a)] = 0.0;
      for (const auto& [v, w] : g.adj[static_cast<std::size_t>(u)]) {
        const std::int32_t c = comm[static_cast<std::size_t>(v)];
        if (link[static_cast<std::size_t>(c)] == 0.0 && c != a) seen.push_back(c);
        link[static_cast<std::size_t>(c)] += w;
      }
      const double k_u = g.degree[static_cast<std::size_t>(u)];
      tot[static_cast<std::size_t>(a)] -= k_u;
      // score(c) = l_c - resolution * tot_c * k_u / m2, maximized; staying wins ties
      std::int32_t best = a;
      double best_score = link[static_cast<std::size_t>(a)] - resolution * tot[static_cast<std::size_t>(a)] * k_u / g.m2;
      for (const std::int32_t c : seen) {
        if (c == a) continue;
        const double s = link[static_cast<std::size_t>(c)] - resolution * tot[static_cast<std::size_t>(c)] * k_u / g.m2;
        if (s > best_score) {
          best_score = s;
          best = c;
        }
      }
      tot[static_cast<std::size_t>(best)] += k_u;
      for (const std::int32_t c : seen) link[static_cast<std::size_t>(c)] = 0.0;
      if (best != a) {
        comm[static_cast<std::size_t>(u)] = best;
        moved = true;
        any_move = true;
      }
    }
  }
  return any_move;
}

std::int32_t renumber(std::vector<std::int32_t>& comm) {
  std::vector<std::int32_t> remap(comm.size(), -1);
  std::int32_t next = 0;
  for (auto& c : comm) {
    if (remap[static_cast<std::size_t>(c)] < 0) remap[static_cast<std::size_t>(c)] = next++;
    c = remap[static_cast<std::size_t>(c)];
  }
  return next;
}

WorkGraph aggregate(const WorkGraph& g, const std::vector<std::int32_t>& comm, std::int32_t n_comm) {
  WorkGraph out;
  out.n = n_comm;
  out.adj.resize(static_cast<std::size_t>(n_comm));
  out.self_loop.assign(static_cast<std::size_t>(n_comm), 0.0);
  out.degree.assign(static_cast<std::size_t>(n_comm), 0.0);

  std::vector<double> row(static_cast<std::size_t>(n_comm), 0.0);
  std::vector<std::int32_t> touched;
  std::vector<std::vector<std::int32_t>> members(static_cast<std::size_t>(n_comm));
  for (std::int32_t u = 0; u < g.n; ++u) members[static_cast<std::size_t>(comm[static_cast<std::size_t>(u)])].push_back(u);

  for (std::int32_t c = 0; c < n_comm; ++c) {
    touched.clear();
    double self = 0.0;
    for (const std::int32_t u : members[static_cast<std::size_t>(c)]) {
      self += g.self_loop[static_cast<std::size_t>(u)];
      for (const auto& [v, w] : g.adj[static_cast<std::size_t>(u)]) {
        const std::int32_t cv = comm[static_cast<std::size_t>(v)];
        if (cv == c) {
          self += w / 2.0;  // each internal edge visited from both ends
        } else {
          if (row[static_cast<std::size_t>(cv)] == 0.0) touched.push_back(cv);
          row[static_cast<std::size_t>(cv)] += w;
        }
      }
    }
    std::sort(touched.begin(), touched.end());
    for (const std::int32_t cv : touched) {
      out.adj[static_cast<std::size_t>(c)].emplace_back(cv, row[static_cast<std::size_t>(cv)]);
      row[static_cast<std::size_t>(cv)] = 0.0;
    }
    out.self_loop[static_cast<std::size_t>(c)] = self;
  }
  for (std::int32_t c = 0; c < n_comm; ++c) {
    double k = 2.0 * out.self_loop[static_cast<std::size_t>(c)];
    for (const auto& [v, w] : out.adj[static_cast<std::size_t>(c)]) k += w;
    out.degree[static_cast<std::size_t>(c)] = k;
    out.m2 += k;
  }
  return out;
}

}  // namespace

namespace {

LouvainResult louvain_once(const MobilityGraph& graph, const WorkGraph& base, RngEngine& rng,
                           double resolution) {
  const std::int32_t n = graph.node_count;
  LouvainResult result;
  std::vector<std::int32_t> node_comm(static_cast<std::size_t>(n));
  std::iota(node_comm.begin(), node_comm.end(), 0);

  const auto project_q = [&](const std::vector<std::int32_t>& nc) {
    std::vector<std::int32_t> canon = nc;
    const std::int32_t k = renumber(canon);
    return modularity(graph, CommunityAssignment{std::move(canon), k});
  };

  double best_q = -std::numeric_limits<double>::infinity();
  bool progress = true;
  while (progress) {
    progress = false;
    // move phase at the finest level; on later rounds this refines the
    // aggregated partition by single original-node moves
    if (one_level(base, node_comm, resolution, rng)) {
      const double q = project_q(node_comm);
      result.level_modularity.push_back(q);
      if (q > best_q + 1e-12) progress = true;
      best_q = std::max(best_q, q);
    } else if (best_q == -std::numeric_limits<double>::infinity()) {
      const double q = project_q(node_comm);
      result.level_modularity.push_back(q);
      best_q = q;
    }
    // coarsening loop: aggregate by the current partition, move on the
    // community graph, project back, repeat while moves keep happening
    for (;;) {
      std::vector<std::int32_t> canon = node_comm;
      const std::int32_t k = renumber(canon);
      if (k <= 1) break;
      const WorkGraph g = aggregate(base, canon, k);
      std::vector<std::int32_t> comm(static_cast<std::size_t>(k));
      std::iota(comm.begin(), comm.end(), 0);
      if (!one_level(g, comm, resolution, rng)) break;
      for (std::int32_t v = 0; v < n; ++v) {
        node_comm[static_cast<std::size_t>(v)] =
            comm[static_cast<std::size_t>(canon[static_cast<std::size_t>(v)])];
      }
      const double q = project_q(node_comm);
      result.level_modularity.push_back(q);
      if (q > best_q + 1e-12) progress = true;
      best_q = std::max(best_q, q);
    }
  }

  result.assignment.community_of = node_comm;
  result.assignment.community_count = renumber(result.assignment.community_of);
  result.modularity = modularity(graph, result.assignment);
  return result;
}

}  // namespace

LouvainResult louvain(const MobilityGraph& graph, std::uint64_t rng_seed, double resolution,
                      int restarts) {
  if (graph.node_count < 1) fail("louvain: graph must have at least one node");
  if (restarts < 1) fail("louvain: restarts must be >= 1");

  const WorkGraph base = from_graph(graph);
  if (base.m2 <= 0.0) {
    // edgeless graph: every node is a singleton, modularity 0 by convention
    LouvainResult result;
    result.assignment.community_of.resize(static_cast<std::size_t>(graph.node_count));
    std::iota(result.assignment.community_of.begin(), result.assignment.community_of.end(), 0);
    result.assignment.community_count = graph.node_count;
    result.modularity = 0.0;
    return result;
  }

  LouvainResult best;
  for (int r = 0; r < restarts; ++r) {
    RngEngine rng = make_engine(derive_seed(rng_seed, static_cast<std::uint64_t>(r), "louvain"));
    LouvainResult candidate = louvain_once(graph, base, rng, resolution);
    if (r == 0 || candidate.modularity > best.modularity) best = std::move(candidate);
  }
  return best;
}

void write_graph_csv(const std::string& path, const MobilityGraph& graph) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("write_graph_csv: cannot open '" + path + "'");
  out << "antenna_a,antenna_b,weight\n";
  out.precision(17);
  for (std::int32_t u = 0; u < graph.node_count; ++u) {
    for (const auto& [v, w] : graph.adj[static_cast<std::size_t>(u)]) {
      if (u < v) out << (u + 1) << ',' << (v + 1) << ',' << w << '\n';
    }
  }
}

void write_assignment_csv(const std::string& path, const CommunityAssignment& assignment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("write_assignment_csv: cannot open '" + path + "'");
  out << "antenna_id,community_id\n";
  for (std::size_t a = 0; a < assignment.community_of.size(); ++a) {
    out << (a + 1) << ',' << assignment.community_of[a] << '\n';
  }
}

CommunityAssignment read_assignment_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("read_assignment_csv: cannot open '" + path + "'");
  CommunityAssignment assignment;
  std::string line;
  bool first = true;
  std::vector<std::pair<std::int32_t, std::int32_t>> rows;
  while (std::getline(in, line)) {
    std::string_view sv = detail::trim(line);
    if (sv.empty()) continue;
    if (first) {
      first = false;
      if (sv == "antenna_id,community_id") continue;
    }
    const auto fields = detail::split(sv, ',');
    std::int32_t antenna = 0, community = 0;
    if (fields.size() != 2 || !detail::parse_i32(fields[0], antenna) ||
        !detail::parse_i32(fields[1], community)) {
      fail("read_assignment_csv: malformed line '" + std::string(sv) + "'");
    }
    rows.emplace_back(antenna, community);
  }
  std::sort(rows.begin(), rows.end());
  assignment.community_of.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].first != static_cast<std::int32_t>(k + 1)) {
      fail("read_assignment_csv: antennas must cover 1..M exactly once");
    }
    assignment.community_of.push_back(rows[k].second);
    assignment.community_count = std::max(assignment.community_count, rows[k].second + 1);
  }
  return assignment;
}

}  // namespace epimob
