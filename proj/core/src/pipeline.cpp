#include "epimob/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "epimob/communities.hpp"
#include "epimob/version.hpp"
#include "text_util.hpp"

namespace epimob {

namespace fs = std::filesystem;
using detail::fail;
using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

[[noreturn]] void stage_fail(const std::string& stage, const std::exception& e) {
  fail("stage " + stage + ": " + e.what());
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

struct PipelineData {
  std::vector<std::int64_t> populations;
  MobilityModel model;
  std::unique_ptr<DestinationSampler> sampler;
  CommunityAssignment communities;
  bool have_communities = false;
  MobilityGraph graph;
  bool have_graph = false;
};

bool needs_communities(const ScenarioConfig& cfg, const std::vector<CompareCell>& cells) {
  if (cfg.export_communities) return true;
  const auto cell_needs = [&](StrategyKind kind) {
    return kind == StrategyKind::cut_communities ||
           (kind == StrategyKind::decrease_mix &&
            cfg.decreasemix_scope == DecreaseMixScope::per_community);
  };
  if (cell_needs(cfg.strategy)) return true;
  for (const auto& cell : cells) {
    if (cell_needs(cell.kind)) return true;
  }
  return false;
}

PipelineData prepare(const ScenarioConfig& cfg, const std::vector<CompareCell>& cells,
                     RunManifest& manifest) {
  PipelineData data;
  try {
    data.populations = read_population_csv(cfg.population_path);
    const std::int32_t m = static_cast<std::int32_t>(data.populations.size());
    for (const auto& [region, count] : cfg.seed_infectives) {
      if (region > m) {
        fail("seed region " + std::to_string(region) + " exceeds the " + std::to_string(m) +
             " regions of the population file");
      }
      if (count > data.populations[static_cast<std::size_t>(region - 1)]) {
        fail("seed count in region " + std::to_string(region) + " exceeds its population");
      }
    }
  } catch (const std::exception& e) {
    stage_fail("inputs", e);
  }

  try {
    const auto start = Clock::now();
    if (!cfg.model_path.empty()) {
      data.model = load_model(cfg.model_path);
    } else {
      Trace trace = parse_trace(cfg.trace_path, TraceFormat::csv,
                                static_cast<std::int32_t>(data.populations.size()));
      if (!cfg.subpref_map_path.empty()) {
        auto [map, count] = load_subpref_map(cfg.subpref_map_path, trace.antenna_count);
        trace.subpref_of_antenna = std::move(map);
        trace.subpref_count = count;
      }
      const int days = cfg.observation_days > 0 ? cfg.observation_days : observation_days_of(trace);
      trace = filter_users(trace, days);
      const HomeAssignment homes = infer_homes(trace);
      data.model = fit(trace, homes, cfg.model_kind, cfg.alpha);
    }
    if (data.model.kind != ModelKind::home_antenna_time) {
      fail("simulation needs a home_antenna_time model, got " + to_string(data.model.kind));
    }
    if (data.model.antenna_count != static_cast<std::int32_t>(data.populations.size())) {
      fail("model has " + std::to_string(data.model.antenna_count) + " antennas but the population file has " +
           std::to_string(data.populations.size()));
    }
    data.sampler = std::make_unique<DestinationSampler>(data.model);
    manifest.stage_ms.emplace_back("model", ms_since(start));
  } catch (const std::exception& e) {
    stage_fail("model", e);
  }

  if (needs_communities(cfg, cells)) {
    try {
      const auto start = Clock::now();
      data.graph = build_graph(data.model, data.populations, cfg.steps_per_day, cfg.graph_epsilon);
      data.have_graph = true;
      LouvainResult louvain_result = louvain(data.graph, cfg.louvain_seed, cfg.resolution);
      data.communities = std::move(louvain_result.assignment);
      data.have_communities = true;
      manifest.stage_ms.emplace_back("communities", ms_since(start));
    } catch (const std::exception& e) {
      stage_fail("communities", e);
    }
  }
  return data;
}

StrategyConfig strategy_for(const ScenarioConfig& cfg, const PipelineData& data) {
  StrategyConfig strategy;
  strategy.kind = cfg.strategy;
  strategy.p = cfg.p;
  strategy.q = cfg.q;
  strategy.beta_home = cfg.beta_home;
  strategy.gohome_inverted = cfg.gohome_inverted;
  strategy.scope = cfg.decreasemix_scope;
  strategy.communities = data.have_communities ? &data.communities : nullptr;
  return strategy;
}

EpidemicParams params_for(const ScenarioConfig& cfg) {
  EpidemicParams params;
  params.beta = cfg.beta;
  params.g = cfg.g;
  params.steps = cfg.steps;
  params.steps_per_day = cfg.steps_per_day;
  params.start_day = cfg.start_day;
  return params;
}

/// Ensemble execution: run r always uses derive_seed(master, r, "simulate"),
/// so results are independent of the worker count.
std::vector<RunRecord> run_ensemble(const ScenarioConfig& cfg, const PipelineData& data,
                                    const StrategyConfig& strategy,
                                    std::vector<std::uint64_t>& seeds) {
  PopulationSetup setup;
  setup.region_population = data.populations;
  setup.mobile_fraction = cfg.mobile_fraction;
  setup.seed_infectives = cfg.seed_infectives;

  const EpidemicParams params = params_for(cfg);
  RunOptions options;
  options.record_regions = cfg.record_regions || cfg.write_region_csv;

  seeds.resize(static_cast<std::size_t>(cfg.ensemble));
  for (int r = 0; r < cfg.ensemble; ++r) {
    seeds[static_cast<std::size_t>(r)] = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(r), "simulate");
  }

  std::vector<RunRecord> records(static_cast<std::size_t>(cfg.ensemble));
  const int workers = std::max(1, std::min(cfg.workers, cfg.ensemble));
  if (workers == 1) {
    SimulationEngine engine(data.model, *data.sampler, params, strategy);
    for (int r = 0; r < cfg.ensemble; ++r) {
      records[static_cast<std::size_t>(r)] = engine.run(setup, seeds[static_cast<std::size_t>(r)], options);
    }
    return records;
  }

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string error_message;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      try {
        SimulationEngine engine(data.model, *data.sampler, params, strategy);
        for (;;) {
          const int r = next.fetch_add(1);
          if (r >= cfg.ensemble || failed.load()) return;
          records[static_cast<std::size_t>(r)] = engine.run(setup, seeds[static_cast<std::size_t>(r)], options);
        }
      } catch (const std::exception& e) {
        failed.store(true);
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (error_message.empty()) error_message = e.what();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failed.load()) fail(error_message);
  return records;
}

void write_run_csv(const std::string& path, const RunRecord& record) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open '" + path + "'");
  out << "step,S,I,R,proposed_trips,affected_trips\n";
  for (std::size_t n = 0; n < record.steps.size(); ++n) {
    const StepRow& row = record.steps[n];
    out << n << ',' << row.s << ',' << row.i << ',' << row.r << ',' << row.trips.proposed << ','
        << row.trips.affected() << '\n';
  }
}

void write_region_csv(const std::string& path, const RunRecord& record) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open '" + path + "'");
  const std::size_t m = record.region_infective.empty() ? 0 : record.region_infective.front().size();
  out << "step";
  for (std::size_t a = 1; a <= m; ++a) out << ",I_" << a;
  out << '\n';
  for (std::size_t n = 0; n < record.region_infective.size(); ++n) {
    out << n;
    for (const std::int64_t i : record.region_infective[n]) out << ',' << i;
    out << '\n';
  }
}

void write_trajectory_csv(const std::string& path, const EnsembleMetrics& metrics) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open '" + path + "'");
  out << "step,S_mean,I_mean,R_mean,proposed_mean,affected_mean\n";
  for (std::size_t n = 0; n < metrics.mean_trajectory.size(); ++n) {
    const TrajectoryRow& row = metrics.mean_trajectory[n];
    out << n << ',' << fmt(row.s) << ',' << fmt(row.i) << ',' << fmt(row.r) << ','
        << fmt(row.proposed) << ',' << fmt(row.affected) << '\n';
  }
}

void write_metrics_txt(const std::string& path, const EnsembleMetrics& metrics) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open '" + path + "'");
  out << "runs = " << metrics.per_run.size() << '\n';
  out << "i_star_mean = " << fmt(metrics.mean.i_star) << '\n';
  out << "i_star_std = " << fmt(metrics.stddev.i_star) << '\n';
  out << "t_star_mean = " << fmt(static_cast<double>(metrics.mean.t_star)) << '\n';
  out << "t_star_day_mean = " << fmt(metrics.mean.t_star_day) << '\n';
  out << "t_star_day_std = " << fmt(metrics.stddev.t_star_day) << '\n';
  out << "q_star_mean = " << fmt(metrics.mean.q_star) << '\n';
  out << "q_star_std = " << fmt(metrics.stddev.q_star) << '\n';
  out << "q_star_truncated = " << (metrics.mean.q_truncated ? "true" : "false") << '\n';
  out << "affected_mean = " << fmt(metrics.mean.affected_mean) << '\n';
  out << "affected_max_mean = " << fmt(metrics.mean.affected_max) << '\n';
  for (std::size_t r = 0; r < metrics.per_run.size(); ++r) {
    const RunMetrics& m = metrics.per_run[r];
    out << "run_" << r << ".i_star = " << fmt(m.i_star) << '\n';
    out << "run_" << r << ".t_star = " << m.t_star << '\n';
    out << "run_" << r << ".q_star = " << fmt(m.q_star) << '\n';
    out << "run_" << r << ".q_truncated = " << (m.q_truncated ? "true" : "false") << '\n';
    out << "run_" << r << ".affected_mean = " << fmt(m.affected_mean) << '\n';
  }
}

std::string comparison_header() {
  return "strategy,param,i_star_mean,i_star_std,t_star_mean,t_star_std,t_star_day_mean,"
         "q_star_mean,q_star_std,affected_mean,affected_max_mean\n";
}

void append_comparison_row(std::ofstream& out, const CompareCell& cell, const EnsembleMetrics& m) {
  double param = 0.0;
  if (cell.kind == StrategyKind::decrease_mix) {
    param = cell.q;
  } else if (cell.kind != StrategyKind::baseline) {
    param = cell.p;
  }
  out << to_string(cell.kind) << ',' << fmt(param) << ',' << fmt(m.mean.i_star) << ','
      << fmt(m.stddev.i_star) << ',' << m.mean.t_star << ',' << m.stddev.t_star << ','
      << fmt(m.mean.t_star_day) << ',' << fmt(m.mean.q_star) << ',' << fmt(m.stddev.q_star) << ','
      << fmt(m.mean.affected_mean) << ',' << fmt(m.mean.affected_max) << '\n';
}

void note_output(RunManifest& manifest, const fs::path& out_dir, const std::string& rel) {
  manifest.outputs.emplace_back(rel, fnv1a64_file((out_dir / rel).string()));
}

}  // namespace

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("fnv1a64_file: cannot open '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize k = 0; k < got; ++k) {
      h ^= static_cast<unsigned char>(buf[k]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  json j;
  j["artifact"] = "epimob";
  j["version"] = manifest.version;
  j["master_seed"] = manifest.master_seed;
  j["run_seeds"] = manifest.run_seeds;
  j["config_text"] = manifest.config_text;
  json outputs = json::array();
  for (const auto& [rel, hash] : manifest.outputs) {
    outputs.push_back({{"path", rel}, {"fnv1a64", hash}});
  }
  j["outputs"] = outputs;
  json timings;
  for (const auto& [stage, ms] : manifest.stage_ms) timings[stage] = ms;
  timings["total"] = manifest.total_ms;
  j["timings_ms"] = timings;
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("write_manifest: cannot open '" + path + "'");
  out << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("read_manifest: cannot open '" + path + "'");
  json j;
  in >> j;
  RunManifest manifest;
  manifest.version = j.at("version").get<std::string>();
  manifest.master_seed = j.at("master_seed").get<std::uint64_t>();
  manifest.run_seeds = j.at("run_seeds").get<std::vector<std::uint64_t>>();
  manifest.config_text = j.at("config_text").get<std::string>();
  for (const auto& entry : j.at("outputs")) {
    manifest.outputs.emplace_back(entry.at("path").get<std::string>(),
                                  entry.at("fnv1a64").get<std::uint64_t>());
  }
  return manifest;
}

ScenarioConfig config_from_manifest(const std::string& manifest_path) {
  const RunManifest manifest = read_manifest(manifest_path);
  // paths in the embedded echo are already resolved
  return load_config_text(manifest.config_text, "");
}

RunManifest run_scenario(const ScenarioConfig& cfg) {
  const auto t0 = Clock::now();
  RunManifest manifest;
  manifest.version = std::string(kVersion);
  manifest.master_seed = cfg.master_seed;
  manifest.config_text = emit_config(cfg);

  const PipelineData data = prepare(cfg, {}, manifest);
  const StrategyConfig strategy = strategy_for(cfg, data);

  std::vector<RunRecord> records;
  try {
    const auto start = Clock::now();
    records = run_ensemble(cfg, data, strategy, manifest.run_seeds);
    manifest.stage_ms.emplace_back("simulate", ms_since(start));
  } catch (const std::exception& e) {
    stage_fail("simulate", e);
  }

  EnsembleMetrics metrics;
  try {
    metrics = ensemble_metrics(records);
  } catch (const std::exception& e) {
    stage_fail("metrics", e);
  }

  try {
    const fs::path out_dir(cfg.output_dir);
    fs::create_directories(out_dir / "runs");
    for (std::size_t r = 0; r < records.size(); ++r) {
      char name[64];
      std::snprintf(name, sizeof(name), "runs/run_%03zu.csv", r);
      write_run_csv((out_dir / name).string(), records[r]);
      note_output(manifest, out_dir, name);
      if (cfg.write_region_csv) {
        std::snprintf(name, sizeof(name), "runs/run_%03zu_regions.csv", r);
        write_region_csv((out_dir / name).string(), records[r]);
        note_output(manifest, out_dir, name);
      }
    }
    write_trajectory_csv((out_dir / "trajectory_mean.csv").string(), metrics);
    note_output(manifest, out_dir, "trajectory_mean.csv");
    write_metrics_txt((out_dir / "metrics.txt").string(), metrics);
    note_output(manifest, out_dir, "metrics.txt");
    if (data.have_graph && cfg.export_communities) {
      write_graph_csv((out_dir / "graph.csv").string(), data.graph);
      note_output(manifest, out_dir, "graph.csv");
      write_assignment_csv((out_dir / "communities.csv").string(), data.communities);
      note_output(manifest, out_dir, "communities.csv");
    }
    manifest.total_ms = ms_since(t0);
    write_manifest((out_dir / "manifest.json").string(), manifest);
  } catch (const std::exception& e) {
    stage_fail("outputs", e);
  }
  return manifest;
}

std::vector<CellSummary> compare_strategies(const ScenarioConfig& cfg, RunManifest* manifest_out) {
  if (cfg.compare_cells.empty()) fail("stage compare: config has no compare_cells");
  const auto t0 = Clock::now();
  RunManifest manifest;
  manifest.version = std::string(kVersion);
  manifest.master_seed = cfg.master_seed;
  manifest.config_text = emit_config(cfg);

  const PipelineData data = prepare(cfg, cfg.compare_cells, manifest);

  std::vector<CellSummary> summaries;
  const fs::path out_dir(cfg.output_dir);
  try {
    fs::create_directories(out_dir);
  } catch (const std::exception& e) {
    stage_fail("outputs", e);
  }

  for (const CompareCell& cell : cfg.compare_cells) {
    ScenarioConfig cell_cfg = cfg;
    cell_cfg.strategy = cell.kind;
    cell_cfg.p = cell.p;
    cell_cfg.q = cell.q;
    const StrategyConfig strategy = strategy_for(cell_cfg, data);
    try {
      const auto start = Clock::now();
      std::vector<std::uint64_t> seeds;  // identical for every cell: common random numbers
      std::vector<RunRecord> records = run_ensemble(cell_cfg, data, strategy, seeds);
      manifest.run_seeds = seeds;
      CellSummary summary;
      summary.cell = cell;
      summary.metrics = ensemble_metrics(records);
      summaries.push_back(std::move(summary));
      manifest.stage_ms.emplace_back(cell.label(), ms_since(start));
    } catch (const std::exception& e) {
      stage_fail("compare:" + cell.label(), e);
    }
  }

  try {
    std::ofstream comparison((out_dir / "comparison.csv").string(), std::ios::binary);
    if (!comparison) fail("cannot open comparison.csv");
    comparison << comparison_header();
    for (const auto& summary : summaries) {
      append_comparison_row(comparison, summary.cell, summary.metrics);
    }
    comparison.close();
    note_output(manifest, out_dir, "comparison.csv");
    for (const auto& summary : summaries) {
      const std::string name = "traj_" + summary.cell.label() + ".csv";
      write_trajectory_csv((out_dir / name).string(), summary.metrics);
      note_output(manifest, out_dir, name);
    }
    manifest.total_ms = ms_since(t0);
    write_manifest((out_dir / "manifest.json").string(), manifest);
  } catch (const std::exception& e) {
    stage_fail("outputs", e);
  }
  if (manifest_out != nullptr) *manifest_out = manifest;
  return summaries;
}

}  // namespace epimob
