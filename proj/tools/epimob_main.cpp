#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "epimob/communities.hpp"
#include "epimob/config.hpp"
#include "epimob/pipeline.hpp"
#include "epimob/version.hpp"

namespace fs = std::filesystem;
using namespace epimob;

namespace {

struct FitArgs {
  std::string trace_path;
  std::string subpref_map_path;
  std::string out_path;
  std::int32_t antennas = 0;
  int observation_days = 0;
  double alpha = 0.5;
  std::string kind = "home_antenna_time";
  double holdout = 0.0;
  bool compare_kinds = false;
  std::uint64_t seed = 1;
};

int do_fit(const FitArgs& args) {
  Trace trace = parse_trace(args.trace_path, TraceFormat::csv, args.antennas);
  if (!args.subpref_map_path.empty()) {
    auto [map, count] = load_subpref_map(args.subpref_map_path, trace.antenna_count);
    trace.subpref_of_antenna = std::move(map);
    trace.subpref_count = count;
  }
  if (trace.malformed_lines > 0) {
    std::cerr << "warning: skipped " << trace.malformed_lines << " malformed lines\n";
  }
  const int days = args.observation_days > 0 ? args.observation_days : observation_days_of(trace);
  const std::int64_t before = trace.record_count();
  trace = filter_users(trace, days);
  std::cout << "trace: " << trace.users.size() << " users, " << trace.record_count() << " records kept ("
            << before << " parsed, " << days << " observation days)\n";

  if (args.holdout > 0.0) {
    const auto [train, test] = split_train_test(trace, args.holdout, args.seed);
    const HomeAssignment homes = infer_homes(train);
    std::vector<ModelKind> kinds;
    if (args.compare_kinds) {
      kinds = {ModelKind::home_antenna_time, ModelKind::subpref_time, ModelKind::time_only,
               ModelKind::markov};
    } else {
      kinds = {model_kind_from_string(args.kind)};
    }
    std::cout << "holdout evaluation (test fraction " << args.holdout << "):\n";
    for (const ModelKind kind : kinds) {
      if (kind == ModelKind::subpref_time && !train.has_subpref_map()) {
        std::cout << "  " << to_string(kind) << ": skipped (no sub-prefecture map)\n";
        continue;
      }
      const MobilityModel model = fit(train, homes, kind, args.alpha);
      const EvalReport report = evaluate(model, test, homes, &train);
      std::printf("  %-18s avg_loglik = %.4f  (n_test = %lld)\n", to_string(kind).c_str(),
                  report.avg_loglik, static_cast<long long>(report.n_test));
    }
  }

  const HomeAssignment homes = infer_homes(trace);
  const MobilityModel model = fit(trace, homes, model_kind_from_string(args.kind), args.alpha);
  save_model(args.out_path, model);
  std::cout << "model (" << args.kind << ", alpha " << args.alpha << ") written to " << args.out_path
            << '\n';
  return 0;
}

struct CommunitiesArgs {
  std::string model_path;
  std::string population_path;
  std::string out_dir = ".";
  double epsilon = 1e-6;
  std::uint64_t seed = 1;
  double resolution = 1.0;
  int steps_per_day = 3;
};

int do_communities(const CommunitiesArgs& args) {
  const MobilityModel model = load_model(args.model_path);
  const std::vector<std::int64_t> populations = read_population_csv(args.population_path);
  const MobilityGraph graph = build_graph(model, populations, args.steps_per_day, args.epsilon);
  const LouvainResult result = louvain(graph, args.seed, args.resolution);
  fs::create_directories(args.out_dir);
  write_graph_csv((fs::path(args.out_dir) / "graph.csv").string(), graph);
  write_assignment_csv((fs::path(args.out_dir) / "communities.csv").string(), result.assignment);
  std::cout << "graph: " << graph.node_count << " antennas, " << graph.edge_count() << " edges\n";
  std::cout << "communities: " << result.assignment.community_count << " (modularity "
            << result.modularity << ")\n";
  std::cout << "wrote graph.csv and communities.csv to " << args.out_dir << '\n';
  return 0;
}

struct GenerateArgs {
  std::string spec_path;
  std::string out_dir = "synth";
  int users = 1000;
  int days = 14;
  double calls_per_day = 4.0;
  std::uint64_t seed = 1;
  std::int64_t population_per_antenna = 1000;
  PlantedSpec spec;
};

GenerateArgs parse_generate_spec(const std::string& path, GenerateArgs args) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("generate: cannot open spec '" + path + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = line;
    const auto hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    const auto eq = s.find('=');
    if (s.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos) {
      throw std::runtime_error("generate spec line " + std::to_string(line_no) + ": expected key = value");
    }
    auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t\r");
      const auto e = v.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    try {
      if (key == "antennas") {
        args.spec.antennas = std::stoi(value);
      } else if (key == "subprefs") {
        args.spec.subprefs = std::stoi(value);
      } else if (key == "users") {
        args.users = std::stoi(value);
      } else if (key == "days") {
        args.days = std::stoi(value);
      } else if (key == "calls_per_day") {
        args.calls_per_day = std::stod(value);
      } else if (key == "seed") {
        args.seed = std::stoull(value);
      } else if (key == "night_home_mass") {
        args.spec.night_home_mass = std::stod(value);
      } else if (key == "day_home_mass") {
        args.spec.day_home_mass = std::stod(value);
      } else if (key == "day_work_mass") {
        args.spec.day_work_mass = std::stod(value);
      } else if (key == "weekend_home_mass") {
        args.spec.weekend_home_mass = std::stod(value);
      } else if (key == "weekend_work_mass") {
        args.spec.weekend_work_mass = std::stod(value);
      } else if (key == "hubs_per_subpref") {
        args.spec.hubs_per_subpref = std::stoi(value);
      } else if (key == "leak_fraction") {
        args.spec.leak_fraction = std::stod(value);
      } else if (key == "population_per_antenna") {
        args.population_per_antenna = std::stoll(value);
      } else if (key == "out_dir") {
        args.out_dir = value;
      } else {
        throw std::runtime_error("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("generate spec line " + std::to_string(line_no) + ": bad value for " + key);
    }
  }
  return args;
}

int do_generate(GenerateArgs args) {
  if (!args.spec_path.empty()) args = parse_generate_spec(args.spec_path, args);
  const MobilityModel planted = make_planted_model(args.spec);
  const GeneratedTrace generated =
      generate_trace(planted, args.users, args.days, args.calls_per_day, args.seed);

  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  write_trace_csv((dir / "trace.csv").string(), generated.trace);
  write_homes_csv((dir / "homes.csv").string(), generated.homes);
  write_subpref_map_csv((dir / "subpref_map.csv").string(), planted.subpref_of_antenna);
  std::vector<std::int64_t> populations(static_cast<std::size_t>(planted.antenna_count),
                                        args.population_per_antenna);
  write_population_csv((dir / "population.csv").string(), populations);
  save_model((dir / "planted_model.bin").string(), planted);

  std::cout << "generated " << generated.trace.record_count() << " records for "
            << generated.trace.users.size() << " users over " << args.days << " days\n";
  std::cout << "wrote trace.csv, homes.csv, subpref_map.csv, population.csv, planted_model.bin to "
            << args.out_dir << '\n';
  return 0;
}

int do_simulate(const std::string& config_path, const std::string& manifest_path,
                const std::string& output_override) {
  ScenarioConfig cfg;
  if (!manifest_path.empty()) {
    cfg = config_from_manifest(manifest_path);
  } else {
    cfg = load_config(config_path);
  }
  if (!output_override.empty()) cfg.output_dir = output_override;
  const RunManifest manifest = run_scenario(cfg);
  std::cout << "scenario complete: " << manifest.run_seeds.size() << " runs, outputs in "
            << cfg.output_dir << '\n';
  return 0;
}

int do_compare(const std::string& config_path, const std::string& output_override) {
  ScenarioConfig cfg = load_config(config_path);
  if (!output_override.empty()) cfg.output_dir = output_override;
  const std::vector<CellSummary> summaries = compare_strategies(cfg);
  std::cout << "compared " << summaries.size() << " cells (matched seeds), outputs in "
            << cfg.output_dir << '\n';
  for (const auto& summary : summaries) {
    std::printf("  %-22s I* = %.4f  T* = %lld  Q* = %.4f  affected = %.4f\n",
                summary.cell.label().c_str(), summary.metrics.mean.i_star,
                static_cast<long long>(summary.metrics.mean.t_star), summary.metrics.mean.q_star,
                summary.metrics.mean.affected_mean);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"epimob: metapopulation epidemic simulation driven by a learned mobility model"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a mobility model from a trace CSV");
  fit_cmd->add_option("--trace", fit_args.trace_path, "Trace CSV (user_id,antenna_id,timestamp)")
      ->required();
  fit_cmd->add_option("--out", fit_args.out_path, "Output model file")->required();
  fit_cmd->add_option("--antennas", fit_args.antennas, "Antenna count (0: infer from data)");
  fit_cmd->add_option("--subpref-map", fit_args.subpref_map_path, "Sub-prefecture map CSV");
  fit_cmd->add_option("--observation-days", fit_args.observation_days,
                      "Observation window in days (0: derive from the trace)");
  fit_cmd->add_option("--alpha", fit_args.alpha, "Dirichlet concentration (> 0)");
  fit_cmd->add_option("--kind", fit_args.kind,
                      "home_antenna_time | subpref_time | time_only | markov");
  fit_cmd->add_option("--holdout", fit_args.holdout,
                      "Hold out this fraction per user and report test log-likelihood");
  fit_cmd->add_flag("--compare-kinds", fit_args.compare_kinds,
                    "Evaluate all four model kinds on the holdout");
  fit_cmd->add_option("--seed", fit_args.seed, "Split seed");

  CommunitiesArgs comm_args;
  auto* comm_cmd = app.add_subcommand("communities", "Build the mobility graph and run Louvain");
  comm_cmd->add_option("--model", comm_args.model_path, "Fitted model file")->required();
  comm_cmd->add_option("--population", comm_args.population_path, "Population CSV")->required();
  comm_cmd->add_option("--out-dir", comm_args.out_dir, "Output directory");
  comm_cmd->add_option("--epsilon", comm_args.epsilon, "Edge weight threshold");
  comm_cmd->add_option("--seed", comm_args.seed, "Louvain shuffle seed");
  comm_cmd->add_option("--resolution", comm_args.resolution, "Modularity resolution");

  GenerateArgs gen_args;
  auto* gen_cmd = app.add_subcommand("generate", "Generate a synthetic trace with planted truth");
  gen_cmd->add_option("--spec", gen_args.spec_path, "Planted spec file (key = value)");
  gen_cmd->add_option("--out-dir", gen_args.out_dir, "Output directory");
  gen_cmd->add_option("--users", gen_args.users, "User count");
  gen_cmd->add_option("--days", gen_args.days, "Observation days");
  gen_cmd->add_option("--calls-per-day", gen_args.calls_per_day, "Mean calls per user per day");
  gen_cmd->add_option("--antennas", gen_args.spec.antennas, "Antenna count");
  gen_cmd->add_option("--subprefs", gen_args.spec.subprefs, "Sub-prefecture count");
  gen_cmd->add_option("--seed", gen_args.seed, "Generator seed");
  gen_cmd->add_option("--population-per-antenna", gen_args.population_per_antenna,
                      "Population written to population.csv");

  std::string sim_config, sim_manifest, sim_output;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a scenario config end to end");
  sim_cmd->add_option("--config", sim_config, "Scenario config file");
  sim_cmd->add_option("--from-manifest", sim_manifest, "Rerun the scenario recorded in a manifest");
  sim_cmd->add_option("--output-dir", sim_output, "Override the output directory");

  std::string cmp_config, cmp_output;
  auto* cmp_cmd = app.add_subcommand("compare", "Run the config's compare_cells with matched seeds");
  cmp_cmd->add_option("--config", cmp_config, "Scenario config file with compare_cells")->required();
  cmp_cmd->add_option("--output-dir", cmp_output, "Override the output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed()) return do_fit(fit_args);
    if (comm_cmd->parsed()) return do_communities(comm_args);
    if (gen_cmd->parsed()) return do_generate(gen_args);
    if (sim_cmd->parsed()) {
      if (sim_config.empty() && sim_manifest.empty()) {
        std::cerr << "error: simulate needs --config or --from-manifest\n";
        return 1;
      }
      return do_simulate(sim_config, sim_manifest, sim_output);
    }
    if (cmp_cmd->parsed()) return do_compare(cmp_config, cmp_output);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
