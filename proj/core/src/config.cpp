#include "epimob/config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "text_util.hpp"

namespace epimob {

namespace fs = std::filesystem;
using detail::fail;

std::string CompareCell::label() const {
  if (kind == StrategyKind::baseline) return "baseline";
  char buf[64];
  if (kind == StrategyKind::decrease_mix) {
    std::snprintf(buf, sizeof(buf), "%s_q%g", to_string(kind).c_str(), q);
  } else {
    std::snprintf(buf, sizeof(buf), "%s_p%g", to_string(kind).c_str(), p);
  }
  return buf;
}

std::vector<CompareCell> parse_compare_cells(const std::string& text) {
  std::vector<CompareCell> cells;
  for (const auto cell_sv : detail::split(text, ';')) {
    const std::string_view cell_text = detail::trim(cell_sv);
    if (cell_text.empty()) continue;
    CompareCell cell;
    bool have_kind = false;
    for (const auto token_sv : detail::split(cell_text, ' ')) {
      const std::string token(detail::trim(token_sv));
      if (token.empty()) continue;
      if (!have_kind) {
        cell.kind = strategy_kind_from_string(token);
        have_kind = true;
        continue;
      }
      const auto eq = token.find('=');
      if (eq == std::string::npos) fail("compare_cells: expected key=value, got '" + token + "'");
      const std::string key = token.substr(0, eq);
      double value = 0.0;
      if (!detail::parse_f64(token.substr(eq + 1), value)) {
        fail("compare_cells: bad number in '" + token + "'");
      }
      if (key == "p") {
        cell.p = value;
      } else if (key == "q") {
        cell.q = value;
      } else {
        fail("compare_cells: unknown parameter '" + key + "'");
      }
    }
    if (!have_kind) fail("compare_cells: empty cell");
    if (cell.p < 0.0 || cell.p > 1.0) fail("compare_cells: p must lie in [0, 1]");
    if (cell.q < 0.0 || cell.q > 1.0) fail("compare_cells: q must lie in [0, 1]");
    cells.push_back(cell);
  }
  return cells;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string resolve_path(const std::string& base_dir, std::string_view value) {
  fs::path p{std::string(value)};
  if (p.is_absolute() || base_dir.empty()) return p.string();
  return (fs::path(base_dir) / p).lexically_normal().string();
}

struct Parser {
  ScenarioConfig cfg;
  std::string base_dir;

  void require_range(const std::string& key, bool ok, const std::string& range) {
    if (!ok) fail("config: " + key + " must be " + range);
  }

  void apply(const std::string& key, const std::string& value) {
    std::int64_t i64 = 0;
    double f64 = 0.0;
    if (key == "version") {
      require_range(key, detail::parse_i64(value, i64) && i64 == 1, "1 (the only schema version)");
      cfg.version = 1;
    } else if (key == "population") {
      cfg.population_path = resolve_path(base_dir, value);
    } else if (key == "model") {
      cfg.model_path = resolve_path(base_dir, value);
    } else if (key == "trace") {
      cfg.trace_path = resolve_path(base_dir, value);
    } else if (key == "subpref_map") {
      cfg.subpref_map_path = resolve_path(base_dir, value);
    } else if (key == "observation_days") {
      require_range(key, detail::parse_i64(value, i64) && i64 >= 0, ">= 0");
      cfg.observation_days = static_cast<int>(i64);
    } else if (key == "alpha") {
      require_range(key, detail::parse_f64(value, f64) && f64 > 0.0, "> 0");
      cfg.alpha = f64;
    } else if (key == "model_kind") {
      cfg.model_kind = model_kind_from_string(value);
    } else if (key == "beta") {
      require_range(key, detail::parse_f64(value, f64) && f64 > 0.0 && f64 <= 1.0, "in (0, 1]");
      cfg.beta = f64;
    } else if (key == "g") {
      require_range(key, detail::parse_f64(value, f64) && f64 > 0.0 && f64 <= 1.0, "in (0, 1]");
      cfg.g = f64;
    } else if (key == "steps") {
      require_range(key, detail::parse_i64(value, i64) && i64 >= 0, ">= 0");
      cfg.steps = i64;
    } else if (key == "steps_per_day") {
      require_range(key, detail::parse_i64(value, i64) && i64 == 3, "3 (the mobility model has 3 periods)");
      cfg.steps_per_day = 3;
    } else if (key == "mobile_fraction") {
      require_range(key, detail::parse_f64(value, f64) && f64 >= 0.0 && f64 <= 1.0, "in [0, 1]");
      cfg.mobile_fraction = f64;
    } else if (key == "start_day") {
      cfg.start_day = weekday_from_string(value);
    } else if (key == "seed_infectives") {
      cfg.seed_infectives.clear();
      for (const auto part : detail::split(value, ',')) {
        const auto sv = detail::trim(part);
        if (sv.empty()) continue;
        const auto fields = detail::split(sv, ':');
        std::int32_t region = 0;
        std::int64_t count = 0;
        if (fields.size() != 2 || !detail::parse_i32(fields[0], region) ||
            !detail::parse_i64(fields[1], count) || region < 1 || count < 0) {
          fail("config: seed_infectives entries must be region:count with region >= 1");
        }
        cfg.seed_infectives.emplace_back(region, count);
      }
      require_range(key, !cfg.seed_infectives.empty(), "a non-empty region:count list");
    } else if (key == "strategy") {
      cfg.strategy = strategy_kind_from_string(value);
    } else if (key == "p") {
      require_range(key, detail::parse_f64(value, f64) && f64 >= 0.0 && f64 <= 1.0, "in [0, 1]");
      cfg.p = f64;
    } else if (key == "q") {
      require_range(key, detail::parse_f64(value, f64) && f64 >= 0.0 && f64 <= 1.0, "in [0, 1]");
      cfg.q = f64;
    } else if (key == "beta_home") {
      require_range(key, detail::parse_f64(value, f64) && (f64 < 0.0 || (f64 > 0.0 && f64 <= 1.0)),
                    "in (0, 1], or negative for \"use g\"");
      cfg.beta_home = f64 < 0.0 ? -1.0 : f64;
    } else if (key == "decreasemix_scope") {
      if (value == "class") {
        cfg.decreasemix_scope = DecreaseMixScope::per_class;
      } else if (value == "community") {
        cfg.decreasemix_scope = DecreaseMixScope::per_community;
      } else {
        fail("config: decreasemix_scope must be class or community");
      }
    } else if (key == "gohome_inverted") {
      if (value == "true") {
        cfg.gohome_inverted = true;
      } else if (value == "false") {
        cfg.gohome_inverted = false;
      } else {
        fail("config: gohome_inverted must be true or false");
      }
    } else if (key == "graph_epsilon") {
      require_range(key, detail::parse_f64(value, f64) && f64 >= 0.0, ">= 0");
      cfg.graph_epsilon = f64;
    } else if (key == "louvain_seed") {
      require_range(key, detail::parse_i64(value, i64) && i64 >= 0, ">= 0");
      cfg.louvain_seed = static_cast<std::uint64_t>(i64);
    } else if (key == "resolution") {
      require_range(key, detail::parse_f64(value, f64) && f64 > 0.0, "> 0");
      cfg.resolution = f64;
    } else if (key == "export_communities") {
      if (value == "true") {
        cfg.export_communities = true;
      } else if (value == "false") {
        cfg.export_communities = false;
      } else {
        fail("config: export_communities must be true or false");
      }
    } else if (key == "ensemble") {
      require_range(key, detail::parse_i64(value, i64) && i64 >= 1, ">= 1");
      cfg.ensemble = static_cast<int>(i64);
    } else if (key == "workers") {
      require_range(key, detail::parse_i64(value, i64) && i64 >= 1, ">= 1");
      cfg.workers = static_cast<int>(i64);
    } else if (key == "master_seed") {
      require_range(key, detail::parse_i64(value, i64) && i64 >= 0, ">= 0");
      cfg.master_seed = static_cast<std::uint64_t>(i64);
    } else if (key == "output_dir") {
      cfg.output_dir = resolve_path(base_dir, value);
    } else if (key == "record_regions") {
      cfg.record_regions = value == "true";
      require_range(key, value == "true" || value == "false", "true or false");
    } else if (key == "write_region_csv") {
      cfg.write_region_csv = value == "true";
      require_range(key, value == "true" || value == "false", "true or false");
    } else if (key == "compare_cells") {
      cfg.compare_cells = parse_compare_cells(value);
    } else {
      fail("config: unknown key '" + key + "'");
    }
  }
};

void validate_config(const ScenarioConfig& cfg) {
  if (cfg.population_path.empty()) fail("config: population is required");
  if (cfg.model_path.empty() && cfg.trace_path.empty()) {
    fail("config: either model or trace is required");
  }
  if (!cfg.model_path.empty() && !cfg.trace_path.empty()) {
    fail("config: model and trace are mutually exclusive");
  }
  const auto check_exists = [](const char* key, const std::string& path) {
    if (!path.empty() && !fs::exists(path)) {
      fail(std::string("config: ") + key + " file does not exist: '" + path + "'");
    }
  };
  check_exists("population", cfg.population_path);
  check_exists("model", cfg.model_path);
  check_exists("trace", cfg.trace_path);
  check_exists("subpref_map", cfg.subpref_map_path);
  if (cfg.strategy == StrategyKind::decrease_mix &&
      cfg.decreasemix_scope == DecreaseMixScope::per_community && cfg.q < 0.0) {
    fail("config: q must be set for decreasemix");
  }
}

}  // namespace

ScenarioConfig load_config_text(const std::string& text, const std::string& base_dir) {
  Parser parser;
  parser.base_dir = base_dir;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = detail::trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    const auto eq = sv.find('=');
    if (eq == std::string_view::npos) {
      fail("config: line " + std::to_string(line_no) + " is not key = value");
    }
    const std::string key(detail::trim(sv.substr(0, eq)));
    const std::string value(detail::trim(sv.substr(eq + 1)));
    if (key.empty()) fail("config: line " + std::to_string(line_no) + " has an empty key");
    parser.apply(key, value);
  }
  validate_config(parser.cfg);
  return parser.cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("config: cannot open '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return load_config_text(text.str(), fs::path(path).parent_path().string());
}

std::string emit_config(const ScenarioConfig& cfg) {
  std::ostringstream out;
  out << "# epimob scenario config\n";
  out << "version = " << cfg.version << '\n';
  out << "population = " << cfg.population_path << '\n';
  if (!cfg.model_path.empty()) out << "model = " << cfg.model_path << '\n';
  if (!cfg.trace_path.empty()) out << "trace = " << cfg.trace_path << '\n';
  if (!cfg.subpref_map_path.empty()) out << "subpref_map = " << cfg.subpref_map_path << '\n';
  out << "observation_days = " << cfg.observation_days << '\n';
  out << "alpha = " << format_double(cfg.alpha) << '\n';
  out << "model_kind = " << to_string(cfg.model_kind) << '\n';
  out << "beta = " << format_double(cfg.beta) << '\n';
  out << "g = " << format_double(cfg.g) << '\n';
  out << "steps = " << cfg.steps << '\n';
  out << "steps_per_day = " << cfg.steps_per_day << '\n';
  out << "mobile_fraction = " << format_double(cfg.mobile_fraction) << '\n';
  out << "start_day = " << to_string(cfg.start_day) << '\n';
  out << "seed_infectives = ";
  for (std::size_t k = 0; k < cfg.seed_infectives.size(); ++k) {
    if (k) out << ',';
    out << cfg.seed_infectives[k].first << ':' << cfg.seed_infectives[k].second;
  }
  out << '\n';
  out << "strategy = " << to_string(cfg.strategy) << '\n';
  out << "p = " << format_double(cfg.p) << '\n';
  out << "q = " << format_double(cfg.q) << '\n';
  out << "beta_home = " << format_double(cfg.beta_home) << '\n';
  out << "decreasemix_scope = "
      << (cfg.decreasemix_scope == DecreaseMixScope::per_class ? "class" : "community") << '\n';
  out << "gohome_inverted = " << (cfg.gohome_inverted ? "true" : "false") << '\n';
  out << "graph_epsilon = " << format_double(cfg.graph_epsilon) << '\n';
  out << "louvain_seed = " << cfg.louvain_seed << '\n';
  out << "resolution = " << format_double(cfg.resolution) << '\n';
  out << "export_communities = " << (cfg.export_communities ? "true" : "false") << '\n';
  out << "ensemble = " << cfg.ensemble << '\n';
  out << "workers = " << cfg.workers << '\n';
  out << "master_seed = " << cfg.master_seed << '\n';
  out << "output_dir = " << cfg.output_dir << '\n';
  out << "record_regions = " << (cfg.record_regions ? "true" : "false") << '\n';
  out << "write_region_csv = " << (cfg.write_region_csv ? "true" : "false") << '\n';
  if (!cfg.compare_cells.empty()) {
    out << "compare_cells = ";
    for (std::size_t k = 0; k < cfg.compare_cells.size(); ++k) {
      if (k) out << "; ";
      const CompareCell& cell = cfg.compare_cells[k];
      out << to_string(cell.kind);
      if (cell.kind == StrategyKind::decrease_mix) {
        out << " q=" << format_double(cell.q);
      } else if (cell.kind != StrategyKind::baseline) {
        out << " p=" << format_double(cell.p);
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace epimob
