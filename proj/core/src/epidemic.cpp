#include "epimob/epidemic.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "text_util.hpp"

namespace epimob {

using detail::fail;

std::string to_string(Weekday day) {
  static const char* names[] = {"monday", "tuesday", "wednesday", "thursday",
                                "friday", "saturday", "sunday"};
  return names[static_cast<int>(day)];
}

Weekday weekday_from_string(const std::string& name) {
  static const char* names[] = {"monday", "tuesday", "wednesday", "thursday",
                                "friday", "saturday", "sunday"};
  for (int d = 0; d < 7; ++d) {
    if (name == names[d]) return static_cast<Weekday>(d);
  }
  fail("unknown weekday '" + name + "'");
}

TimeBucket bucket_for_step(std::int64_t step, Weekday start) {
  const auto period = static_cast<DayPeriod>(step % 3);
  const std::int64_t day = step / 3;
  const int dow = static_cast<int>((static_cast<std::int64_t>(start) + day) % 7);
  return {period, dow >= 5 ? DayType::weekend : DayType::weekday};
}

std::int64_t PopulationSetup::total_population() const {
  return std::accumulate(region_population.begin(), region_population.end(), std::int64_t{0});
}

EpidemicState::Totals EpidemicState::totals() const {
  Totals t;
  for (const auto& groups : classes) {
    for (const auto& [region, counts] : groups) {
      t.s += counts.s();
      t.i += counts.i();
      t.r += counts.r();
    }
  }
  return t;
}

EpidemicState::Totals EpidemicState::class_totals(std::int32_t cls) const {
  Totals t;
  for (const auto& [region, counts] : classes[static_cast<std::size_t>(cls - 1)]) {
    t.s += counts.s();
    t.i += counts.i();
    t.r += counts.r();
  }
  return t;
}

void EpidemicState::region_aggregates(std::vector<std::int64_t>& n, std::vector<std::int64_t>& i) const {
  n.assign(static_cast<std::size_t>(region_count) + 1, 0);
  i.assign(static_cast<std::size_t>(region_count) + 1, 0);
  for (const auto& groups : classes) {
    for (const auto& [region, counts] : groups) {
      n[static_cast<std::size_t>(region)] += counts.total();
      i[static_cast<std::size_t>(region)] += counts.i();
    }
  }
}

std::vector<std::int64_t> EpidemicState::region_infective() const {
  std::vector<std::int64_t> out(static_cast<std::size_t>(region_count), 0);
  for (const auto& groups : classes) {
    for (const auto& [region, counts] : groups) {
      out[static_cast<std::size_t>(region - 1)] += counts.i();
    }
  }
  return out;
}

EpidemicState init_state(const PopulationSetup& setup) {
  const std::int32_t m = static_cast<std::int32_t>(setup.region_population.size());
  if (m < 1) fail("init_state: no regions");
  if (!(setup.mobile_fraction >= 0.0 && setup.mobile_fraction <= 1.0)) {
    fail("init_state: mobile_fraction must lie in [0, 1]");
  }
  EpidemicState state;
  state.region_count = m;
  state.classes.resize(static_cast<std::size_t>(m));
  for (std::int32_t r = 1; r <= m; ++r) {
    const std::int64_t pop = setup.region_population[static_cast<std::size_t>(r - 1)];
    if (pop < 0) fail("init_state: negative population in region " + std::to_string(r));
    if (pop == 0) continue;
    const std::int64_t mobile =
        static_cast<std::int64_t>(setup.mobile_fraction * static_cast<double>(pop));
    GroupCounts counts;
    counts.s_mobile = std::min(mobile, pop);
    counts.s_immobile = pop - counts.s_mobile;
    state.classes[static_cast<std::size_t>(r - 1)].emplace_back(r, counts);
  }
  for (const auto& [region, count] : setup.seed_infectives) {
    if (region < 1 || region > m) fail("init_state: seed region out of range: " + std::to_string(region));
    if (count < 0) fail("init_state: negative seed count");
    auto& groups = state.classes[static_cast<std::size_t>(region - 1)];
    if (groups.empty() || setup.region_population[static_cast<std::size_t>(region - 1)] == 0) {
      fail("init_state: seed region " + std::to_string(region) + " has zero population");
    }
    GroupCounts& counts = groups.front().second;
    if (count > counts.s()) {
      fail("init_state: seed count exceeds population of region " + std::to_string(region));
    }
    // seeds come from the mobile sub-population first so the epidemic can travel
    const std::int64_t from_mobile = std::min(count, counts.s_mobile);
    counts.s_mobile -= from_mobile;
    counts.i_mobile += from_mobile;
    const std::int64_t from_immobile = count - from_mobile;
    counts.s_immobile -= from_immobile;
    counts.i_immobile += from_immobile;
  }
  return state;
}

SimulationEngine::SimulationEngine(const MobilityModel& model, const DestinationSampler& sampler,
                                   const EpidemicParams& params, const StrategyConfig& strategy)
    : model_(model), sampler_(sampler), params_(params), strategy_(strategy) {
  if (model.kind != ModelKind::home_antenna_time) {
    fail("SimulationEngine: model kind must be home_antenna_time");
  }
  if (!(params.beta > 0.0 && params.beta <= 1.0)) fail("SimulationEngine: beta must be in (0, 1]");
  if (!(params.g > 0.0 && params.g <= 1.0)) fail("SimulationEngine: g must be in (0, 1]");
  if (params.steps < 0) fail("SimulationEngine: steps must be >= 0");
  if (params.steps_per_day != 3) fail("SimulationEngine: only 3 steps per day are supported");

  active_kind_ = effective_kind(strategy_);
  beta_home_ = strategy_.beta_home < 0.0 ? params_.g : strategy_.beta_home;
  const std::int32_t m = model.antenna_count;

  if (active_kind_ == StrategyKind::cut_communities ||
      (active_kind_ == StrategyKind::decrease_mix && strategy_.scope == DecreaseMixScope::per_community)) {
    if (strategy_.communities == nullptr ||
        static_cast<std::int32_t>(strategy_.communities->community_of.size()) != m) {
      fail("SimulationEngine: strategy requires a community assignment covering every region");
    }
  }
  if (active_kind_ == StrategyKind::decrease_mix) {
    if (!(strategy_.q >= 0.0 && strategy_.q <= 1.0)) fail("SimulationEngine: q must be in [0, 1]");
    mix_group_of_class_.resize(static_cast<std::size_t>(m));
    if (strategy_.scope == DecreaseMixScope::per_community) {
      for (std::int32_t c = 0; c < m; ++c) {
        mix_group_of_class_[static_cast<std::size_t>(c)] =
            strategy_.communities->community_of[static_cast<std::size_t>(c)];
      }
      mix_group_count_ = strategy_.communities->community_count;
      comm_n_.assign(static_cast<std::size_t>(m + 1) * mix_group_count_, 0);
      comm_i_.assign(static_cast<std::size_t>(m + 1) * mix_group_count_, 0);
    } else {
      std::iota(mix_group_of_class_.begin(), mix_group_of_class_.end(), 0);
      mix_group_count_ = m;
    }
  }

  region_n_.assign(static_cast<std::size_t>(m) + 1, 0);
  region_i_.assign(static_cast<std::size_t>(m) + 1, 0);
  dest_s_.assign(static_cast<std::size_t>(m) + 1, 0);
  dest_i_.assign(static_cast<std::size_t>(m) + 1, 0);
  dest_r_.assign(static_cast<std::size_t>(m) + 1, 0);
  touched_flag_.assign(static_cast<std::size_t>(m) + 1, 0);
  if (active_kind_ == StrategyKind::go_home) {
    region_i_loc_.assign(static_cast<std::size_t>(m) + 1, 0);
  }
}

void SimulationEngine::snapshot_regions(const EpidemicState& state) {
  std::fill(region_n_.begin(), region_n_.end(), 0);
  std::fill(region_i_.begin(), region_i_.end(), 0);
  if (active_kind_ == StrategyKind::go_home) std::fill(region_i_loc_.begin(), region_i_loc_.end(), 0);
  const bool mix_comm = active_kind_ == StrategyKind::decrease_mix && !comm_n_.empty();
  if (mix_comm) {
    std::fill(comm_n_.begin(), comm_n_.end(), 0);
    std::fill(comm_i_.begin(), comm_i_.end(), 0);
  }
  for (std::size_t cls0 = 0; cls0 < state.classes.size(); ++cls0) {
    for (const auto& [region, counts] : state.classes[cls0]) {
      const std::int64_t total = counts.total();
      const std::int64_t inf = counts.i();
      region_n_[static_cast<std::size_t>(region)] += total;
      region_i_[static_cast<std::size_t>(region)] += inf;
      if (active_kind_ == StrategyKind::go_home && static_cast<std::size_t>(region - 1) == cls0) {
        region_i_loc_[static_cast<std::size_t>(region)] += inf;
      }
      if (mix_comm) {
        const std::size_t slot = static_cast<std::size_t>(region) * mix_group_count_ +
                                 mix_group_of_class_[cls0];
        comm_n_[slot] += total;
        comm_i_[slot] += inf;
      }
    }
  }
}

StepTrips SimulationEngine::mobility_phase(EpidemicState& state, TimeBucket bucket, RngEngine& rng) {
  const std::int32_t m = state.region_count;
  StepTrips trips;
  const bool hooked =
      active_kind_ == StrategyKind::cut_communities || active_kind_ == StrategyKind::go_home;
  snapshot_regions(state);
  const RegionView view{region_i_, region_n_};

  std::vector<std::pair<std::int32_t, GroupCounts>> rebuilt;
  for (std::int32_t cls = 1; cls <= m; ++cls) {
    auto& groups = state.classes[static_cast<std::size_t>(cls - 1)];
    if (groups.empty()) continue;
    const int ctx = (cls - 1) * TimeBucket::kCount + bucket.index();

    touched_.clear();
    GroupCounts immobile;
    const auto touch = [&](std::int32_t r) {
      if (!touched_flag_[static_cast<std::size_t>(r)]) {
        touched_flag_[static_cast<std::size_t>(r)] = 1;
        touched_.push_back(r);
      }
    };
    const auto land = [&](std::vector<std::int64_t>& dest, std::int32_t r) {
      touch(r);
      ++dest[static_cast<std::size_t>(r)];
    };

    for (const auto& [region, counts] : groups) {
      if (region == cls) {
        immobile.s_immobile = counts.s_immobile;
        immobile.i_immobile = counts.i_immobile;
        immobile.r_immobile = counts.r_immobile;
        if (immobile.s_immobile + immobile.i_immobile + immobile.r_immobile > 0) touch(cls);
      }
      std::int64_t mobile[3] = {counts.s_mobile, counts.i_mobile, counts.r_mobile};
      std::vector<std::int64_t>* dest[3] = {&dest_s_, &dest_i_, &dest_r_};
      for (int comp = 0; comp < 3; ++comp) {
        for (std::int64_t k = 0; k < mobile[comp]; ++k) {
          const std::int32_t draw = sampler_.sample_context(ctx, rng);
          if (draw == region) {
            land(*dest[comp], region);
            continue;
          }
          ++trips.proposed;
          TripOutcome outcome = TripOutcome::proceed;
          if (hooked) outcome = trip_decision(strategy_, region, draw, cls, view, rng);
          switch (outcome) {
            case TripOutcome::proceed:
              land(*dest[comp], draw);
              break;
            case TripOutcome::cancel:
              ++trips.canceled;
              land(*dest[comp], region);
              break;
            case TripOutcome::redirect_home:
              ++trips.redirected;
              land(*dest[comp], cls);
              break;
          }
        }
      }
    }

    std::sort(touched_.begin(), touched_.end());
    rebuilt.clear();
    rebuilt.reserve(touched_.size());
    for (const std::int32_t r : touched_) {
      GroupCounts counts;
      counts.s_mobile = dest_s_[static_cast<std::size_t>(r)];
      counts.i_mobile = dest_i_[static_cast<std::size_t>(r)];
      counts.r_mobile = dest_r_[static_cast<std::size_t>(r)];
      if (r == cls) {
        counts.s_immobile = immobile.s_immobile;
        counts.i_immobile = immobile.i_immobile;
        counts.r_immobile = immobile.r_immobile;
      }
      if (!counts.empty()) rebuilt.emplace_back(r, counts);
      dest_s_[static_cast<std::size_t>(r)] = 0;
      dest_i_[static_cast<std::size_t>(r)] = 0;
      dest_r_[static_cast<std::size_t>(r)] = 0;
      touched_flag_[static_cast<std::size_t>(r)] = 0;
    }
    groups.swap(rebuilt);
  }
  return trips;
}

double SimulationEngine::lambda_for_group(std::int32_t region, std::int32_t cls,
                                          const GroupCounts& counts) const {
  const std::int64_t n = region_n_[static_cast<std::size_t>(region)];
  if (n <= 0) return 0.0;
  const std::int64_t i = region_i_[static_cast<std::size_t>(region)];
  switch (active_kind_) {
    case StrategyKind::baseline:
    case StrategyKind::cut_communities:
      return params_.beta * static_cast<double>(i) / static_cast<double>(n);
    case StrategyKind::decrease_mix: {
      std::int64_t n_c, i_c;
      if (comm_n_.empty()) {  // per-class scope: the group is its own community
        n_c = counts.total();
        i_c = counts.i();
      } else {
        const std::size_t slot = static_cast<std::size_t>(region) * mix_group_count_ +
                                 mix_group_of_class_[static_cast<std::size_t>(cls - 1)];
        n_c = comm_n_[slot];
        i_c = comm_i_[slot];
      }
      return decreasemix_lambda(params_.beta, strategy_.q, n_c, i_c, n, i);
    }
    case StrategyKind::go_home: {
      const std::int64_t i_loc = region_i_loc_[static_cast<std::size_t>(region)];
      const GoHomeLambdas lambdas = gohome_lambdas(params_.beta, beta_home_, i_loc, i - i_loc, n);
      return region == cls ? lambdas.loc : lambdas.vis;
    }
  }
  fail("unreachable");
}

void SimulationEngine::epidemic_phase(EpidemicState& state, RngEngine& rng) {
  snapshot_regions(state);  // lambda is fixed at phase start
  for (std::int32_t cls = 1; cls <= state.region_count; ++cls) {
    for (auto& [region, counts] : state.classes[static_cast<std::size_t>(cls - 1)]) {
      const double lambda = lambda_for_group(region, cls, counts);
      const std::int64_t inf_m = binomial_draw(rng, counts.s_mobile, lambda);
      const std::int64_t inf_im = binomial_draw(rng, counts.s_immobile, lambda);
      const std::int64_t rec_m = binomial_draw(rng, counts.i_mobile, params_.g);
      const std::int64_t rec_im = binomial_draw(rng, counts.i_immobile, params_.g);
      counts.s_mobile -= inf_m;
      counts.s_immobile -= inf_im;
      counts.i_mobile += inf_m - rec_m;
      counts.i_immobile += inf_im - rec_im;
      counts.r_mobile += rec_m;
      counts.r_immobile += rec_im;
    }
  }
}

RunRecord SimulationEngine::run(const PopulationSetup& setup, std::uint64_t rng_seed,
                                const RunOptions& options) {
  if (static_cast<std::int32_t>(setup.region_population.size()) != model_.antenna_count) {
    fail("run: population covers " + std::to_string(setup.region_population.size()) +
         " regions but the model has " + std::to_string(model_.antenna_count) + " antennas");
  }
  RngEngine rng = make_engine(rng_seed);
  EpidemicState state = init_state(setup);

  std::vector<std::int64_t> class_totals;
  if (options.validate) {
    class_totals.reserve(state.classes.size());
    for (std::size_t c = 0; c < state.classes.size(); ++c) {
      class_totals.push_back(state.class_totals(static_cast<std::int32_t>(c + 1)).n());
    }
  }

  RunRecord record;
  record.total_population = setup.total_population();
  record.steps_per_day = params_.steps_per_day;
  record.steps.reserve(static_cast<std::size_t>(params_.steps) + 1);

  const auto push_row = [&](const StepTrips& trips) {
    const EpidemicState::Totals t = state.totals();
    record.steps.push_back(StepRow{t.s, t.i, t.r, trips});
    if (options.record_regions) record.region_infective.push_back(state.region_infective());
  };
  push_row(StepTrips{});

  for (std::int64_t n = 0; n < params_.steps; ++n) {
    const TimeBucket bucket = bucket_for_step(n, params_.start_day);
    const StepTrips trips = mobility_phase(state, bucket, rng);
    if (options.validate) validate_state(state, class_totals);
    epidemic_phase(state, rng);
    if (options.validate) validate_state(state, class_totals);
    ++state.step;
    push_row(trips);
  }
  return record;
}

std::vector<StepTrips> RunRecord::triplogs() const {
  std::vector<StepTrips> out;
  out.reserve(steps.empty() ? 0 : steps.size() - 1);
  for (std::size_t k = 1; k < steps.size(); ++k) out.push_back(steps[k].trips);
  return out;
}

RunRecord run_simulation(const PopulationSetup& setup, const MobilityModel& model,
                         const DestinationSampler& sampler, const EpidemicParams& params,
                         const StrategyConfig& strategy, std::uint64_t rng_seed,
                         const RunOptions& options) {
  SimulationEngine engine(model, sampler, params, strategy);
  return engine.run(setup, rng_seed, options);
}

std::vector<std::int64_t> read_population_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("read_population_csv: cannot open '" + path + "'");
  std::string line;
  bool first = true;
  std::vector<std::pair<std::int32_t, std::int64_t>> rows;
  while (std::getline(in, line)) {
    std::string_view sv = detail::trim(line);
    if (sv.empty()) continue;
    if (first) {
      first = false;
      if (sv == "antenna_id,population") continue;
    }
    const auto fields = detail::split(sv, ',');
    std::int32_t antenna = 0;
    std::int64_t pop = 0;
    if (fields.size() != 2 || !detail::parse_i32(fields[0], antenna) || !detail::parse_i64(fields[1], pop)) {
      fail("read_population_csv: malformed line '" + std::string(sv) + "'");
    }
    if (pop < 0) fail("read_population_csv: negative population for antenna " + std::to_string(antenna));
    rows.emplace_back(antenna, pop);
  }
  std::sort(rows.begin(), rows.end());
  std::vector<std::int64_t> out;
  out.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].first != static_cast<std::int32_t>(k + 1)) {
      fail("read_population_csv: antenna ids must cover 1..M exactly once");
    }
    out.push_back(rows[k].second);
  }
  if (out.empty()) fail("read_population_csv: no rows in '" + path + "'");
  return out;
}

void write_population_csv(const std::string& path, const std::vector<std::int64_t>& populations) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("write_population_csv: cannot open '" + path + "'");
  out << "antenna_id,population\n";
  for (std::size_t a = 0; a < populations.size(); ++a) out << (a + 1) << ',' << populations[a] << '\n';
}

void validate_state(const EpidemicState& state, const std::vector<std::int64_t>& expected_class_totals) {
  if (state.classes.size() != expected_class_totals.size()) {
    fail("validate_state: class count changed");
  }
  for (std::size_t c = 0; c < state.classes.size(); ++c) {
    std::int64_t total = 0;
    for (const auto& [region, counts] : state.classes[c]) {
      if (counts.s_mobile < 0 || counts.s_immobile < 0 || counts.i_mobile < 0 ||
          counts.i_immobile < 0 || counts.r_mobile < 0 || counts.r_immobile < 0) {
        fail("validate_state: negative count in class " + std::to_string(c + 1));
      }
      if (region != static_cast<std::int32_t>(c + 1) &&
          counts.s_immobile + counts.i_immobile + counts.r_immobile > 0) {
        fail("validate_state: immobile individuals of class " + std::to_string(c + 1) +
             " found outside their home region");
      }
      total += counts.total();
    }
    if (total != expected_class_totals[c]) {
      fail("validate_state: class " + std::to_string(c + 1) + " total changed from " +
           std::to_string(expected_class_totals[c]) + " to " + std::to_string(total));
    }
  }
}

}  // namespace epimob
