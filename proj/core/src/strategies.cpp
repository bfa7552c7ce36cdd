#include "epimob/strategies.hpp"

#include <algorithm>
#include <stdexcept>

#include "text_util.hpp"

namespace epimob {

using detail::fail;

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::baseline: return "baseline";
    case StrategyKind::cut_communities: return "cutcommunities";
    case StrategyKind::decrease_mix: return "decreasemix";
    case StrategyKind::go_home: return "gohome";
  }
  fail("unknown strategy kind");
}

StrategyKind strategy_kind_from_string(const std::string& name) {
  if (name == "baseline") return StrategyKind::baseline;
  if (name == "cutcommunities") return StrategyKind::cut_communities;
  if (name == "decreasemix") return StrategyKind::decrease_mix;
  if (name == "gohome") return StrategyKind::go_home;
  fail("unknown strategy '" + name + "'");
}

StrategyKind effective_kind(const StrategyConfig& cfg) {
  if ((cfg.kind == StrategyKind::cut_communities || cfg.kind == StrategyKind::go_home) && cfg.p <= 0.0) {
    return StrategyKind::baseline;
  }
  return cfg.kind;
}

TripOutcome cut_communities_decision(std::int32_t src, std::int32_t dst, const StrategyConfig& cfg,
                                     const RegionView& view, RngEngine& rng) {
  if (cfg.p <= 0.0) return TripOutcome::proceed;
  const auto& comm = cfg.communities->community_of;
  if (comm[static_cast<std::size_t>(src - 1)] == comm[static_cast<std::size_t>(dst - 1)]) {
    return TripOutcome::proceed;
  }
  if (view.infective[static_cast<std::size_t>(src)] < 1 &&
      view.infective[static_cast<std::size_t>(dst)] < 1) {
    return TripOutcome::proceed;
  }
  if (cfg.p >= 1.0) return TripOutcome::cancel;
  return uniform01(rng) < cfg.p ? TripOutcome::cancel : TripOutcome::proceed;
}

TripOutcome gohome_decision(std::int32_t src, std::int32_t dst, const StrategyConfig& cfg,
                            const RegionView& view, RngEngine& rng) {
  if (cfg.p <= 0.0) return TripOutcome::proceed;
  const auto proportion = [&](std::int32_t region) {
    const std::int64_t n = view.population[static_cast<std::size_t>(region)];
    if (n <= 0) return 0.0;
    return static_cast<double>(view.infective[static_cast<std::size_t>(region)]) / static_cast<double>(n);
  };
  const double at_src = proportion(src);
  const double at_dst = proportion(dst);
  const bool trigger = cfg.gohome_inverted ? at_dst > at_src : at_dst < at_src;
  if (!trigger) return TripOutcome::proceed;
  if (cfg.p >= 1.0) return TripOutcome::redirect_home;
  return uniform01(rng) < cfg.p ? TripOutcome::redirect_home : TripOutcome::proceed;
}

TripOutcome trip_decision(const StrategyConfig& cfg, std::int32_t src, std::int32_t dst,
                          std::int32_t home_region, const RegionView& view, RngEngine& rng) {
  (void)home_region;
  switch (cfg.kind) {
    case StrategyKind::baseline:
    case StrategyKind::decrease_mix:
      return TripOutcome::proceed;
    case StrategyKind::cut_communities:
      return cut_communities_decision(src, dst, cfg, view, rng);
    case StrategyKind::go_home:
      return gohome_decision(src, dst, cfg, view, rng);
  }
  fail("unreachable");
}

BetaSplit decreasemix_beta_split(double q, std::int64_t n_class, std::int64_t n_region, double beta) {
  double own = (1.0 - q + q * static_cast<double>(n_class) / static_cast<double>(n_region)) * beta;
  const double other = beta - own;
  own = beta - other;  // representable complement: own + other == beta bit-exactly
  return {own, other};
}

double decreasemix_lambda(double beta, double q, std::int64_t n_class, std::int64_t i_class,
                          std::int64_t n_region, std::int64_t i_region) {
  if (n_region <= 0) return 0.0;
  if (q == 1.0) {
    // algebraic reduction to random mixing; kept exact so q = 1 trajectories
    // match the baseline bit for bit
    return beta * static_cast<double>(i_region) / static_cast<double>(n_region);
  }
  const BetaSplit split = decreasemix_beta_split(q, n_class, n_region, beta);
  const std::int64_t n_other = n_region - n_class;
  const std::int64_t i_other = i_region - i_class;
  double lambda = 0.0;
  if (n_class > 0) lambda += split.own * static_cast<double>(i_class) / static_cast<double>(n_class);
  if (n_other > 0) lambda += split.other * static_cast<double>(i_other) / static_cast<double>(n_other);
  return lambda;
}

GoHomeLambdas gohome_lambdas(double beta, double beta_home, std::int64_t i_loc, std::int64_t i_vis,
                             std::int64_t n_region) {
  if (n_region <= 0) return {0.0, 0.0};
  const double n = static_cast<double>(n_region);
  GoHomeLambdas out;
  out.loc = beta_home * static_cast<double>(i_loc + i_vis) / n;
  out.vis = beta * static_cast<double>(i_vis) / n + beta_home * static_cast<double>(i_loc) / n;
  return out;
}

AffectedSummary affected_movements(std::span<const StepTrips> triplogs) {
  AffectedSummary summary;
  summary.per_step.reserve(triplogs.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < triplogs.size(); ++k) {
    const StepTrips& t = triplogs[k];
    const double prop =
        t.proposed > 0 ? static_cast<double>(t.affected()) / static_cast<double>(t.proposed) : 0.0;
    summary.per_step.push_back(prop);
    sum += prop;
    if (prop > summary.max) {
      summary.max = prop;
      summary.argmax_step = static_cast<std::int64_t>(k);
    }
  }
  summary.mean = summary.per_step.empty() ? 0.0 : sum / static_cast<double>(summary.per_step.size());
  return summary;
}

}  // namespace epimob
