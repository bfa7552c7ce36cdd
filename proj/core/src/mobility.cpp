#include "epimob/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "text_util.hpp"

namespace epimob {

using detail::fail;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::home_antenna_time: return "home_antenna_time";
    case ModelKind::subpref_time: return "subpref_time";
    case ModelKind::time_only: return "time_only";
    case ModelKind::markov: return "markov";
  }
  fail("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "home_antenna_time") return ModelKind::home_antenna_time;
  if (name == "subpref_time") return ModelKind::subpref_time;
  if (name == "time_only") return ModelKind::time_only;
  if (name == "markov") return ModelKind::markov;
  fail("unknown model kind '" + name + "'");
}

double ContextDist::prob(std::int32_t antenna) const {
  const auto it = std::lower_bound(entries.begin(), entries.end(), antenna,
                                   [](const auto& e, std::int32_t a) { return e.first < a; });
  if (it != entries.end() && it->first == antenna) return it->second;
  return tail;
}

double ContextDist::entry_mass() const {
  double s = 0.0;
  for (const auto& [a, w] : entries) s += w;
  return s;
}

int MobilityModel::context_index(std::int32_t home_antenna, TimeBucket bucket) const {
  switch (kind) {
    case ModelKind::home_antenna_time:
      if (home_antenna < 1 || home_antenna > antenna_count) fail("context_index: home antenna out of range");
      return (home_antenna - 1) * TimeBucket::kCount + bucket.index();
    case ModelKind::subpref_time: {
      if (home_antenna < 1 || home_antenna > antenna_count) fail("context_index: home antenna out of range");
      if (subpref_of_antenna.empty()) fail("context_index: model has no sub-prefecture map");
      const std::int32_t sp = subpref_of_antenna[home_antenna - 1];
      return (sp - 1) * TimeBucket::kCount + bucket.index();
    }
    case ModelKind::time_only:
      return bucket.index();
    case ModelKind::markov:
      fail("context_index: markov model is conditioned on the previous antenna");
  }
  fail("unreachable");
}

int MobilityModel::markov_context(std::int32_t prev_antenna) const {
  if (kind != ModelKind::markov) fail("markov_context: not a markov model");
  if (prev_antenna < 1 || prev_antenna > antenna_count) fail("markov_context: antenna out of range");
  return prev_antenna - 1;
}

std::int32_t HomeAssignment::at(const std::string& user) const {
  const auto it = home_of.find(user);
  if (it == home_of.end()) fail("home assignment: unknown user '" + user + "'");
  return it->second;
}

HomeAssignment infer_homes(const Trace& train) {
  if (train.users.empty()) fail("infer_homes: empty trace");
  HomeAssignment homes;
  homes.home_of.reserve(train.users.size());
  std::vector<std::int64_t> night_counts(static_cast<std::size_t>(train.antenna_count) + 1, 0);
  std::vector<std::int64_t> all_counts(static_cast<std::size_t>(train.antenna_count) + 1, 0);
  for (const auto& u : train.users) {
    std::fill(night_counts.begin(), night_counts.end(), 0);
    std::fill(all_counts.begin(), all_counts.end(), 0);
    for (const auto& rec : u.records) {
      ++all_counts[rec.antenna];
      if (bucket_of_time(rec.timestamp).period == DayPeriod::night) ++night_counts[rec.antenna];
    }
    const auto argmax = [&](const std::vector<std::int64_t>& counts) -> std::int32_t {
      std::int32_t best = 0;
      std::int64_t best_count = 0;
      for (std::int32_t a = 1; a <= train.antenna_count; ++a) {
        if (counts[a] > best_count) {  // strict: ties keep the lowest id
          best_count = counts[a];
          best = a;
        }
      }
      return best;
    };
    std::int32_t home = argmax(night_counts);
    if (home == 0) home = argmax(all_counts);
    if (home == 0) continue;  // user with no records at all
    homes.home_of.emplace(u.user, home);
  }
  return homes;
}

namespace {

int context_domain_size(ModelKind kind, std::int32_t antennas, std::int32_t subprefs) {
  switch (kind) {
    case ModelKind::home_antenna_time: return antennas * TimeBucket::kCount;
    case ModelKind::subpref_time: return subprefs * TimeBucket::kCount;
    case ModelKind::time_only: return TimeBucket::kCount;
    case ModelKind::markov: return antennas;
  }
  fail("unreachable");
}

}  // namespace

MobilityModel fit(const Trace& train, const HomeAssignment& homes, ModelKind kind, double alpha) {
  if (!(alpha > 0.0)) fail("fit: alpha must be > 0");
  if (kind == ModelKind::subpref_time && !train.has_subpref_map()) {
    fail("fit: subpref_time requires a sub-prefecture map");
  }
  MobilityModel model;
  model.kind = kind;
  model.alpha = alpha;
  model.antenna_count = train.antenna_count;
  model.subpref_count = train.subpref_count;
  model.subpref_of_antenna = train.subpref_of_antenna;

  const int n_contexts = context_domain_size(kind, model.antenna_count, model.subpref_count);

  // (context, antenna) observation pairs, then sort + run-length encode
  std::vector<std::pair<std::int32_t, std::int32_t>> obs;
  obs.reserve(static_cast<std::size_t>(train.record_count()));
  for (const auto& u : train.users) {
    if (kind == ModelKind::markov) {
      for (std::size_t k = 1; k < u.records.size(); ++k) {
        obs.emplace_back(u.records[k - 1].antenna - 1, u.records[k].antenna);
      }
      continue;
    }
    std::int32_t ctx_base = 0;
    if (kind == ModelKind::home_antenna_time || kind == ModelKind::subpref_time) {
      const std::int32_t home = homes.at(u.user);
      ctx_base = kind == ModelKind::home_antenna_time
                     ? (home - 1) * TimeBucket::kCount
                     : (train.subpref_of_antenna[home - 1] - 1) * TimeBucket::kCount;
    }
    for (const auto& rec : u.records) {
      obs.emplace_back(ctx_base + bucket_of_time(rec.timestamp).index(), rec.antenna);
    }
  }
  std::sort(obs.begin(), obs.end());

  model.contexts.assign(static_cast<std::size_t>(n_contexts), ContextDist{});
  const double m = static_cast<double>(model.antenna_count);
  std::size_t pos = 0;
  for (int ctx = 0; ctx < n_contexts; ++ctx) {
    const std::size_t begin = pos;
    std::int64_t total = 0;
    std::vector<std::pair<std::int32_t, std::int64_t>> counts;
    while (pos < obs.size() && obs[pos].first == ctx) {
      const std::int32_t antenna = obs[pos].second;
      std::int64_t c = 0;
      while (pos < obs.size() && obs[pos].first == ctx && obs[pos].second == antenna) {
        ++c;
        ++pos;
      }
      counts.emplace_back(antenna, c);
      total += c;
    }
    (void)begin;
    ContextDist& dist = model.contexts[static_cast<std::size_t>(ctx)];
    const double denom = static_cast<double>(total) + alpha * m;
    dist.tail = alpha / denom;  // == 1/m when total == 0
    dist.entries.reserve(counts.size());
    for (const auto& [antenna, c] : counts) {
      dist.entries.emplace_back(antenna, (static_cast<double>(c) + alpha) / denom);
    }
  }
  return model;
}

std::vector<double> predict(const MobilityModel& model, int context_index) {
  if (context_index < 0 || static_cast<std::size_t>(context_index) >= model.contexts.size()) {
    fail("predict: context index out of range");
  }
  const ContextDist& dist = model.contexts[static_cast<std::size_t>(context_index)];
  std::vector<double> p(static_cast<std::size_t>(model.antenna_count), dist.tail);
  for (const auto& [antenna, w] : dist.entries) p[static_cast<std::size_t>(antenna - 1)] = w;
  return p;
}

double score(const MobilityModel& model, int context_index, std::int32_t antenna) {
  if (context_index < 0 || static_cast<std::size_t>(context_index) >= model.contexts.size()) {
    fail("score: context index out of range");
  }
  if (antenna < 1 || antenna > model.antenna_count) fail("score: antenna out of range");
  return model.contexts[static_cast<std::size_t>(context_index)].prob(antenna);
}

EvalReport evaluate(const MobilityModel& model, const Trace& test, const HomeAssignment& homes,
                    const Trace* train) {
  EvalReport report;
  report.kind = model.kind;
  double sum = 0.0;
  std::int64_t n = 0;

  if (model.kind == ModelKind::markov) {
    if (train == nullptr) fail("evaluate: markov evaluation needs the training trace");
    // Merge each user's train+test records into one timeline; each test record
    // is scored against its true predecessor, the first-ever record is skipped.
    std::unordered_map<std::string, const UserTrace*> train_of;
    train_of.reserve(train->users.size());
    for (const auto& u : train->users) train_of.emplace(u.user, &u);
    struct Obs {
      std::int64_t t;
      std::int32_t antenna;
      bool is_test;
    };
    std::vector<Obs> timeline;
    for (const auto& u : test.users) {
      timeline.clear();
      if (const auto it = train_of.find(u.user); it != train_of.end()) {
        for (const auto& rec : it->second->records) timeline.push_back({rec.timestamp, rec.antenna, false});
      }
      for (const auto& rec : u.records) timeline.push_back({rec.timestamp, rec.antenna, true});
      std::stable_sort(timeline.begin(), timeline.end(),
                       [](const Obs& a, const Obs& b) { return a.t < b.t; });
      for (std::size_t k = 1; k < timeline.size(); ++k) {
        if (!timeline[k].is_test) continue;
        const int ctx = model.markov_context(timeline[k - 1].antenna);
        sum += std::log(score(model, ctx, timeline[k].antenna));
        ++n;
      }
    }
  } else {
    for (const auto& u : test.users) {
      std::int32_t home = 0;
      if (model.kind != ModelKind::time_only) home = homes.at(u.user);
      for (const auto& rec : u.records) {
        const int ctx = model.context_index(model.kind == ModelKind::time_only ? 1 : home,
                                            bucket_of_time(rec.timestamp));
        sum += std::log(score(model, ctx, rec.antenna));
        ++n;
      }
    }
  }
  if (n == 0) fail("evaluate: empty test set");
  report.avg_loglik = sum / static_cast<double>(n);
  report.n_test = n;
  return report;
}

namespace {

/// r-th (0-based) antenna id in [1, m] that is absent from the sorted support.
std::int32_t nth_absent(const std::vector<std::pair<std::int32_t, double>>& support, std::int32_t m,
                        std::int64_t r) {
  std::int32_t lo = 1, hi = m;
  // absent(x) = x - |support <= x| is non-decreasing; find smallest x with absent(x) = r + 1
  while (lo < hi) {
    const std::int32_t mid = lo + (hi - lo) / 2;
    const auto it = std::upper_bound(support.begin(), support.end(), mid,
                                     [](std::int32_t a, const auto& e) { return a < e.first; });
    const std::int64_t absent = mid - static_cast<std::int64_t>(it - support.begin());
    if (absent >= r + 1) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

std::int32_t nth_absent_ids(const std::vector<std::int32_t>& support, std::int32_t m, std::int64_t r) {
  std::int32_t lo = 1, hi = m;
  while (lo < hi) {
    const std::int32_t mid = lo + (hi - lo) / 2;
    const auto it = std::upper_bound(support.begin(), support.end(), mid);
    const std::int64_t absent = mid - static_cast<std::int64_t>(it - support.begin());
    if (absent >= r + 1) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

}  // namespace

std::int32_t sample_destination(const MobilityModel& model, std::int32_t home_antenna,
                                TimeBucket bucket, RngEngine& rng) {
  if (model.kind != ModelKind::home_antenna_time) {
    fail("sample_destination: model kind must be home_antenna_time");
  }
  const ContextDist& dist = model.contexts[static_cast<std::size_t>(model.context_index(home_antenna, bucket))];
  const double u = uniform01(rng);
  double cum = 0.0;
  for (const auto& [antenna, w] : dist.entries) {
    cum += w;
    if (u < cum) return antenna;
  }
  const std::int64_t absent_count = model.antenna_count - static_cast<std::int64_t>(dist.entries.size());
  if (absent_count <= 0 || dist.tail <= 0.0) {
    return dist.entries.empty() ? 1 : dist.entries.back().first;  // fp slack lands on the last entry
  }
  std::int64_t r = static_cast<std::int64_t>((u - cum) / dist.tail);
  if (r >= absent_count) r = absent_count - 1;
  return nth_absent(dist.entries, model.antenna_count, r);
}

DestinationSampler::DestinationSampler(const MobilityModel& model) {
  if (model.kind != ModelKind::home_antenna_time) {
    fail("DestinationSampler: model kind must be home_antenna_time");
  }
  antenna_count_ = model.antenna_count;
  contexts_.resize(model.contexts.size());
  std::vector<double> weights;
  std::vector<std::int32_t> small, large;
  for (std::size_t c = 0; c < model.contexts.size(); ++c) {
    const ContextDist& dist = model.contexts[c];
    ContextSampler& cs = contexts_[c];
    const std::size_t k = dist.entries.size();
    const std::int64_t absent = antenna_count_ - static_cast<std::int64_t>(k);
    cs.support.reserve(k);
    weights.clear();
    double mass = 0.0;
    for (const auto& [antenna, w] : dist.entries) {
      cs.support.push_back(antenna);
      weights.push_back(w);
      mass += w;
    }
    cs.entry_mass = (absent <= 0 || dist.tail <= 0.0) ? 1.0 : mass;
    if (k == 0) continue;

    // Vose alias table over the support weights
    cs.accept.assign(k, 1.0);
    cs.alias.assign(k, 0);
    const double scale = static_cast<double>(k) / mass;
    std::vector<double> scaled(k);
    small.clear();
    large.clear();
    for (std::size_t j = 0; j < k; ++j) {
      scaled[j] = weights[j] * scale;
      (scaled[j] < 1.0 ? small : large).push_back(static_cast<std::int32_t>(j));
    }
    while (!small.empty() && !large.empty()) {
      const std::int32_t s = small.back();
      small.pop_back();
      const std::int32_t l = large.back();
      large.pop_back();
      cs.accept[static_cast<std::size_t>(s)] = scaled[s];
      cs.alias[static_cast<std::size_t>(s)] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      (scaled[l] < 1.0 ? small : large).push_back(l);
    }
    // entries left in either stack have weight 1 after fp rounding
  }
}

std::int32_t DestinationSampler::sample_context(int context_index, RngEngine& rng) const {
  const ContextSampler& cs = contexts_[static_cast<std::size_t>(context_index)];
  const double u = uniform01(rng);
  if (u < cs.entry_mass || cs.support.empty()) {
    if (cs.support.empty()) {
      // context with no support: uniform over all antennas
      return static_cast<std::int32_t>(uniform_below(rng, static_cast<std::uint64_t>(antenna_count_))) + 1;
    }
    const std::size_t k = cs.support.size();
    const std::size_t slot = static_cast<std::size_t>(uniform_below(rng, k));
    const bool keep = uniform01(rng) < cs.accept[slot];
    return cs.support[keep ? slot : static_cast<std::size_t>(cs.alias[slot])];
  }
  const std::int64_t absent = antenna_count_ - static_cast<std::int64_t>(cs.support.size());
  const std::int64_t r = static_cast<std::int64_t>(uniform_below(rng, static_cast<std::uint64_t>(absent)));
  return nth_absent_ids(cs.support, antenna_count_, r);
}

namespace {

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

constexpr char kModelMagic[6] = {'E', 'P', 'M', 'O', 'B', '1'};

}  // namespace

void save_model(const std::string& path, const MobilityModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("save_model: cannot open '" + path + "'");
  out.write(kModelMagic, sizeof(kModelMagic));
  put(out, static_cast<std::int8_t>(model.kind));
  put(out, model.alpha);
  put(out, model.antenna_count);
  put(out, model.subpref_count);
  put(out, static_cast<std::int32_t>(model.subpref_of_antenna.size()));
  for (const std::int32_t sp : model.subpref_of_antenna) put(out, sp);
  put(out, static_cast<std::int64_t>(model.contexts.size()));
  for (const auto& ctx : model.contexts) {
    put(out, ctx.tail);
    put(out, static_cast<std::int64_t>(ctx.entries.size()));
    for (const auto& [antenna, w] : ctx.entries) {
      put(out, antenna);
      put(out, w);
    }
  }
  if (!out) fail("save_model: write failed for '" + path + "'");
}

MobilityModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("load_model: cannot open '" + path + "'");
  char magic[6];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    fail("load_model: '" + path + "' is not an epimob model file");
  }
  MobilityModel model;
  model.kind = static_cast<ModelKind>(get<std::int8_t>(in));
  model.alpha = get<double>(in);
  model.antenna_count = get<std::int32_t>(in);
  model.subpref_count = get<std::int32_t>(in);
  const std::int32_t map_size = get<std::int32_t>(in);
  model.subpref_of_antenna.resize(static_cast<std::size_t>(map_size));
  for (auto& sp : model.subpref_of_antenna) sp = get<std::int32_t>(in);
  const std::int64_t n_ctx = get<std::int64_t>(in);
  model.contexts.resize(static_cast<std::size_t>(n_ctx));
  for (auto& ctx : model.contexts) {
    ctx.tail = get<double>(in);
    const std::int64_t k = get<std::int64_t>(in);
    ctx.entries.resize(static_cast<std::size_t>(k));
    for (auto& [antenna, w] : ctx.entries) {
      antenna = get<std::int32_t>(in);
      w = get<double>(in);
    }
  }
  if (!in) fail("load_model: truncated file '" + path + "'");
  return model;
}

namespace {

void set_context(MobilityModel& model, int ctx,
                 std::vector<std::pair<std::int32_t, double>> entries, double tail) {
  std::sort(entries.begin(), entries.end());
  auto& dist = model.contexts[static_cast<std::size_t>(ctx)];
  dist.entries = std::move(entries);
  dist.tail = tail;
}

}  // namespace

MobilityModel make_planted_model(const PlantedSpec& spec) {
  if (spec.antennas < 1 || spec.subprefs < 1) fail("planted model: antennas and subprefs must be >= 1");
  if (spec.antennas % spec.subprefs != 0) fail("planted model: subprefs must divide antennas");
  const auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(spec.night_home_mass) || !in_unit(spec.day_home_mass) || !in_unit(spec.day_work_mass) ||
      !in_unit(spec.weekend_home_mass) || !in_unit(spec.weekend_work_mass) || !in_unit(spec.leak_fraction)) {
    fail("planted model: masses must lie in [0, 1]");
  }
  if (spec.day_home_mass + spec.day_work_mass > 1.0 || spec.weekend_home_mass + spec.weekend_work_mass > 1.0) {
    fail("planted model: home + work mass must not exceed 1");
  }
  const std::int32_t m = spec.antennas;
  const std::int32_t block = m / spec.subprefs;
  const int hubs = std::min<int>(spec.hubs_per_subpref, block);

  MobilityModel model;
  model.kind = ModelKind::home_antenna_time;
  model.alpha = 0.0;  // exact planted probabilities, no smoothing
  model.antenna_count = m;
  model.subpref_count = spec.subprefs;
  model.subpref_of_antenna.resize(static_cast<std::size_t>(m));
  for (std::int32_t a = 0; a < m; ++a) model.subpref_of_antenna[static_cast<std::size_t>(a)] = a / block + 1;
  model.contexts.resize(static_cast<std::size_t>(m) * TimeBucket::kCount);

  for (std::int32_t home = 1; home <= m; ++home) {
    const std::int32_t sp = model.subpref_of_antenna[static_cast<std::size_t>(home - 1)];
    const std::int32_t sp_first = (sp - 1) * block + 1;
    for (int b = 0; b < TimeBucket::kCount; ++b) {
      const auto period = static_cast<DayPeriod>(b / 2);
      const auto daytype = static_cast<DayType>(b % 2);
      double home_mass, work_mass;
      if (period == DayPeriod::night) {
        home_mass = spec.night_home_mass;
        work_mass = 0.0;
      } else if (daytype == DayType::weekday) {
        home_mass = spec.day_home_mass;
        work_mass = spec.day_work_mass;
      } else {
        home_mass = spec.weekend_home_mass;
        work_mass = spec.weekend_work_mass;
      }
      const double residual = 1.0 - home_mass - work_mass;
      const double leak = spec.subprefs > 1 ? residual * spec.leak_fraction : 0.0;
      const double local_spread = residual - leak;

      // per-antenna mass over the whole country; compacted to entries below
      std::vector<double> p(static_cast<std::size_t>(m), 0.0);
      p[static_cast<std::size_t>(home - 1)] += home_mass;
      if (work_mass > 0.0) {
        for (int h = 0; h < hubs; ++h) {
          std::int32_t hub;
          if (spec.hub_scope == HubScope::per_subpref) {
            hub = sp_first + h;
          } else {
            // one disjoint hub set per bucket, spread across the country
            const std::int32_t stride = std::max(1, m / (TimeBucket::kCount * hubs));
            hub = static_cast<std::int32_t>(((b * hubs + h) * stride) % m) + 1;
          }
          p[static_cast<std::size_t>(hub - 1)] += work_mass / hubs;
        }
      }
      if (block > 1) {
        const double share = local_spread / (block - 1);
        for (std::int32_t j = sp_first; j < sp_first + block; ++j) {
          if (j != home) p[static_cast<std::size_t>(j - 1)] += share;
        }
      } else {
        p[static_cast<std::size_t>(home - 1)] += local_spread;
      }
      std::vector<std::pair<std::int32_t, double>> entries;
      const double tail_each = m > block ? leak / (m - block) : 0.0;
      for (std::int32_t j = 1; j <= m; ++j) {
        const bool in_block = j >= sp_first && j < sp_first + block;
        double mass = p[static_cast<std::size_t>(j - 1)];
        if (!in_block && mass > 0.0) mass += tail_each;  // hubs outside the block sit on top of the leak
        if (mass > 0.0) entries.emplace_back(j, mass);
      }
      set_context(model, (home - 1) * TimeBucket::kCount + b, std::move(entries), tail_each);
    }
  }
  return model;
}

MobilityModel make_point_mass_model(std::int32_t antennas) {
  if (antennas < 1) fail("point mass model: antennas must be >= 1");
  MobilityModel model;
  model.kind = ModelKind::home_antenna_time;
  model.alpha = 0.0;
  model.antenna_count = antennas;
  model.subpref_count = 1;
  model.subpref_of_antenna.assign(static_cast<std::size_t>(antennas), 1);
  model.contexts.resize(static_cast<std::size_t>(antennas) * TimeBucket::kCount);
  for (std::int32_t home = 1; home <= antennas; ++home) {
    for (int b = 0; b < TimeBucket::kCount; ++b) {
      set_context(model, (home - 1) * TimeBucket::kCount + b, {{home, 1.0}}, 0.0);
    }
  }
  return model;
}

}  // namespace epimob
