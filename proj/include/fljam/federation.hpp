#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fljam/adversary.hpp"
#include "fljam/channel.hpp"
#include "fljam/jam.hpp"
#include "fljam/model.hpp"
#include "fljam/rng.hpp"
#include "fljam/scenario.hpp"

namespace fljam {

struct ClientState {
  int client_id = 0;
  Mlp weights;
  DataMatrix data;
  int speed = 1;               // rounds per local update
  int rounds_until_ready = 0;  // 0 = trains and transmits this round
  OptState opt;

  // A client with speed s participates (trains, uplinks, receives the
  // broadcast) in rounds s, 2s, 3s, ...
  bool participates(int round) const { return round % speed == 0; }
};

struct RoundOutcome {
  int round_index = 0;
  std::vector<int> uplink_targets;    // attempted jams this round
  std::vector<int> downlink_targets;
  std::vector<int> uplink_jammed;     // attempts that succeeded
  std::vector<int> downlink_jammed;
  std::vector<int> uplink_delivered;  // models that reached the server
  Mlp global_weights;
  double global_accuracy = 0.0;
  std::vector<double> local_accuracies;  // post-train models on the test set
  int budget_spent = 0;                  // attempted jam actions
};

struct ServerState {
  Mlp weights;
  std::vector<std::optional<Mlp>> cache;  // latest received model per client
};

namespace detail {

inline bool contains(const std::vector<int>& v, int x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace detail

// Pre-resolved jam outcomes for one round (jam-transmission already rolled
// the dice for every attempted target).
struct AttackOutcomes {
  std::vector<int> uplink_targets;
  std::vector<int> downlink_targets;
  std::vector<int> uplink_success;
  std::vector<int> downlink_success;
};

struct RoundContext {
  int round = 1;
  const StreamFactory* streams = nullptr;
  const TrainConfig* train = nullptr;
  AggregationMode aggregation = AggregationMode::kPerRound;
  bool reset_optimizer = false;
  const DataMatrix* test = nullptr;
  bool eval_locals = true;
};

// One FL round: ready clients train on their local data, surviving uplinks
// are aggregated, and the broadcast reaches every participating client whose
// downlink was not jammed. Jammed-downlink clients continue from their own
// local model. transmitted[i] is filled with client i+1's uplinked model for
// adversary overhearing; the caller clears it.
inline RoundOutcome run_round(std::vector<ClientState>& clients,
                              ServerState& server,
                              const AttackOutcomes& attack,
                              const RoundContext& ctx,
                              std::vector<std::optional<Mlp>>* transmitted) {
  RoundOutcome out;
  out.round_index = ctx.round;
  out.uplink_targets = attack.uplink_targets;
  out.downlink_targets = attack.downlink_targets;
  out.budget_spent = static_cast<int>(attack.uplink_targets.size() +
                                      attack.downlink_targets.size());
  if (transmitted) {
    transmitted->clear();
    transmitted->resize(clients.size());
  }

  // local training
  for (auto& c : clients) {
    if (!c.participates(ctx.round)) {
      c.rounds_until_ready = c.speed - (ctx.round % c.speed);
      continue;
    }
    c.rounds_until_ready = 0;
    if (ctx.reset_optimizer) c.opt.reset();
    auto rng = ctx.streams->stream("training",
                                   static_cast<std::uint64_t>(c.client_id),
                                   static_cast<std::uint64_t>(ctx.round));
    train_round(c.weights, c.data.x, c.data.y, *ctx.train, c.opt, rng);
    if (transmitted)
      (*transmitted)[static_cast<std::size_t>(c.client_id - 1)] = c.weights;
  }

  // uplink + aggregation
  std::vector<const Mlp*> received;
  for (auto& c : clients) {
    if (!c.participates(ctx.round)) continue;
    const bool jammed = detail::contains(attack.uplink_success, c.client_id);
    if (jammed) {
      out.uplink_jammed.push_back(c.client_id);
      continue;
    }
    out.uplink_delivered.push_back(c.client_id);
    if (ctx.aggregation == AggregationMode::kCached)
      server.cache[static_cast<std::size_t>(c.client_id - 1)] = c.weights;
    else
      received.push_back(&c.weights);
  }
  if (ctx.aggregation == AggregationMode::kCached) {
    std::vector<Mlp> models;
    for (const auto& entry : server.cache)
      if (entry) models.push_back(*entry);
    if (!models.empty()) server.weights = fedavg(models);
  } else {
    if (!received.empty()) {
      std::vector<Mlp> models;
      models.reserve(received.size());
      for (const Mlp* m : received) models.push_back(*m);
      server.weights = fedavg(models);
    }
    // zero receivable models: global carries over unchanged
  }

  out.global_weights = server.weights;
  out.global_accuracy =
      evaluate_accuracy(server.weights, ctx.test->x, ctx.test->y);
  if (ctx.eval_locals) {
    out.local_accuracies.resize(clients.size());
    for (const auto& c : clients)
      out.local_accuracies[static_cast<std::size_t>(c.client_id - 1)] =
          evaluate_accuracy(c.weights, ctx.test->x, ctx.test->y);
  }

  // downlink broadcast
  for (auto& c : clients) {
    if (!c.participates(ctx.round)) continue;
    const bool jammed = detail::contains(attack.downlink_success, c.client_id);
    if (jammed) {
      out.downlink_jammed.push_back(c.client_id);
      continue;  // keeps its locally trained weights
    }
    c.weights = server.weights;
  }
  return out;
}

// ---- attack orchestration ---------------------------------------------------

struct PlanAudit {
  AttackScheme scheme = AttackScheme::kPractical;
  AttackType attack_type = AttackType::kNone;
  int start_round = 0;
  std::vector<int> uplink_targets;    // selected set (top-K list for dynamic)
  std::vector<int> downlink_targets;
  bool dynamic = false;
  double dynamic_prob = 1.0;
  double reciprocal_budget_uplink = 0.0;  // sum of 1/s_i over the uplink set
  double reciprocal_budget_downlink = 0.0;
};

// Per-scheme targeting: waits through the observation phase, ranks clients
// from overheard uplinks, builds the plan, and emits per-round target sets.
class AttackController {
 public:
  AttackController(const ScenarioConfig& cfg, const StreamFactory& streams,
                   std::vector<ClientGeometry> geometries,
                   std::optional<std::vector<double>> reference_accuracies)
      : cfg_(cfg),
        streams_(streams),
        geometries_(std::move(geometries)),
        reference_accuracies_(std::move(reference_accuracies)),
        speeds_(cfg.effective_speeds()),
        cache_(static_cast<std::size_t>(cfg.n_clients)) {
    if (cfg_.attack_type == AttackType::kNone) {
      start_round_ = cfg_.rounds + 1;
      decision_round_ = cfg_.observe_rounds;  // rank anyway, for analysis
      return;
    }
    const bool speed_scheme = uses_speed_timing();
    decision_round_ = speed_scheme
                          ? cfg_.observe_rounds * cfg_.max_speed()
                          : cfg_.observe_rounds;
    start_round_ = decision_round_ + 1;
    if (cfg_.scheme == AttackScheme::kIdeal ||
        cfg_.scheme == AttackScheme::kFixedSet) {
      start_round_ = cfg_.scheme == AttackScheme::kIdeal ? 1 : start_round_;
      if (cfg_.scheme == AttackScheme::kIdeal) {
        if (!reference_accuracies_)
          throw std::runtime_error("ideal scheme needs a reference run");
        build_plan_from_accuracies(*reference_accuracies_);
      } else {
        plan_.uplink.targets = cfg_.fixed_uplink_targets;
        plan_.downlink.targets = cfg_.fixed_downlink_targets;
        if (cfg_.attack_type == AttackType::kUplink) plan_.downlink.targets.clear();
        if (cfg_.attack_type == AttackType::kDownlink) plan_.uplink.targets.clear();
        plan_ready_ = true;
      }
    }
  }

  int start_round() const { return start_round_; }

  const std::optional<DivergenceRanking>& observed_ranking() const {
    return ranking_;
  }

  struct RoundTargets {
    std::vector<int> uplink;
    std::vector<int> downlink;
  };

  // Targets the adversary attempts to jam in round r. Speed-respecting plans
  // only spend budget in rounds where the target actually participates.
  RoundTargets targets_for_round(int r) {
    RoundTargets t;
    if (cfg_.attack_type == AttackType::kNone || r < start_round_ || !plan_ready_)
      return t;
    if (cfg_.attack_type != AttackType::kDownlink)
      t.uplink = realize(plan_.uplink, r, LinkDirection::kUplink);
    if (cfg_.attack_type != AttackType::kUplink)
      t.downlink = realize(plan_.downlink, r, LinkDirection::kDownlink);
    return t;
  }

  // Feed the round's overheard uplink transmissions. Ranks and plans at the
  // decision round (deferred until every client has been overheard at least
  // once); with replan enabled, re-ranks every round from the most recent
  // transmissions.
  void observe(int r, const std::vector<std::optional<Mlp>>& transmitted) {
    for (std::size_t i = 0; i < transmitted.size(); ++i)
      if (transmitted[i]) cache_[i] = transmitted[i];
    const bool needs_ranking =
        cfg_.scheme != AttackScheme::kIdeal && cfg_.scheme != AttackScheme::kFixedSet;
    if (!needs_ranking) return;
    if (r < decision_round_) return;
    if (!plan_ready_ || cfg_.replan_each_round) {
      const bool complete =
          std::all_of(cache_.begin(), cache_.end(),
                      [](const auto& m) { return m.has_value(); });
      if (!complete) return;
      const bool first_plan = !plan_ready_;
      rank_now(r);
      build_plan();
      if (first_plan && r >= start_round_)
        start_round_ = r + 1;  // cache completed late
    }
  }

  PlanAudit audit() const {
    PlanAudit a;
    a.scheme = cfg_.scheme;
    a.attack_type = cfg_.attack_type;
    a.start_round = start_round_;
    a.uplink_targets = plan_.uplink.targets;
    a.downlink_targets = plan_.downlink.targets;
    a.dynamic = plan_.uplink.dynamic || plan_.downlink.dynamic;
    a.dynamic_prob = plan_.uplink.dynamic ? plan_.uplink.dynamic_prob
                                          : plan_.downlink.dynamic_prob;
    a.reciprocal_budget_uplink =
        reciprocal_speed_cost(plan_.uplink.targets, speeds_);
    a.reciprocal_budget_downlink =
        reciprocal_speed_cost(plan_.downlink.targets, speeds_);
    return a;
  }

 private:
  bool uses_speed_timing() const {
    switch (cfg_.scheme) {
      case AttackScheme::kSpeedAware:
      case AttackScheme::kA1:
      case AttackScheme::kA2:
      case AttackScheme::kA3:
      case AttackScheme::kA4:
        return true;
      default:
        return false;
    }
  }

  std::vector<int> realize(const DirectionPlan& p, int r, LinkDirection dir) {
    std::vector<int> out;
    if (p.dynamic) {
      auto rng = streams_.stream("adversary-dynamic", static_cast<std::uint64_t>(r),
                                 dir == LinkDirection::kUplink ? 0u : 1u);
      for (int id : p.targets)
        if (rng.bernoulli(p.dynamic_prob)) out.push_back(id);
    } else {
      out = p.targets;
    }
    if (p.respect_speed) {
      std::erase_if(out, [&](int id) {
        return r % speeds_[static_cast<std::size_t>(id - 1)] != 0;
      });
    }
    return out;
  }

  void rank_now(int r) {
    if (cfg_.observation == ObservationChannel::kActions) {
      ranking_ = ranking_from_actions(r);
      return;
    }
    ranking_ = observe_and_rank(cache_);
  }

  // Action-based estimate: every client classifies the same probe
  // transmissions through its own channel with its current model; the
  // adversary ranks by agreement with ground truth.
  DivergenceRanking ranking_from_actions(int r) {
    ActionLog log;
    auto rng = streams_.stream("adversary-probes", static_cast<std::uint64_t>(r));
    log.decisions.resize(static_cast<std::size_t>(cfg_.n_clients));
    for (int t = 0; t < cfg_.probe_count; ++t) {
      const WaveformLabel label =
          rng.bernoulli(0.5) ? WaveformLabel::kQpsk : WaveformLabel::kBpsk;
      log.truth.push_back(static_cast<int>(label));
      for (int i = 0; i < cfg_.n_clients; ++i) {
        const auto& model = cache_[static_cast<std::size_t>(i)];
        if (!model)
          throw std::runtime_error("actions observation: missing model for client " +
                                   std::to_string(i + 1));
        const auto sample = detail2_synth(label, i, rng);
        Vector x(FeatureSample::kFeatures);
        for (int k = 0; k < FeatureSample::kFeatures; ++k)
          x[k] = sample.features[static_cast<std::size_t>(k)];
        const Vector probs = forward(*model, x);
        int pred = 0;
        for (Eigen::Index c = 1; c < probs.size(); ++c)
          if (probs[c] > probs[pred]) pred = static_cast<int>(c);
        log.decisions[static_cast<std::size_t>(i)].push_back(pred);
      }
    }
    const auto est = estimate_rank_from_actions(log, cfg_.probe_count);
    std::vector<double> d(est.accuracy.size());
    for (std::size_t i = 0; i < est.accuracy.size(); ++i)
      d[i] = 1.0 - est.accuracy[i];  // low accuracy plays the large-divergence role
    return make_ranking(std::move(d));
  }

  FeatureSample detail2_synth(WaveformLabel label, int client_index, Rng& rng) {
    return fljam::detail::synth_sample(
        geometries_[static_cast<std::size_t>(client_index)], label, rng,
        cfg_.synthesis);
  }

  void build_plan_from_accuracies(const std::vector<double>& accs) {
    const int m = clamp_m();
    plan_ = AttackPlan{};
    if (cfg_.attack_type != AttackType::kDownlink)
      plan_.uplink.targets = select_idealized(accs, m, LinkDirection::kUplink);
    if (cfg_.attack_type != AttackType::kUplink)
      plan_.downlink.targets = select_idealized(accs, m, LinkDirection::kDownlink);
    plan_ready_ = true;
  }

  int clamp_m() const {
    const int m = std::max(1, static_cast<int>(std::floor(cfg_.budget_m + 1e-9)));
    return std::min(m, cfg_.n_clients);
  }

  void build_plan() {
    const auto& ranking = *ranking_;
    const int m = clamp_m();
    plan_ = AttackPlan{};
    plan_.start_round = start_round_;
    const SuccessProfile& profile = profile_for_selection();
    switch (cfg_.scheme) {
      case AttackScheme::kPractical: {
        if (cfg_.attack_type != AttackType::kDownlink)
          plan_.uplink.targets = select_uplink(ranking, m);
        if (cfg_.attack_type != AttackType::kUplink)
          plan_.downlink.targets = select_downlink(ranking, m);
        break;
      }
      case AttackScheme::kDynamic: {
        const int k = cfg_.budget_k > 0
                          ? cfg_.budget_k
                          : static_cast<int>(std::ceil(cfg_.budget_m));
        if (cfg_.attack_type != AttackType::kDownlink)
          plan_.uplink = plan_dynamic(ranking, cfg_.budget_m, k,
                                      LinkDirection::kUplink, start_round_)
                             .uplink;
        if (cfg_.attack_type != AttackType::kUplink)
          plan_.downlink = plan_dynamic(ranking, cfg_.budget_m, k,
                                        LinkDirection::kDownlink, start_round_)
                               .downlink;
        break;
      }
      case AttackScheme::kSpeedAware: {
        if (cfg_.attack_type != AttackType::kDownlink)
          plan_.uplink.targets = plan_speed_aware_targets(
              ranking, speeds_, cfg_.budget_m, LinkDirection::kUplink);
        if (cfg_.attack_type != AttackType::kUplink)
          plan_.downlink.targets = plan_speed_aware_targets(
              ranking, speeds_, cfg_.budget_m, LinkDirection::kDownlink);
        break;
      }
      case AttackScheme::kProbAware: {
        if (cfg_.attack_type != AttackType::kDownlink)
          plan_.uplink.targets = select_uplink_prob(ranking, profile, m);
        if (cfg_.attack_type != AttackType::kUplink)
          plan_.downlink.targets = select_downlink_prob(ranking, profile, m);
        break;
      }
      case AttackScheme::kRandom: {
        auto rng = streams_.stream("adversary-random");
        BenchmarkContext ctx;
        ctx.ranking = &ranking;
        ctx.rng = &rng;
        ctx.m = cfg_.budget_m;
        if (cfg_.attack_type != AttackType::kDownlink) {
          ctx.direction = LinkDirection::kUplink;
          plan_.uplink.targets = select_benchmark(BenchmarkScheme::kA7, ctx);
        }
        if (cfg_.attack_type != AttackType::kUplink) {
          ctx.direction = LinkDirection::kDownlink;
          plan_.downlink.targets = select_benchmark(BenchmarkScheme::kA7, ctx);
        }
        break;
      }
      case AttackScheme::kA1:
      case AttackScheme::kA2:
      case AttackScheme::kA3:
      case AttackScheme::kA4:
      case AttackScheme::kA5:
      case AttackScheme::kA6:
      case AttackScheme::kA7: {
        auto rng = streams_.stream("adversary-random");
        BenchmarkContext ctx;
        ctx.ranking = &ranking;
        ctx.speeds = &speeds_;
        ctx.profile = &profile;
        ctx.rng = &rng;
        ctx.m = cfg_.budget_m;
        const auto scheme = static_cast<BenchmarkScheme>(
            static_cast<int>(BenchmarkScheme::kA1) +
            (static_cast<int>(cfg_.scheme) - static_cast<int>(AttackScheme::kA1)));
        if (cfg_.attack_type != AttackType::kDownlink) {
          ctx.direction = LinkDirection::kUplink;
          plan_.uplink.targets = select_benchmark(scheme, ctx);
        }
        if (cfg_.attack_type != AttackType::kUplink) {
          ctx.direction = LinkDirection::kDownlink;
          plan_.downlink.targets = select_benchmark(scheme, ctx);
        }
        if (cfg_.scheme == AttackScheme::kA1) {
          plan_.uplink.respect_speed = false;  // jams every round regardless
          plan_.downlink.respect_speed = false;
        }
        break;
      }
      case AttackScheme::kIdeal:
      case AttackScheme::kFixedSet:
        break;  // plans built in the constructor
    }
    plan_ready_ = true;
  }

  const SuccessProfile& profile_for_selection() {
    if (cfg_.success_mode == SuccessModel::Mode::kTable) {
      if (!profile_) {
        profile_ = cfg_.success_profile_file.empty()
                       ? default_success_profile()
                       : load_success_profile(cfg_.success_profile_file);
        profile_->validate();
      }
      return *profile_;
    }
    if (!profile_) {
      // deterministic / sinr modes: selection treats every jam as certain
      SuccessProfile p;
      p.p_uplink.assign(static_cast<std::size_t>(cfg_.n_clients), 1.0);
      p.p_downlink = p.p_uplink;
      profile_ = std::move(p);
    }
    return *profile_;
  }

  ScenarioConfig cfg_;
  StreamFactory streams_;
  std::vector<ClientGeometry> geometries_;
  std::optional<std::vector<double>> reference_accuracies_;
  std::vector<int> speeds_;
  std::vector<std::optional<Mlp>> cache_;
  std::optional<DivergenceRanking> ranking_;
  std::optional<SuccessProfile> profile_;
  AttackPlan plan_;
  bool plan_ready_ = false;
  int start_round_ = 1;
  int decision_round_ = 1;
};

// ---- full training runs -----------------------------------------------------

struct TrainingLog {
  std::vector<RoundOutcome> rounds;
  double final_global_accuracy = 0.0;
  std::vector<double> final_local_accuracies;
  std::optional<DivergenceRanking> observed_ranking;  // decision-round ranking
  PlanAudit plan;
  double mean_budget_per_round = 0.0;
  std::vector<ClientGeometry> geometries;
};

struct RunOptions {
  bool per_round_locals = true;   // evaluate every client on the test set each round
  bool keep_global_weights = false;  // retain weights in every RoundOutcome
};

inline std::vector<ClientGeometry> resolve_geometries(
    const ScenarioConfig& cfg, const StreamFactory& streams) {
  std::vector<ClientGeometry> geos;
  if (cfg.geometry_mode == GeometryMode::kRandom) {
    auto rng = streams.stream("geometry");
    geos = random_geometry(cfg.n_clients, cfg.random_geometry, rng);
  } else if (!cfg.geometry_file.empty()) {
    geos = load_geometry_table(cfg.geometry_file);
  } else {
    geos = default_geometry_table();
  }
  if (static_cast<int>(geos.size()) < cfg.n_clients)
    throw ConfigError("n_clients", "geometry table has only " +
                                       std::to_string(geos.size()) + " rows");
  geos.resize(static_cast<std::size_t>(cfg.n_clients));
  return geos;
}

inline SuccessModel resolve_success_model(const ScenarioConfig& cfg) {
  SuccessModel model;
  model.mode = cfg.success_mode;
  if (cfg.success_mode == SuccessModel::Mode::kTable) {
    model.table = cfg.success_profile_file.empty()
                      ? default_success_profile()
                      : load_success_profile(cfg.success_profile_file);
    model.table.validate();
    if (model.table.n_clients() < cfg.n_clients)
      throw ConfigError("success_profile_file",
                        "profile covers fewer clients than n_clients");
  } else if (cfg.success_mode == SuccessModel::Mode::kSinr) {
    model.sinr = cfg.sinr;
  }
  return model;
}

namespace detail {

inline TrainingLog run_training_impl(const ScenarioConfig& cfg,
                                     std::uint64_t seed,
                                     const RunOptions& opts,
                                     bool allow_reference_run);

}  // namespace detail

// Runs the full R-round federated simulation for one master seed.
// Deterministic: every random draw flows from (seed, named substream).
inline TrainingLog run_training(const ScenarioConfig& cfg, std::uint64_t seed,
                                const RunOptions& opts = {}) {
  cfg.validate();
  return detail::run_training_impl(cfg, seed, opts, true);
}

namespace detail {

inline TrainingLog run_training_impl(const ScenarioConfig& cfg,
                                     std::uint64_t seed,
                                     const RunOptions& opts,
                                     bool allow_reference_run) {
  StreamFactory streams(seed);
  const auto geometries = resolve_geometries(cfg, streams);
  const SuccessModel success = resolve_success_model(cfg);

  // idealized scheme: a no-attack reference run provides the accuracies
  std::optional<std::vector<double>> reference_accuracies;
  if (cfg.scheme == AttackScheme::kIdeal && cfg.attack_type != AttackType::kNone) {
    if (!allow_reference_run)
      throw std::runtime_error("reference run recursion");
    ScenarioConfig ref = cfg;
    ref.attack_type = AttackType::kNone;
    RunOptions ref_opts;
    ref_opts.per_round_locals = false;
    const TrainingLog ref_log = run_training_impl(ref, seed, ref_opts, false);
    reference_accuracies = ref_log.final_local_accuracies;
  }

  const auto speeds = cfg.effective_speeds();
  std::vector<ClientState> clients;
  for (int i = 0; i < cfg.n_clients; ++i) {
    ClientState c;
    c.client_id = i + 1;
    c.speed = speeds[static_cast<std::size_t>(i)];
    auto rng = streams.stream("data", static_cast<std::uint64_t>(i + 1));
    c.data = to_matrix(build_client_dataset(
        geometries[static_cast<std::size_t>(i)], cfg.samples_per_client, rng,
        cfg.synthesis));
    clients.push_back(std::move(c));
  }
  DataMatrix test;
  {
    auto rng = streams.stream("data", 0);
    test = to_matrix(
        build_test_dataset(geometries, cfg.test_samples, rng, cfg.synthesis));
  }

  ServerState server;
  {
    auto rng = streams.stream("init");
    server.weights = init_weights(rng);
  }
  server.cache.resize(static_cast<std::size_t>(cfg.n_clients));
  for (auto& c : clients) c.weights = server.weights;

  AttackController controller(cfg, streams, geometries, reference_accuracies);

  TrainingLog log;
  log.geometries = geometries;
  std::vector<std::optional<Mlp>> transmitted;
  long long total_budget = 0;

  for (int r = 1; r <= cfg.rounds; ++r) {
    const auto targets = controller.targets_for_round(r);
    AttackOutcomes attack;
    attack.uplink_targets = targets.uplink;
    attack.downlink_targets = targets.downlink;
    for (int id : targets.uplink) {
      auto rng = streams.stream("jamming", static_cast<std::uint64_t>(r),
                                static_cast<std::uint64_t>(id), 0);
      if (resolve_attack(id, LinkDirection::kUplink, success, rng))
        attack.uplink_success.push_back(id);
    }
    for (int id : targets.downlink) {
      auto rng = streams.stream("jamming", static_cast<std::uint64_t>(r),
                                static_cast<std::uint64_t>(id), 1);
      if (resolve_attack(id, LinkDirection::kDownlink, success, rng))
        attack.downlink_success.push_back(id);
    }

    RoundContext ctx;
    ctx.round = r;
    ctx.streams = &streams;
    ctx.train = &cfg.train;
    ctx.aggregation = cfg.effective_aggregation();
    ctx.reset_optimizer = cfg.reset_optimizer_each_round;
    ctx.test = &test;
    ctx.eval_locals = opts.per_round_locals || r == cfg.rounds;

    RoundOutcome outcome = run_round(clients, server, attack, ctx, &transmitted);
    controller.observe(r, transmitted);
    total_budget += outcome.budget_spent;
    if (!opts.keep_global_weights && r != cfg.rounds)
      outcome.global_weights = Mlp();
    log.rounds.push_back(std::move(outcome));
  }

  if (!log.rounds.empty()) {
    log.final_global_accuracy = log.rounds.back().global_accuracy;
    log.final_local_accuracies = log.rounds.back().local_accuracies;
    log.mean_budget_per_round =
        static_cast<double>(total_budget) / cfg.rounds;
  } else {
    log.final_global_accuracy =
        evaluate_accuracy(server.weights, test.x, test.y);
  }
  log.observed_ranking = controller.observed_ranking();
  log.plan = controller.audit();
  return log;
}

}  // namespace detail

}  // namespace fljam
