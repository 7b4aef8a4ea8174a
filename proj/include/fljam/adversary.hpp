#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fljam/jam.hpp"
#include "fljam/model.hpp"
#include "fljam/rng.hpp"

namespace fljam {

// Average number of jamming actions per round (M) and the per-round cap (K)
// for the dynamic scheme.
struct AttackBudget {
  double m = 1.0;
  int k = 1;

  void validate(int n_clients) const {
    if (!(m > 0)) throw std::invalid_argument("budget: M must be > 0");
    if (k < static_cast<int>(std::ceil(m)) || k > n_clients)
      throw std::invalid_argument("budget: need ceil(M) <= K <= N");
  }
};

// Per-client distance from the adversary's global-model estimate, plus the
// client ids sorted most-divergent-first (ties to the lower id).
struct DivergenceRanking {
  std::vector<double> d;       // index i -> client i+1
  std::vector<int> order;      // ids, d descending

  int n_clients() const { return static_cast<int>(d.size()); }

  double of(int client_id) const {
    return d[static_cast<std::size_t>(client_id - 1)];
  }

  std::vector<int> ascending_order() const {
    std::vector<int> ids(d.size());
    std::iota(ids.begin(), ids.end(), 1);
    std::sort(ids.begin(), ids.end(), [&](int a, int b) {
      if (of(a) != of(b)) return of(a) < of(b);
      return a < b;
    });
    return ids;
  }
};

inline DivergenceRanking make_ranking(std::vector<double> d) {
  DivergenceRanking r;
  r.d = std::move(d);
  r.order.resize(r.d.size());
  std::iota(r.order.begin(), r.order.end(), 1);
  std::sort(r.order.begin(), r.order.end(), [&](int a, int b) {
    if (r.of(a) != r.of(b)) return r.of(a) > r.of(b);
    return a < b;
  });
  return r;
}

// The adversary overhears every client's round-S uplink, forms its own FedAvg
// estimate of the global model, and ranks clients by distance from it.
inline DivergenceRanking observe_and_rank(
    const std::vector<std::optional<Mlp>>& overheard) {
  if (overheard.empty())
    throw std::invalid_argument("observe_and_rank: no clients");
  std::vector<Mlp> models;
  models.reserve(overheard.size());
  for (std::size_t i = 0; i < overheard.size(); ++i) {
    if (!overheard[i])
      throw std::runtime_error("observe_and_rank: missing model for client " +
                               std::to_string(i + 1));
    models.push_back(*overheard[i]);
  }
  const Mlp estimate = fedavg(models);
  std::vector<double> d(models.size());
  for (std::size_t i = 0; i < models.size(); ++i)
    d[i] = weight_distance(models[i], estimate);
  return make_ranking(std::move(d));
}

namespace detail {

inline void check_m(int m, int n) {
  if (m < 1 || m > n)
    throw std::invalid_argument("selection: need 1 <= M <= N");
}

inline std::vector<int> sorted_prefix(const std::vector<int>& order, int m) {
  std::vector<int> out(order.begin(), order.begin() + m);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// Top-M most divergent clients (uplink attack: suppress the unique sources).
inline std::vector<int> select_uplink(const DivergenceRanking& ranking, int m) {
  detail::check_m(m, ranking.n_clients());
  return detail::sorted_prefix(ranking.order, m);
}

// M least divergent clients (downlink attack: starve the well-aligned ones).
inline std::vector<int> select_downlink(const DivergenceRanking& ranking,
                                        int m) {
  detail::check_m(m, ranking.n_clients());
  return detail::sorted_prefix(ranking.ascending_order(), m);
}

// Idealized selection from a no-attack reference run's local accuracies:
// lowest accuracies for uplink, highest for downlink.
inline std::vector<int> select_idealized(const std::vector<double>& accuracies,
                                         int m, LinkDirection direction) {
  const int n = static_cast<int>(accuracies.size());
  detail::check_m(m, n);
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 1);
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    const double aa = accuracies[static_cast<std::size_t>(a - 1)];
    const double ab = accuracies[static_cast<std::size_t>(b - 1)];
    if (aa != ab)
      return direction == LinkDirection::kUplink ? aa < ab : aa > ab;
    return a < b;
  });
  return detail::sorted_prefix(ids, m);
}

// ---- probability-aware selection -------------------------------------------

namespace detail {

// Expected diversity (mean distance from the global estimate) of the clients
// that survive an uplink attack on `subset`, with independent per-client
// success probabilities. Enumerates all success patterns.
inline double expected_remaining_diversity(const std::vector<double>& d,
                                           const std::vector<double>& p,
                                           const std::vector<int>& subset) {
  const int n = static_cast<int>(d.size());
  const double total = std::accumulate(d.begin(), d.end(), 0.0);
  const int m = static_cast<int>(subset.size());
  double expected = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    double prob = 1.0;
    double removed = 0.0;
    int removed_count = 0;
    for (int j = 0; j < m; ++j) {
      const auto idx = static_cast<std::size_t>(subset[static_cast<std::size_t>(j)] - 1);
      if (mask & (1u << j)) {
        prob *= p[idx];
        removed += d[idx];
        ++removed_count;
      } else {
        prob *= 1.0 - p[idx];
      }
    }
    const int remaining = n - removed_count;
    expected += prob * (remaining > 0 ? (total - removed) / remaining : 0.0);
  }
  return expected;
}

inline bool next_combination(std::vector<int>& c, int n) {
  const int m = static_cast<int>(c.size());
  for (int i = m - 1; i >= 0; --i) {
    if (c[static_cast<std::size_t>(i)] < n - (m - 1 - i)) {
      ++c[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < m; ++j)
        c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
      return true;
    }
  }
  return false;
}

inline double binomial(int n, int m) {
  double v = 1.0;
  for (int i = 0; i < m; ++i) v = v * (n - i) / (i + 1);
  return v;
}

}  // namespace detail

// Uplink selection under jam success probabilities: choose the size-M set
// minimizing the expected diversity of the surviving clients. For M = 1 this
// is exactly the max of p_i * (d_i - mean(d)); for larger M the subsets are
// enumerated because the per-client scores ignore interaction terms. Ties go
// to the lexicographically smallest id set.
inline std::vector<int> select_uplink_prob(const DivergenceRanking& ranking,
                                           const SuccessProfile& profile,
                                           int m) {
  const int n = ranking.n_clients();
  detail::check_m(m, n);
  if (profile.n_clients() < n)
    throw std::invalid_argument("select_uplink_prob: profile too small");
  std::vector<double> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    p[static_cast<std::size_t>(i)] = profile.prob(i + 1, LinkDirection::kUplink);

  if (detail::binomial(n, m) * std::pow(2.0, m) > 2e7) {
    // greedy fallback by individual score for sizes beyond enumeration
    const double mean =
        std::accumulate(ranking.d.begin(), ranking.d.end(), 0.0) / n;
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 1);
    std::sort(ids.begin(), ids.end(), [&](int a, int b) {
      const double sa = p[static_cast<std::size_t>(a - 1)] * (ranking.of(a) - mean);
      const double sb = p[static_cast<std::size_t>(b - 1)] * (ranking.of(b) - mean);
      if (sa != sb) return sa > sb;
      return a < b;
    });
    return detail::sorted_prefix(ids, m);
  }

  std::vector<int> combo(static_cast<std::size_t>(m));
  std::iota(combo.begin(), combo.end(), 1);
  std::vector<int> best = combo;
  double best_val = detail::expected_remaining_diversity(ranking.d, p, combo);
  while (detail::next_combination(combo, n)) {
    const double v = detail::expected_remaining_diversity(ranking.d, p, combo);
    if (v < best_val - 1e-15) {
      best_val = v;
      best = combo;
    }
  }
  return best;
}

// Downlink selection under success probabilities: smallest d_i / p_i first.
inline std::vector<int> select_downlink_prob(const DivergenceRanking& ranking,
                                             const SuccessProfile& profile,
                                             int m) {
  const int n = ranking.n_clients();
  detail::check_m(m, n);
  if (profile.n_clients() < n)
    throw std::invalid_argument("select_downlink_prob: profile too small");
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 1);
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    const double ra = ranking.of(a) / profile.prob(a, LinkDirection::kDownlink);
    const double rb = ranking.of(b) / profile.prob(b, LinkDirection::kDownlink);
    if (ra != rb) return ra < rb;
    return a < b;
  });
  return detail::sorted_prefix(ids, m);
}

// ---- budgeted plans ---------------------------------------------------------

// One direction of an attack plan. Static plans target a fixed set; dynamic
// plans hit each of the top-K independently with probability M/K each round.
// respect_speed limits jams to rounds where the target participates.
struct DirectionPlan {
  std::vector<int> targets;      // fixed set (or top-K list when dynamic)
  bool dynamic = false;
  double dynamic_prob = 1.0;
  bool respect_speed = true;
};

struct AttackPlan {
  DirectionPlan uplink;
  DirectionPlan downlink;
  int start_round = 1;
  double planned_budget_per_round = 0.0;  // average actions per round
};

inline double reciprocal_speed_cost(const std::vector<int>& targets,
                                    const std::vector<int>& speeds) {
  double c = 0.0;
  for (int id : targets)
    c += 1.0 / static_cast<double>(speeds[static_cast<std::size_t>(id - 1)]);
  return c;
}

namespace detail {

// Greedy walk over `order`, admitting client i while the reciprocal-speed
// budget still fits: consumed + 1/s_i <= m.
inline std::vector<int> greedy_budget_walk(const std::vector<int>& order,
                                           const std::vector<int>& speeds,
                                           double m) {
  std::vector<int> chosen;
  double consumed = 0.0;
  for (int id : order) {
    const double cost = 1.0 / static_cast<double>(speeds[static_cast<std::size_t>(id - 1)]);
    if (consumed + cost <= m + 1e-9) {
      chosen.push_back(id);
      consumed += cost;
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace detail

// Speed-aware selection: walk the direction-appropriate ranking greedily,
// charging 1/s_i per client since a slow client only transmits or receives
// once every s_i rounds. Selected clients are attacked only in rounds where
// they participate.
inline std::vector<int> plan_speed_aware_targets(
    const DivergenceRanking& ranking, const std::vector<int>& speeds, double m,
    LinkDirection direction) {
  if (!(m > 0)) throw std::invalid_argument("plan_speed_aware: M must be > 0");
  if (speeds.size() != ranking.d.size())
    throw std::invalid_argument("plan_speed_aware: speeds size mismatch");
  for (int s : speeds)
    if (s < 1) throw std::invalid_argument("plan_speed_aware: speeds must be >= 1");
  const auto& order = direction == LinkDirection::kUplink
                          ? ranking.order
                          : ranking.ascending_order();
  return detail::greedy_budget_walk(order, speeds, m);
}

// Dynamic (M,K): the top-K ranked clients (direction order) are each targeted
// independently with probability M/K per round, so the cap K always holds and
// the per-round average is M.
inline AttackPlan plan_dynamic(const DivergenceRanking& ranking, double m,
                               int k, LinkDirection direction,
                               int start_round) {
  AttackBudget{m, k}.validate(ranking.n_clients());
  AttackPlan plan;
  plan.start_round = start_round;
  plan.planned_budget_per_round = m;
  auto& dir_plan = direction == LinkDirection::kUplink ? plan.uplink : plan.downlink;
  const auto& order = direction == LinkDirection::kUplink
                          ? ranking.order
                          : ranking.ascending_order();
  dir_plan.targets.assign(order.begin(), order.begin() + k);
  std::sort(dir_plan.targets.begin(), dir_plan.targets.end());
  dir_plan.dynamic = true;
  dir_plan.dynamic_prob = m / k;
  return plan;
}

// ---- benchmark selections ---------------------------------------------------

enum class BenchmarkScheme { kA1, kA2, kA3, kA4, kA5, kA6, kA7 };

struct BenchmarkContext {
  const DivergenceRanking* ranking = nullptr;
  const std::vector<int>* speeds = nullptr;     // A1-A4
  const SuccessProfile* profile = nullptr;      // A6
  Rng* rng = nullptr;                           // A4, A7
  double m = 1.0;
  LinkDirection direction = LinkDirection::kUplink;
};

// Benchmark selections. A1 ignores speeds entirely (selects floor(M) by
// ranking and jams them every round); A2/A3 walk fast-first/slow-first
// reorderings of the ranking with reciprocal-speed accounting; A4/A7 draw a
// random fixed set; A5 is the plain divergence selection; A6 ranks by success
// probability alone.
inline std::vector<int> select_benchmark(BenchmarkScheme scheme,
                                         const BenchmarkContext& ctx) {
  const auto need = [&](const void* field, const char* what) {
    if (field == nullptr)
      throw std::runtime_error(std::string("benchmark context: missing ") + what);
  };
  switch (scheme) {
    case BenchmarkScheme::kA1: {
      need(ctx.ranking, "ranking");
      const int m = std::max(1, static_cast<int>(std::floor(ctx.m + 1e-9)));
      return ctx.direction == LinkDirection::kUplink
                 ? select_uplink(*ctx.ranking, std::min(m, ctx.ranking->n_clients()))
                 : select_downlink(*ctx.ranking, std::min(m, ctx.ranking->n_clients()));
    }
    case BenchmarkScheme::kA2:
    case BenchmarkScheme::kA3: {
      need(ctx.ranking, "ranking");
      need(ctx.speeds, "speeds");
      auto order = ctx.direction == LinkDirection::kUplink
                       ? ctx.ranking->order
                       : ctx.ranking->ascending_order();
      const bool fast_first = scheme == BenchmarkScheme::kA2;
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const int sa = (*ctx.speeds)[static_cast<std::size_t>(a - 1)];
        const int sb = (*ctx.speeds)[static_cast<std::size_t>(b - 1)];
        return fast_first ? sa < sb : sa > sb;
      });
      return detail::greedy_budget_walk(order, *ctx.speeds, ctx.m);
    }
    case BenchmarkScheme::kA4: {
      need(ctx.speeds, "speeds");
      need(ctx.rng, "rng");
      std::vector<int> order(ctx.speeds->size());
      std::iota(order.begin(), order.end(), 1);
      ctx.rng->shuffle(order);
      return detail::greedy_budget_walk(order, *ctx.speeds, ctx.m);
    }
    case BenchmarkScheme::kA5: {
      need(ctx.ranking, "ranking");
      const int m = std::max(1, static_cast<int>(std::floor(ctx.m + 1e-9)));
      return ctx.direction == LinkDirection::kUplink
                 ? select_uplink(*ctx.ranking, std::min(m, ctx.ranking->n_clients()))
                 : select_downlink(*ctx.ranking, std::min(m, ctx.ranking->n_clients()));
    }
    case BenchmarkScheme::kA6: {
      need(ctx.profile, "profile");
      const int n = ctx.profile->n_clients();
      const int m = std::min(std::max(1, static_cast<int>(std::floor(ctx.m + 1e-9))), n);
      std::vector<int> ids(static_cast<std::size_t>(n));
      std::iota(ids.begin(), ids.end(), 1);
      std::sort(ids.begin(), ids.end(), [&](int a, int b) {
        const double pa = ctx.profile->prob(a, ctx.direction);
        const double pb = ctx.profile->prob(b, ctx.direction);
        if (pa != pb) return pa > pb;
        return a < b;
      });
      return detail::sorted_prefix(ids, m);
    }
    case BenchmarkScheme::kA7: {
      need(ctx.ranking, "ranking");
      need(ctx.rng, "rng");
      const int n = ctx.ranking->n_clients();
      const int m = std::min(std::max(1, static_cast<int>(std::floor(ctx.m + 1e-9))), n);
      std::vector<int> ids(static_cast<std::size_t>(n));
      std::iota(ids.begin(), ids.end(), 1);
      ctx.rng->shuffle(ids);
      return detail::sorted_prefix(ids, m);
    }
  }
  throw std::invalid_argument("benchmark: unknown scheme");
}

// ---- action-based observation -----------------------------------------------

struct ActionLog {
  std::vector<int> truth;                   // ground-truth label per probe
  std::vector<std::vector<int>> decisions;  // [client][probe]
};

struct AccuracyEstimate {
  std::vector<double> accuracy;  // per client
  std::vector<int> order;        // ids, worst (lowest estimate) first
};

// Alternative observation channel: rank clients by how often their spectrum
// decisions agree with ground truth over shared probe events.
inline AccuracyEstimate estimate_rank_from_actions(const ActionLog& log,
                                                   int probe_count) {
  if (probe_count < 1)
    throw std::invalid_argument("estimate_rank_from_actions: probe_count must be >= 1");
  if (static_cast<int>(log.truth.size()) < probe_count)
    throw std::invalid_argument("estimate_rank_from_actions: not enough probes");
  AccuracyEstimate est;
  est.accuracy.resize(log.decisions.size());
  for (std::size_t i = 0; i < log.decisions.size(); ++i) {
    if (static_cast<int>(log.decisions[i].size()) < probe_count)
      throw std::invalid_argument(
          "estimate_rank_from_actions: client decision log too short");
    int agree = 0;
    for (int t = 0; t < probe_count; ++t)
      if (log.decisions[i][static_cast<std::size_t>(t)] ==
          log.truth[static_cast<std::size_t>(t)])
        ++agree;
    est.accuracy[i] = static_cast<double>(agree) / probe_count;
  }
  est.order.resize(est.accuracy.size());
  std::iota(est.order.begin(), est.order.end(), 1);
  std::sort(est.order.begin(), est.order.end(), [&](int a, int b) {
    const double aa = est.accuracy[static_cast<std::size_t>(a - 1)];
    const double ab = est.accuracy[static_cast<std::size_t>(b - 1)];
    if (aa != ab) return aa < ab;
    return a < b;
  });
  return est;
}

}  // namespace fljam
