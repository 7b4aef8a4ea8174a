#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fljam/federation.hpp"
#include "fljam/scenario.hpp"

namespace fljam {

// ---- ranking comparison -----------------------------------------------------

// Size of the symmetric prefix set difference |prefix_k(a) \ prefix_k(b)|.
inline int compare_rankings(const std::vector<int>& a,
                            const std::vector<int>& b, int k) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("compare_rankings: need equal-size rankings");
  std::set<int> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  if (sa != sb || sa.size() != a.size())
    throw std::invalid_argument(
        "compare_rankings: rankings must be permutations of the same ids");
  const int n = static_cast<int>(a.size());
  if (k < 1 || k > n - 1)
    throw std::invalid_argument("compare_rankings: need 1 <= k <= N-1");
  std::set<int> pa(a.begin(), a.begin() + k);
  int diff = 0;
  for (int i = 0; i < k; ++i)
    if (!pa.count(b[static_cast<std::size_t>(i)])) ++diff;
  return diff;
}

// Ranking file: client ids, comma- or newline-separated.
inline std::vector<int> load_ranking(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ranking file: " + path);
  std::vector<int> out;
  std::string tok;
  while (in >> tok) {
    std::istringstream cell(tok);
    std::string piece;
    while (std::getline(cell, piece, ','))
      if (!piece.empty()) out.push_back(std::stoi(piece));
  }
  if (out.empty()) throw std::runtime_error("ranking file " + path + ": empty");
  return out;
}

// ---- CSV output ---------------------------------------------------------------

namespace detail {

inline std::string join_ids(const std::vector<int>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(ids[i]);
  }
  return out;
}

inline std::string fmt(double v, const char* spec = "%.6f") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace detail

inline void write_round_log(const TrainingLog& log, int n_clients,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write round log: " + path);
  out << "round,global_acc";
  for (int i = 1; i <= n_clients; ++i) out << ",local_acc_" << i;
  out << ",uplink_jammed_ids,downlink_jammed_ids,budget_spent\n";
  for (const auto& r : log.rounds) {
    out << r.round_index << ',' << detail::fmt(r.global_accuracy);
    for (int i = 0; i < n_clients; ++i) {
      out << ',';
      if (static_cast<int>(r.local_accuracies.size()) == n_clients)
        out << detail::fmt(r.local_accuracies[static_cast<std::size_t>(i)]);
    }
    out << ',' << detail::join_ids(r.uplink_jammed) << ','
        << detail::join_ids(r.downlink_jammed) << ',' << r.budget_spent << '\n';
  }
}

inline void write_plan_dump(const TrainingLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write plan dump: " + path);
  out << "scheme = " << to_string(log.plan.scheme) << '\n'
      << "attack_type = " << to_string(log.plan.attack_type) << '\n'
      << "start_round = " << log.plan.start_round << '\n'
      << "uplink_selected = " << detail::join_ids(log.plan.uplink_targets) << '\n'
      << "downlink_selected = " << detail::join_ids(log.plan.downlink_targets)
      << '\n'
      << "uplink_reciprocal_budget = "
      << detail::fmt(log.plan.reciprocal_budget_uplink, "%.9g") << '\n'
      << "downlink_reciprocal_budget = "
      << detail::fmt(log.plan.reciprocal_budget_downlink, "%.9g") << '\n';
  if (log.plan.dynamic)
    out << "dynamic_prob = " << detail::fmt(log.plan.dynamic_prob, "%.9g") << '\n';
  out << "# round, uplink_targets, downlink_targets, consumed\n";
  for (const auto& r : log.rounds)
    out << r.round_index << ", " << detail::join_ids(r.uplink_targets) << ", "
        << detail::join_ids(r.downlink_targets) << ", " << r.budget_spent
        << '\n';
}

struct SummaryRow {
  std::string scheme;
  std::string attack_type;
  double m = 0.0;
  int k = 0;
  std::uint64_t seed = 0;
  double final_accuracy = 0.0;
  double mean_budget = 0.0;
};

inline void write_summary(const std::vector<SummaryRow>& rows,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write summary: " + path);
  out << "scheme,attack_type,M,K,seed,final_accuracy,mean_budget\n";
  for (const auto& r : rows)
    out << r.scheme << ',' << r.attack_type << ',' << detail::fmt(r.m, "%.4f")
        << ',' << r.k << ',' << r.seed << ',' << detail::fmt(r.final_accuracy)
        << ',' << detail::fmt(r.mean_budget, "%.4f") << '\n';
}

// ---- scenario runner ----------------------------------------------------------

// Full multi-seed scenario: per-seed round logs and plan dumps plus one
// summary CSV in the output directory.
inline std::vector<SummaryRow> run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  std::vector<SummaryRow> rows;
  for (const auto seed : cfg.seeds) {
    const TrainingLog log = run_training(cfg, seed);
    write_round_log(log, cfg.n_clients,
                    cfg.out_dir + "/round_log_seed" + std::to_string(seed) + ".csv");
    write_plan_dump(log,
                    cfg.out_dir + "/plan_seed" + std::to_string(seed) + ".txt");
    SummaryRow row;
    row.scheme = to_string(cfg.scheme);
    row.attack_type = to_string(cfg.attack_type);
    row.m = cfg.attack_type == AttackType::kNone ? 0.0 : cfg.budget_m;
    row.k = cfg.scheme == AttackScheme::kDynamic
                ? (cfg.budget_k > 0 ? cfg.budget_k
                                    : static_cast<int>(std::ceil(cfg.budget_m)))
                : 0;
    row.seed = seed;
    row.final_accuracy = log.final_global_accuracy;
    row.mean_budget = log.mean_budget_per_round;
    rows.push_back(row);
  }
  write_summary(rows, cfg.out_dir + "/summary.csv");
  return rows;
}

// ---- experiment reproductions -------------------------------------------------

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Median final accuracy across the config's seeds.
inline double median_final_accuracy(const ScenarioConfig& cfg) {
  std::vector<double> accs;
  RunOptions opts;
  opts.per_round_locals = false;
  for (const auto seed : cfg.seeds)
    accs.push_back(run_training(cfg, seed, opts).final_global_accuracy);
  return median(accs);
}

}  // namespace detail

inline const std::vector<std::string>& reproduce_names() {
  static const std::vector<std::string> names = {
      "table2", "table3", "table4", "table6", "fig2", "fig3",
      "fig4",   "fig5",   "fig6",   "fig7",   "fig8", "fig9"};
  return names;
}

// Reruns the sweep behind one of the referenced tables/figures and writes a
// CSV with the corresponding structure. `base` carries the shared knobs
// (seeds, rounds, sizes); scheme/attack fields are overridden per experiment.
inline std::string reproduce_experiment(const std::string& name,
                                        ScenarioConfig base,
                                        const std::string& out_dir) {
  base.attack_type = AttackType::kNone;
  base.validate();
  std::filesystem::create_directories(out_dir);
  const std::string path = out_dir + "/" + name + ".csv";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);

  const auto is = [&](const char* n) { return name == n; };

  if (is("table2")) {
    // no-attack run: per-client channel values and median local accuracy;
    // client 0 row carries the global accuracy.
    std::vector<std::vector<double>> locals;
    std::vector<double> globals;
    RunOptions opts;
    opts.per_round_locals = false;
    std::vector<ClientGeometry> geos;
    for (const auto seed : base.seeds) {
      const auto log = run_training(base, seed, opts);
      locals.push_back(log.final_local_accuracies);
      globals.push_back(log.final_global_accuracy);
      geos = log.geometries;
    }
    out << "client,snr_db,phase_shift,median_local_acc\n";
    out << "0,," << ',' << detail::fmt(detail::median(globals)) << '\n';
    for (int i = 0; i < base.n_clients; ++i) {
      std::vector<double> per_seed;
      for (const auto& l : locals) per_seed.push_back(l[static_cast<std::size_t>(i)]);
      out << (i + 1) << ',' << detail::fmt(geos[static_cast<std::size_t>(i)].snr_db, "%.2f")
          << ',' << detail::fmt(geos[static_cast<std::size_t>(i)].phase_shift, "%.2f")
          << ',' << detail::fmt(detail::median(per_seed)) << '\n';
    }
    return path;
  }

  if (is("table3")) {
    out << "attacked_client,uplink_acc,downlink_acc\n";
    for (int c = 1; c <= base.n_clients; ++c) {
      ScenarioConfig cfg = base;
      cfg.scheme = AttackScheme::kFixedSet;
      cfg.budget_m = 1;
      cfg.attack_type = AttackType::kUplink;
      cfg.fixed_uplink_targets = {c};
      const double up = detail::median_final_accuracy(cfg);
      cfg.attack_type = AttackType::kDownlink;
      cfg.fixed_uplink_targets.clear();
      cfg.fixed_downlink_targets = {c};
      const double down = detail::median_final_accuracy(cfg);
      out << c << ',' << detail::fmt(up) << ',' << detail::fmt(down) << '\n';
    }
    return path;
  }

  if (is("table4")) {
    out << "attack_type,M,sensing_once,sensing_each_round\n";
    for (const auto type :
         {AttackType::kUplink, AttackType::kDownlink, AttackType::kBoth}) {
      for (int m : {1, 2}) {
        ScenarioConfig cfg = base;
        cfg.scheme = AttackScheme::kPractical;
        cfg.attack_type = type;
        cfg.budget_m = m;
        cfg.replan_each_round = false;
        const double once = detail::median_final_accuracy(cfg);
        cfg.replan_each_round = true;
        const double each = detail::median_final_accuracy(cfg);
        out << to_string(type) << ',' << m << ',' << detail::fmt(once) << ','
            << detail::fmt(each) << '\n';
      }
    }
    return path;
  }

  if (is("table6")) {
    out << "attack_type,M,K,median_acc\n";
    const std::vector<std::pair<int, int>> grid = {
        {1, 1}, {1, 2}, {2, 2}, {2, 3}, {2, 4}};
    for (const auto type :
         {AttackType::kUplink, AttackType::kDownlink, AttackType::kBoth}) {
      for (const auto& [m, k] : grid) {
        ScenarioConfig cfg = base;
        cfg.scheme = AttackScheme::kDynamic;
        cfg.attack_type = type;
        cfg.budget_m = m;
        cfg.budget_k = k;
        out << to_string(type) << ',' << m << ',' << k << ','
            << detail::fmt(detail::median_final_accuracy(cfg)) << '\n';
      }
    }
    return path;
  }

  if (is("fig2")) {
    out << "M,uplink,downlink,both,random_downlink\n";
    const double baseline = detail::median_final_accuracy(base);
    out << 0 << ',' << detail::fmt(baseline) << ',' << detail::fmt(baseline)
        << ',' << detail::fmt(baseline) << ',' << detail::fmt(baseline) << '\n';
    for (int m = 1; m <= 5; ++m) {
      ScenarioConfig cfg = base;
      cfg.budget_m = m;
      cfg.scheme = AttackScheme::kPractical;
      cfg.attack_type = AttackType::kUplink;
      const double up = detail::median_final_accuracy(cfg);
      cfg.attack_type = AttackType::kDownlink;
      const double down = detail::median_final_accuracy(cfg);
      cfg.attack_type = AttackType::kBoth;
      const double both = detail::median_final_accuracy(cfg);
      cfg.scheme = AttackScheme::kRandom;
      cfg.attack_type = AttackType::kDownlink;
      const double rnd = detail::median_final_accuracy(cfg);
      out << m << ',' << detail::fmt(up) << ',' << detail::fmt(down) << ','
          << detail::fmt(both) << ',' << detail::fmt(rnd) << '\n';
    }
    return path;
  }

  const std::map<std::string, AttackScheme> speed_figs = {
      {"fig3", AttackScheme::kA1},
      {"fig4", AttackScheme::kA2},
      {"fig5", AttackScheme::kA3},
      {"fig6", AttackScheme::kA4}};
  if (speed_figs.count(name)) {
    ScenarioConfig cfg = base;
    if (!cfg.heterogeneous()) {
      cfg.speeds.assign(static_cast<std::size_t>(cfg.n_clients), 1);
      for (int i = 0; i < cfg.n_clients * 6 / 10; ++i)
        cfg.speeds[static_cast<std::size_t>(i)] = 2;
    }
    out << "M,designed,benchmark\n";
    const double baseline = detail::median_final_accuracy(cfg);
    out << 0 << ',' << detail::fmt(baseline) << ',' << detail::fmt(baseline) << '\n';
    for (int m = 1; m <= 6; ++m) {
      cfg.attack_type = AttackType::kUplink;
      cfg.budget_m = m;
      cfg.scheme = AttackScheme::kSpeedAware;
      const double designed = detail::median_final_accuracy(cfg);
      cfg.scheme = speed_figs.at(name);
      const double bench = detail::median_final_accuracy(cfg);
      out << m << ',' << detail::fmt(designed) << ',' << detail::fmt(bench) << '\n';
    }
    return path;
  }

  const std::map<std::string, AttackScheme> prob_figs = {
      {"fig7", AttackScheme::kA5},
      {"fig8", AttackScheme::kA6},
      {"fig9", AttackScheme::kA7}};
  if (prob_figs.count(name)) {
    ScenarioConfig cfg = base;
    cfg.success_mode = SuccessModel::Mode::kTable;
    out << "M,designed,benchmark\n";
    const double baseline = detail::median_final_accuracy(cfg);
    out << 0 << ',' << detail::fmt(baseline) << ',' << detail::fmt(baseline) << '\n';
    for (int m = 1; m <= 8; ++m) {
      cfg.attack_type = AttackType::kBoth;
      cfg.budget_m = m;
      cfg.scheme = AttackScheme::kProbAware;
      const double designed = detail::median_final_accuracy(cfg);
      cfg.scheme = prob_figs.at(name);
      const double bench = detail::median_final_accuracy(cfg);
      out << m << ',' << detail::fmt(designed) << ',' << detail::fmt(bench) << '\n';
    }
    return path;
  }

  std::string valid;
  for (const auto& n : reproduce_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw std::runtime_error("unknown experiment '" + name + "'; valid names: " + valid);
}

}  // namespace fljam
