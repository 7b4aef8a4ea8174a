#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fljam/channel.hpp"
#include "fljam/jam.hpp"
#include "fljam/model.hpp"

namespace fljam {

// Configuration problems carry the offending field name.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::runtime_error("config field '" + field + "': " + message),
        field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class AttackType { kNone, kUplink, kDownlink, kBoth };
enum class AttackScheme {
  kIdeal,
  kPractical,
  kDynamic,
  kSpeedAware,
  kProbAware,
  kRandom,
  kA1,
  kA2,
  kA3,
  kA4,
  kA5,
  kA6,
  kA7,
  kFixedSet,  // explicit target list, used by the single-client sweeps
};
enum class GeometryMode { kTable, kRandom };
enum class AggregationMode { kAuto, kPerRound, kCached };
enum class ObservationChannel { kOverhear, kActions };

struct ScenarioConfig {
  int n_clients = 10;
  int samples_per_client = 1000;
  int test_samples = 1000;
  int rounds = 100;
  int observe_rounds = 3;  // S

  GeometryMode geometry_mode = GeometryMode::kTable;
  std::string geometry_file;  // optional override for table mode
  RandomGeometryConfig random_geometry;
  SynthesisConfig synthesis;

  AttackType attack_type = AttackType::kNone;
  AttackScheme scheme = AttackScheme::kPractical;
  double budget_m = 1.0;
  int budget_k = 0;  // dynamic scheme; 0 = same as ceil(M)
  std::vector<int> fixed_uplink_targets;    // scheme = fixed_set
  std::vector<int> fixed_downlink_targets;  // scheme = fixed_set
  bool replan_each_round = false;
  ObservationChannel observation = ObservationChannel::kOverhear;
  int probe_count = 500;  // actions observation channel

  std::vector<int> speeds;  // empty = all 1

  SuccessModel::Mode success_mode = SuccessModel::Mode::kDeterministic;
  std::string success_profile_file;  // table mode; empty = built-in default
  SinrParams sinr;

  AggregationMode aggregation = AggregationMode::kAuto;
  TrainConfig train;
  bool reset_optimizer_each_round = false;

  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string out_dir = ".";

  bool heterogeneous() const {
    return std::any_of(speeds.begin(), speeds.end(), [](int s) { return s > 1; });
  }

  int max_speed() const {
    int mx = 1;
    for (int s : speeds) mx = std::max(mx, s);
    return mx;
  }

  AggregationMode effective_aggregation() const {
    if (aggregation != AggregationMode::kAuto) return aggregation;
    return heterogeneous() ? AggregationMode::kCached : AggregationMode::kPerRound;
  }

  std::vector<int> effective_speeds() const {
    if (speeds.empty()) return std::vector<int>(static_cast<std::size_t>(n_clients), 1);
    return speeds;
  }

  void validate() const {
    if (n_clients < 1) throw ConfigError("n_clients", "must be >= 1");
    if (samples_per_client < 2) throw ConfigError("samples_per_client", "must be >= 2");
    if (test_samples < 1) throw ConfigError("test_samples", "must be >= 1");
    if (rounds < 0) throw ConfigError("rounds", "must be >= 0");
    if (observe_rounds < 1) throw ConfigError("observe_rounds", "must be >= 1");
    if (attack_type != AttackType::kNone) {
      if (!(budget_m > 0)) throw ConfigError("budget_m", "must be > 0");
      if (scheme == AttackScheme::kDynamic) {
        const int k = budget_k > 0 ? budget_k : static_cast<int>(std::ceil(budget_m));
        if (k < static_cast<int>(std::ceil(budget_m)) || k > n_clients)
          throw ConfigError("budget_k", "need ceil(M) <= K <= N");
      }
      if (scheme == AttackScheme::kFixedSet &&
          fixed_uplink_targets.empty() && fixed_downlink_targets.empty())
        throw ConfigError("fixed_targets", "fixed_set scheme needs targets");
    }
    if (!speeds.empty() && static_cast<int>(speeds.size()) != n_clients)
      throw ConfigError("speeds", "need one entry per client");
    for (int s : speeds)
      if (s < 1) throw ConfigError("speeds", "entries must be >= 1");
    if (probe_count < 1) throw ConfigError("probe_count", "must be >= 1");
    if (seeds.empty()) throw ConfigError("seeds", "need at least one seed");
    try {
      train.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("train", e.what());
    }
    if (success_mode == SuccessModel::Mode::kSinr) {
      try {
        sinr.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError("sinr", e.what());
      }
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  return out;
}

inline double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing chars");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
}

inline int to_int(const std::string& key, const std::string& v) {
  const double x = to_real(key, v);
  const int i = static_cast<int>(x);
  if (static_cast<double>(i) != x) throw ConfigError(key, "expected an integer");
  return i;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key, "expected true/false");
}

}  // namespace detail

inline AttackType parse_attack_type(const std::string& v) {
  if (v == "none") return AttackType::kNone;
  if (v == "uplink") return AttackType::kUplink;
  if (v == "downlink") return AttackType::kDownlink;
  if (v == "both") return AttackType::kBoth;
  throw ConfigError("attack_type", "unknown value '" + v + "'");
}

inline AttackScheme parse_scheme(const std::string& v) {
  static const std::map<std::string, AttackScheme> table = {
      {"ideal", AttackScheme::kIdeal},
      {"practical", AttackScheme::kPractical},
      {"dynamic", AttackScheme::kDynamic},
      {"speed_aware", AttackScheme::kSpeedAware},
      {"prob_aware", AttackScheme::kProbAware},
      {"random", AttackScheme::kRandom},
      {"A1", AttackScheme::kA1}, {"a1", AttackScheme::kA1},
      {"A2", AttackScheme::kA2}, {"a2", AttackScheme::kA2},
      {"A3", AttackScheme::kA3}, {"a3", AttackScheme::kA3},
      {"A4", AttackScheme::kA4}, {"a4", AttackScheme::kA4},
      {"A5", AttackScheme::kA5}, {"a5", AttackScheme::kA5},
      {"A6", AttackScheme::kA6}, {"a6", AttackScheme::kA6},
      {"A7", AttackScheme::kA7}, {"a7", AttackScheme::kA7},
      {"fixed_set", AttackScheme::kFixedSet},
  };
  const auto it = table.find(v);
  if (it == table.end()) throw ConfigError("scheme", "unknown value '" + v + "'");
  return it->second;
}

inline const char* to_string(AttackScheme s) {
  switch (s) {
    case AttackScheme::kIdeal: return "ideal";
    case AttackScheme::kPractical: return "practical";
    case AttackScheme::kDynamic: return "dynamic";
    case AttackScheme::kSpeedAware: return "speed_aware";
    case AttackScheme::kProbAware: return "prob_aware";
    case AttackScheme::kRandom: return "random";
    case AttackScheme::kA1: return "A1";
    case AttackScheme::kA2: return "A2";
    case AttackScheme::kA3: return "A3";
    case AttackScheme::kA4: return "A4";
    case AttackScheme::kA5: return "A5";
    case AttackScheme::kA6: return "A6";
    case AttackScheme::kA7: return "A7";
    case AttackScheme::kFixedSet: return "fixed_set";
  }
  return "?";
}

inline const char* to_string(AttackType t) {
  switch (t) {
    case AttackType::kNone: return "none";
    case AttackType::kUplink: return "uplink";
    case AttackType::kDownlink: return "downlink";
    case AttackType::kBoth: return "both";
  }
  return "?";
}

// Applies one "key = value" assignment to the config.
inline void apply_config_entry(ScenarioConfig& cfg, const std::string& key,
                               const std::string& value) {
  using detail::to_bool;
  using detail::to_int;
  using detail::to_real;
  if (key == "n_clients") cfg.n_clients = to_int(key, value);
  else if (key == "samples_per_client") cfg.samples_per_client = to_int(key, value);
  else if (key == "test_samples") cfg.test_samples = to_int(key, value);
  else if (key == "rounds") cfg.rounds = to_int(key, value);
  else if (key == "observe_rounds") cfg.observe_rounds = to_int(key, value);
  else if (key == "geometry_mode") {
    if (value == "table") cfg.geometry_mode = GeometryMode::kTable;
    else if (value == "random") cfg.geometry_mode = GeometryMode::kRandom;
    else throw ConfigError(key, "expected table|random");
  } else if (key == "geometry_file") cfg.geometry_file = value;
  else if (key == "path_loss_exponent") cfg.random_geometry.path_loss_exponent = to_real(key, value);
  else if (key == "dist_min") cfg.random_geometry.dist_min = to_real(key, value);
  else if (key == "dist_max") cfg.random_geometry.dist_max = to_real(key, value);
  else if (key == "tx_power") cfg.random_geometry.tx_power = to_real(key, value);
  else if (key == "power_reference_db") cfg.synthesis.power_reference_db = to_real(key, value);
  else if (key == "qpsk_gain_db") cfg.synthesis.qpsk_gain_db = to_real(key, value);
  else if (key == "attack_type") cfg.attack_type = parse_attack_type(value);
  else if (key == "scheme") cfg.scheme = parse_scheme(value);
  else if (key == "budget_m") cfg.budget_m = to_real(key, value);
  else if (key == "budget_k") cfg.budget_k = to_int(key, value);
  else if (key == "replan_each_round") cfg.replan_each_round = to_bool(key, value);
  else if (key == "observation") {
    if (value == "overhear") cfg.observation = ObservationChannel::kOverhear;
    else if (value == "actions") cfg.observation = ObservationChannel::kActions;
    else throw ConfigError(key, "expected overhear|actions");
  } else if (key == "probe_count") cfg.probe_count = to_int(key, value);
  else if (key == "speeds") {
    cfg.speeds.clear();
    for (const auto& cell : detail::split_list(value))
      cfg.speeds.push_back(to_int(key, cell));
  } else if (key == "fixed_uplink_targets") {
    cfg.fixed_uplink_targets.clear();
    for (const auto& cell : detail::split_list(value))
      cfg.fixed_uplink_targets.push_back(to_int(key, cell));
  } else if (key == "fixed_downlink_targets") {
    cfg.fixed_downlink_targets.clear();
    for (const auto& cell : detail::split_list(value))
      cfg.fixed_downlink_targets.push_back(to_int(key, cell));
  } else if (key == "success_model") {
    if (value == "deterministic") cfg.success_mode = SuccessModel::Mode::kDeterministic;
    else if (value == "table") cfg.success_mode = SuccessModel::Mode::kTable;
    else if (value == "sinr") cfg.success_mode = SuccessModel::Mode::kSinr;
    else throw ConfigError(key, "expected deterministic|table|sinr");
  } else if (key == "success_profile_file") cfg.success_profile_file = value;
  else if (key == "sinr_signal_snr_db") cfg.sinr.signal_snr_db = to_real(key, value);
  else if (key == "sinr_jammer_power") cfg.sinr.jammer_power = to_real(key, value);
  else if (key == "sinr_threshold") cfg.sinr.threshold = to_real(key, value);
  else if (key == "sinr_fading") cfg.sinr.rayleigh_fading = to_bool(key, value);
  else if (key == "aggregation") {
    if (value == "auto") cfg.aggregation = AggregationMode::kAuto;
    else if (value == "per_round") cfg.aggregation = AggregationMode::kPerRound;
    else if (value == "cached") cfg.aggregation = AggregationMode::kCached;
    else throw ConfigError(key, "expected auto|per_round|cached");
  } else if (key == "learning_rate") cfg.train.learning_rate = to_real(key, value);
  else if (key == "rms_decay") cfg.train.rms_decay = to_real(key, value);
  else if (key == "epsilon") cfg.train.epsilon = to_real(key, value);
  else if (key == "dropout_rate") cfg.train.dropout_rate = to_real(key, value);
  else if (key == "epochs_per_round") cfg.train.epochs_per_round = to_int(key, value);
  else if (key == "batch_size") cfg.train.batch_size = to_int(key, value);
  else if (key == "reset_optimizer_each_round") cfg.reset_optimizer_each_round = to_bool(key, value);
  else if (key == "seeds") {
    cfg.seeds.clear();
    for (const auto& cell : detail::split_list(value))
      cfg.seeds.push_back(static_cast<std::uint64_t>(to_int(key, cell)));
  } else if (key == "out") cfg.out_dir = value;
  else throw ConfigError(key, "unknown key");
}

// Flat "key = value" file, one entry per line, lists comma-separated,
// '#' starts a comment.
inline ScenarioConfig parse_config_text(std::istream& in) {
  ScenarioConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno),
                        "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    apply_config_entry(cfg, key, value);
  }
  return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open file: " + path);
  return parse_config_text(in);
}

}  // namespace fljam
