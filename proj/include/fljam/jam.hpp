#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fljam/rng.hpp"

namespace fljam {

enum class LinkDirection { kUplink, kDownlink };

inline const char* to_string(LinkDirection d) {
  return d == LinkDirection::kUplink ? "uplink" : "downlink";
}

// Per-client jam success probabilities, indexed by client id (1-based).
struct SuccessProfile {
  std::vector<double> p_uplink;
  std::vector<double> p_downlink;

  int n_clients() const { return static_cast<int>(p_uplink.size()); }

  double prob(int client_id, LinkDirection dir) const {
    const auto& p = dir == LinkDirection::kUplink ? p_uplink : p_downlink;
    if (client_id < 1 || client_id > static_cast<int>(p.size()))
      throw std::runtime_error("success profile: no entry for client " +
                               std::to_string(client_id));
    return p[static_cast<std::size_t>(client_id - 1)];
  }

  void validate() const {
    if (p_uplink.size() != p_downlink.size())
      throw std::invalid_argument("success profile: direction size mismatch");
    for (const auto& p : {p_uplink, p_downlink})
      for (double v : p)
        if (!(v > 0.0 && v <= 1.0))
          throw std::invalid_argument(
              "success profile: probabilities must be in (0,1]");
  }
};

// Measured per-client attack success probabilities used as the default
// profile (same value both directions).
inline const SuccessProfile& default_success_profile() {
  static const SuccessProfile profile = [] {
    SuccessProfile p;
    p.p_uplink = {0.8269, 0.9695, 0.9528, 0.8510, 0.8991,
                  0.8899, 0.9303, 0.9577, 0.8188, 0.8057};
    p.p_downlink = p.p_uplink;
    return p;
  }();
  return profile;
}

// SINR-threshold link model: a jammed transmission fails when
// SINR = S / (noise + I) falls below tau. Signal and jamming powers run
// through independent Rayleigh-power (exponential) fades when enabled.
struct SinrParams {
  double signal_snr_db = 12.0;  // mean legitimate-link SNR against unit noise
  double jammer_power = 10.0;   // mean received jamming power, linear
  double threshold = 4.0;       // tau
  bool rayleigh_fading = true;

  void validate() const {
    if (!(threshold > 0))
      throw std::invalid_argument("sinr params: threshold must be > 0");
    if (jammer_power < 0)
      throw std::invalid_argument("sinr params: jammer_power must be >= 0");
  }
};

struct SuccessModel {
  enum class Mode { kDeterministic, kTable, kSinr };
  Mode mode = Mode::kDeterministic;
  SuccessProfile table;   // used in kTable mode
  SinrParams sinr;        // used in kSinr mode
};

namespace detail {

inline bool sinr_attack_success(const SinrParams& p, Rng& rng) {
  const double mean_signal = std::pow(10.0, p.signal_snr_db / 10.0);
  const double s = p.rayleigh_fading ? rng.exponential(mean_signal) : mean_signal;
  const double i = p.rayleigh_fading ? rng.exponential(p.jammer_power)
                                     : p.jammer_power;
  return s / (1.0 + i) < p.threshold;
}

}  // namespace detail

// Resolves one attempted jam. Deterministic mode always succeeds; table mode
// succeeds with the client's per-direction probability; sinr mode succeeds
// when the sampled SINR drops below the threshold. Unjammed transmissions
// never fail anywhere in the simulator, so this is the only loss mechanism.
inline bool resolve_attack(int target, LinkDirection direction,
                           const SuccessModel& model, Rng& rng) {
  if (target < 1) throw std::invalid_argument("resolve_attack: bad target id");
  switch (model.mode) {
    case SuccessModel::Mode::kDeterministic:
      return true;
    case SuccessModel::Mode::kTable:
      return rng.uniform() < model.table.prob(target, direction);
    case SuccessModel::Mode::kSinr:
      return detail::sinr_attack_success(model.sinr, rng);
  }
  return true;
}

// Monte-Carlo estimate of P[SINR < tau] for the given link parameters.
// Deterministic given the rng state; also usable as a generator of plausible
// per-client success probabilities for table mode.
inline double sinr_success_probability(const SinrParams& params, int n_mc,
                                       Rng& rng) {
  params.validate();
  if (n_mc < 1)
    throw std::invalid_argument("sinr_success_probability: n_mc must be >= 1");
  int hits = 0;
  for (int k = 0; k < n_mc; ++k)
    if (detail::sinr_attack_success(params, rng)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(n_mc);
}

// Profile file: rows "client_id, p_uplink, p_downlink". '#' comments allowed.
inline SuccessProfile load_success_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open profile file: " + path);
  SuccessProfile out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string cell;
    double v[3];
    int got = 0;
    while (std::getline(row, cell, ',') && got < 3) v[got++] = std::stod(cell);
    if (got != 3)
      throw std::runtime_error("profile file " + path +
                               ": expected 3 fields at line " +
                               std::to_string(lineno));
    const int id = static_cast<int>(v[0]);
    if (id != static_cast<int>(out.p_uplink.size()) + 1)
      throw std::runtime_error("profile file " + path +
                               ": client ids must be 1..N in order");
    out.p_uplink.push_back(v[1]);
    out.p_downlink.push_back(v[2]);
  }
  out.validate();
  return out;
}

inline void save_success_profile(const SuccessProfile& profile,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write profile file: " + path);
  out << "# client_id, p_uplink, p_downlink\n";
  char buf[96];
  for (int i = 0; i < profile.n_clients(); ++i) {
    std::snprintf(buf, sizeof buf, "%d, %.6f, %.6f\n", i + 1,
                  profile.p_uplink[static_cast<std::size_t>(i)],
                  profile.p_downlink[static_cast<std::size_t>(i)]);
    out << buf;
  }
}

}  // namespace fljam
