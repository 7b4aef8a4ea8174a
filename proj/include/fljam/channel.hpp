#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fljam/rng.hpp"

namespace fljam {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

// Background waveform classes. Label 0 is BPSK, label 1 is QPSK.
enum class WaveformLabel : int { kBpsk = 0, kQpsk = 1 };

inline double normalize_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0) a += kTwoPi;
  return a;
}

// Channel parameters of one spectrum sensor: link SNR against unit noise power
// and a constant phase rotation. `distance` is kept when geometry was placed
// randomly; it is informational once snr_db is fixed.
struct ClientGeometry {
  int client_id = 0;  // 1-based
  double snr_db = 0.0;
  double phase_shift = 0.0;  // radians, [0, 2*pi)
  double distance = 0.0;     // meters, 0 when unused

  static ClientGeometry make(int id, double snr_db, double phase,
                             double distance = 0.0) {
    if (!std::isfinite(snr_db) && snr_db > 0)
      throw std::invalid_argument("geometry: snr_db must be finite");
    return ClientGeometry{id, snr_db, normalize_angle(phase), distance};
  }
};

// One sensing sample: 16 per-symbol phases in [0, 2*pi) followed by 16
// per-symbol powers.
struct FeatureSample {
  static constexpr int kSymbols = 16;
  static constexpr int kFeatures = 32;
  std::array<double, kFeatures> features{};
  WaveformLabel label = WaveformLabel::kBpsk;
};

struct ClientDataset {
  std::vector<FeatureSample> samples;
  ClientGeometry geometry;  // for mixed sets: id 0, snr/phase meaningless
};

// Realized per-client channel values used throughout the experiments
// (client id, SNR dB, phase shift). The last phase is stated as 9.40 in the
// source table; phases live in [0, 2*pi), so it is stored normalized.
inline const std::vector<ClientGeometry>& default_geometry_table() {
  static const std::vector<ClientGeometry> table = [] {
    const double snr[] = {9.34, 15.75, 13.04, 13.87, 10.27,
                          10.40, 13.22, 9.59, 12.32, 8.70};
    const double phase[] = {1.28, 0.43, 5.18, 1.93, 4.37,
                            3.09, 5.42, 0.77, 2.44, 9.40};
    std::vector<ClientGeometry> t;
    for (int i = 0; i < 10; ++i)
      t.push_back(ClientGeometry::make(i + 1, snr[i], phase[i]));
    return t;
  }();
  return table;
}

// No-attack local model accuracies from the same experiment table, used by the
// idealized selection scheme in tests.
inline const std::vector<double>& default_local_accuracy_table() {
  static const std::vector<double> acc = {0.898, 0.784, 0.951, 0.920, 0.868,
                                          0.647, 0.893, 0.643, 0.827, 0.920};
  return acc;
}

// Unit-power baseband symbols. BPSK draws from {+1, -1}, QPSK from
// {(+-1 +- j)/sqrt(2)}.
inline std::vector<std::complex<double>> synthesize_symbols(WaveformLabel label,
                                                            int n_symbols,
                                                            Rng& rng) {
  if (n_symbols < 1)
    throw std::invalid_argument("synthesize_symbols: n_symbols must be >= 1");
  std::vector<std::complex<double>> out;
  out.reserve(static_cast<std::size_t>(n_symbols));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int k = 0; k < n_symbols; ++k) {
    if (label == WaveformLabel::kBpsk) {
      out.emplace_back(rng.bernoulli(0.5) ? 1.0 : -1.0, 0.0);
    } else {
      const double re = rng.bernoulli(0.5) ? inv_sqrt2 : -inv_sqrt2;
      const double im = rng.bernoulli(0.5) ? inv_sqrt2 : -inv_sqrt2;
      out.emplace_back(re, im);
    }
  }
  return out;
}

// Core channel: r_i = gain * exp(j*theta) * s_i + n_i with complex Gaussian
// noise of total power `noise_power`.
inline std::vector<std::complex<double>> apply_channel_gain(
    const std::vector<std::complex<double>>& symbols, double gain,
    double phase_shift, double noise_power, Rng& rng) {
  if (symbols.empty())
    throw std::invalid_argument("apply_channel: symbols must be nonempty");
  if (noise_power < 0)
    throw std::invalid_argument("apply_channel: noise_power must be >= 0");
  const std::complex<double> rot = gain * std::polar(1.0, phase_shift);
  const double comp_sigma = std::sqrt(noise_power / 2.0);
  std::vector<std::complex<double>> out;
  out.reserve(symbols.size());
  for (const auto& s : symbols) {
    std::complex<double> n(0.0, 0.0);
    if (comp_sigma > 0)
      n = {rng.normal(0.0, comp_sigma), rng.normal(0.0, comp_sigma)};
    out.push_back(rot * s + n);
  }
  return out;
}

// r_i = g * exp(j*theta) * s_i + n_i where g realizes snr_db against the
// configured noise power: g = sqrt(noise_power * 10^(snr/10)), i.e. against
// unit noise power g = sqrt(10^(snr/10)). Special cases: snr_db = +inf is a
// noiseless unit-gain link; snr_db = -inf is zero signal gain (pure noise);
// noise_power = 0 keeps the unit-noise gain on a noiseless link.
inline std::vector<std::complex<double>> apply_channel(
    const std::vector<std::complex<double>>& symbols, double snr_db,
    double phase_shift, Rng& rng, double noise_power = 1.0) {
  double gain;
  double npow = noise_power;
  if (std::isinf(snr_db) && snr_db > 0) {
    gain = 1.0;
    npow = 0.0;
  } else if (std::isinf(snr_db)) {
    gain = 0.0;
  } else if (noise_power == 0.0) {
    gain = std::pow(10.0, snr_db / 20.0);
  } else {
    gain = std::sqrt(noise_power) * std::pow(10.0, snr_db / 20.0);
  }
  return apply_channel_gain(symbols, gain, phase_shift, npow, rng);
}

// 16 received samples -> 32 features: phases first, powers second.
// arg(0) is defined as 0 so the zero-signal case stays finite.
inline std::array<double, FeatureSample::kFeatures> extract_features(
    const std::vector<std::complex<double>>& received) {
  if (received.size() != FeatureSample::kSymbols)
    throw std::invalid_argument("extract_features: expected 16 samples");
  std::array<double, FeatureSample::kFeatures> f{};
  for (int k = 0; k < FeatureSample::kSymbols; ++k) {
    const auto& r = received[static_cast<std::size_t>(k)];
    double phase = 0.0;
    if (r.real() != 0.0 || r.imag() != 0.0)
      phase = normalize_angle(std::arg(r));
    f[static_cast<std::size_t>(k)] = phase;
    f[static_cast<std::size_t>(FeatureSample::kSymbols + k)] = std::norm(r);
  }
  return f;
}

// Scaling conventions for dataset synthesis. Per-client link SNR always
// equals the geometry's snr_db; the reference level only places the common
// noise floor so feature powers stay O(1) across the client range, and the
// waveform gain offset separates the two transmissions' received power
// levels (an unnormalized +-1 +- j QPSK modulator is 3 dB above BPSK; the
// default is wider so the mixture stays learnable at desk scale).
struct SynthesisConfig {
  double power_reference_db = 11.65;  // mean of the default geometry table
  double qpsk_gain_db = 7.0;          // QPSK received power offset vs BPSK

  double noise_power() const { return std::pow(10.0, -power_reference_db / 10.0); }
  double gain(double snr_db) const {
    return std::pow(10.0, (snr_db - power_reference_db) / 20.0);
  }
  double waveform_amp(WaveformLabel label) const {
    return label == WaveformLabel::kQpsk ? std::pow(10.0, qpsk_gain_db / 20.0)
                                         : 1.0;
  }
};

namespace detail {

inline FeatureSample synth_sample(const ClientGeometry& g, WaveformLabel label,
                                  Rng& rng, const SynthesisConfig& cfg) {
  auto symbols = synthesize_symbols(label, FeatureSample::kSymbols, rng);
  const double amp = cfg.waveform_amp(label) * cfg.gain(g.snr_db);
  auto received =
      apply_channel_gain(symbols, amp, g.phase_shift, cfg.noise_power(), rng);
  FeatureSample s;
  s.features = extract_features(received);
  s.label = label;
  return s;
}

}  // namespace detail

// Per-client dataset: n_samples sensing samples from fresh channel-impaired
// symbols, labels balanced (BPSK first half, QPSK second half).
inline ClientDataset build_client_dataset(const ClientGeometry& geometry,
                                          int n_samples, Rng& rng,
                                          const SynthesisConfig& cfg = {}) {
  if (n_samples < 2)
    throw std::invalid_argument("build_client_dataset: n_samples must be >= 2");
  ClientDataset ds;
  ds.geometry = geometry;
  ds.samples.reserve(static_cast<std::size_t>(n_samples));
  const int n_bpsk = (n_samples + 1) / 2;
  for (int k = 0; k < n_samples; ++k) {
    const WaveformLabel label =
        k < n_bpsk ? WaveformLabel::kBpsk : WaveformLabel::kQpsk;
    ds.samples.push_back(detail::synth_sample(geometry, label, rng, cfg));
  }
  return ds;
}

// Mixed evaluation set: samples drawn round-robin across all geometries, label
// balance kept within each geometry's quota.
inline ClientDataset build_test_dataset(
    const std::vector<ClientGeometry>& geometries, int n_samples, Rng& rng,
    const SynthesisConfig& cfg = {}) {
  if (geometries.empty())
    throw std::invalid_argument("build_test_dataset: no geometries");
  if (n_samples < 1)
    throw std::invalid_argument("build_test_dataset: n_samples must be >= 1");
  const int n = static_cast<int>(geometries.size());
  std::vector<int> quota(static_cast<std::size_t>(n), n_samples / n);
  for (int i = 0; i < n_samples % n; ++i) quota[static_cast<std::size_t>(i)]++;
  std::vector<int> bpsk_quota(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    bpsk_quota[static_cast<std::size_t>(i)] = (quota[static_cast<std::size_t>(i)] + 1) / 2;

  ClientDataset ds;
  ds.samples.reserve(static_cast<std::size_t>(n_samples));
  std::vector<int> emitted(static_cast<std::size_t>(n), 0);
  int g = 0;
  for (int k = 0; k < n_samples; ++k) {
    while (emitted[static_cast<std::size_t>(g)] >= quota[static_cast<std::size_t>(g)])
      g = (g + 1) % n;
    const auto gi = static_cast<std::size_t>(g);
    const WaveformLabel label = emitted[gi] < bpsk_quota[gi]
                                    ? WaveformLabel::kBpsk
                                    : WaveformLabel::kQpsk;
    ds.samples.push_back(
        detail::synth_sample(geometries[gi], label, rng, cfg));
    emitted[gi]++;
    g = (g + 1) % n;
  }
  return ds;
}

// Per-geometry test slice: indices of test samples synthesized from the given
// client's geometry (round-robin layout).
inline std::vector<int> test_indices_for_geometry(int n_samples,
                                                  int n_geometries,
                                                  int geometry_pos) {
  std::vector<int> quota(static_cast<std::size_t>(n_geometries),
                         n_samples / n_geometries);
  for (int i = 0; i < n_samples % n_geometries; ++i)
    quota[static_cast<std::size_t>(i)]++;
  std::vector<int> emitted(static_cast<std::size_t>(n_geometries), 0);
  std::vector<int> out;
  int g = 0;
  for (int k = 0; k < n_samples; ++k) {
    while (emitted[static_cast<std::size_t>(g)] >= quota[static_cast<std::size_t>(g)])
      g = (g + 1) % n_geometries;
    if (g == geometry_pos) out.push_back(k);
    emitted[static_cast<std::size_t>(g)]++;
    g = (g + 1) % n_geometries;
  }
  return out;
}

// Random placement mode: clients dropped uniformly on a distance ring, SNR set
// by path loss tx_power / d^alpha against unit noise, phase uniform.
struct RandomGeometryConfig {
  double path_loss_exponent = 2.0;
  double dist_min = 1.0;
  double dist_max = 5.0;
  double tx_power = 200.0;  // linear, so mid distances land near 10-20 dB SNR
};

inline std::vector<ClientGeometry> random_geometry(
    int n_clients, const RandomGeometryConfig& cfg, Rng& rng) {
  if (n_clients < 1)
    throw std::invalid_argument("random_geometry: n_clients must be >= 1");
  if (cfg.dist_min <= 0 || cfg.dist_max < cfg.dist_min)
    throw std::invalid_argument("random_geometry: bad distance range");
  std::vector<ClientGeometry> out;
  for (int i = 0; i < n_clients; ++i) {
    const double d = rng.uniform(cfg.dist_min, cfg.dist_max);
    const double snr_linear =
        cfg.tx_power / std::pow(d, cfg.path_loss_exponent);
    const double snr_db = 10.0 * std::log10(snr_linear);
    const double phase = rng.uniform(0.0, kTwoPi);
    out.push_back(ClientGeometry::make(i + 1, snr_db, phase, d));
  }
  return out;
}

// Geometry table file: plain-text rows "client_id, snr_db, phase_shift".
// Blank lines and lines starting with '#' are skipped.
inline std::vector<ClientGeometry> load_geometry_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open geometry file: " + path);
  std::vector<ClientGeometry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::string cell;
    std::istringstream row(line);
    double v[3];
    int got = 0;
    while (std::getline(row, cell, ',') && got < 3) {
      try {
        v[got] = std::stod(cell);
      } catch (const std::exception&) {
        throw std::runtime_error("geometry file " + path + ": bad value at line " +
                                 std::to_string(lineno));
      }
      ++got;
    }
    if (got != 3)
      throw std::runtime_error("geometry file " + path +
                               ": expected 3 fields at line " +
                               std::to_string(lineno));
    out.push_back(ClientGeometry::make(static_cast<int>(v[0]), v[1], v[2]));
  }
  if (out.empty())
    throw std::runtime_error("geometry file " + path + ": no rows");
  return out;
}

inline void save_geometry_table(const std::vector<ClientGeometry>& table,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write geometry file: " + path);
  out << "# client_id, snr_db, phase_shift\n";
  char buf[96];
  for (const auto& g : table) {
    std::snprintf(buf, sizeof buf, "%d, %.6f, %.6f\n", g.client_id, g.snr_db,
                  g.phase_shift);
    out << buf;
  }
}

}  // namespace fljam
