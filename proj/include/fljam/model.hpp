#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fljam/channel.hpp"
#include "fljam/rng.hpp"

namespace fljam {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Local training hyperparameters. Defaults follow the experiment setup: one
// full pass over the local data per round, RMSprop with standard constants.
struct TrainConfig {
  double learning_rate = 1e-3;
  double rms_decay = 0.9;
  double epsilon = 1e-7;
  double dropout_rate = 0.2;
  int epochs_per_round = 1;
  int batch_size = 32;

  void validate() const {
    if (!(learning_rate > 0) && learning_rate != 0.0)
      throw std::invalid_argument("train config: learning_rate must be >= 0");
    if (!(rms_decay > 0 && rms_decay < 1))
      throw std::invalid_argument("train config: rms_decay must be in (0,1)");
    if (!(epsilon > 0))
      throw std::invalid_argument("train config: epsilon must be > 0");
    if (!(dropout_rate >= 0 && dropout_rate < 1))
      throw std::invalid_argument("train config: dropout_rate must be in [0,1)");
    if (epochs_per_round < 1)
      throw std::invalid_argument("train config: epochs_per_round must be >= 1");
    if (batch_size < 1)
      throw std::invalid_argument("train config: batch_size must be >= 1");
  }
};

// Dense feedforward classifier: ReLU hidden layers, softmax output,
// crossentropy loss. Parameters are value-semantic; copying a model copies
// the weights.
//
// Canonical flattening order (used by flatten(), distance(), fedavg() and the
// snapshot file): for each layer in order, the weight matrix row-major
// (input index outer, output index inner), then the bias vector.
class Mlp {
 public:
  std::vector<Matrix> w;  // layer l: dims[l] x dims[l+1]
  std::vector<Vector> b;

  Mlp() = default;

  explicit Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 2)
      throw std::invalid_argument("mlp: need at least input and output dims");
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      w.emplace_back(Matrix::Zero(dims_[l], dims_[l + 1]));
      b.emplace_back(Vector::Zero(dims_[l + 1]));
    }
  }

  // The signal classifier stack: 32 -> 128 -> 64 -> 32 -> 2 (14,626 params).
  static const std::vector<int>& signal_dims() {
    static const std::vector<int> d = {32, 128, 64, 32, 2};
    return d;
  }

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::size_t layer_count() const { return w.size(); }

  int param_count() const {
    int n = 0;
    for (std::size_t l = 0; l < w.size(); ++l)
      n += static_cast<int>(w[l].size() + b[l].size());
    return n;
  }

  bool same_shape(const Mlp& other) const { return dims_ == other.dims_; }

  Vector flatten() const {
    Vector out(param_count());
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < w.size(); ++l) {
      for (Eigen::Index r = 0; r < w[l].rows(); ++r)
        for (Eigen::Index c = 0; c < w[l].cols(); ++c) out[k++] = w[l](r, c);
      for (Eigen::Index i = 0; i < b[l].size(); ++i) out[k++] = b[l][i];
    }
    return out;
  }

  void set_from_flat(const Vector& v) {
    if (v.size() != param_count())
      throw std::invalid_argument("mlp: flat vector length mismatch");
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < w.size(); ++l) {
      for (Eigen::Index r = 0; r < w[l].rows(); ++r)
        for (Eigen::Index c = 0; c < w[l].cols(); ++c) w[l](r, c) = v[k++];
      for (Eigen::Index i = 0; i < b[l].size(); ++i) b[l][i] = v[k++];
    }
  }

 private:
  std::vector<int> dims_;
};

// Glorot-style uniform init, biases zero. Weight fill order matches the
// canonical flattening so runs are reproducible from the seed alone.
inline Mlp init_weights(Rng& rng,
                        const std::vector<int>& dims = Mlp::signal_dims()) {
  Mlp m(dims);
  for (std::size_t l = 0; l < m.w.size(); ++l) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(m.w[l].rows() + m.w[l].cols()));
    for (Eigen::Index r = 0; r < m.w[l].rows(); ++r)
      for (Eigen::Index c = 0; c < m.w[l].cols(); ++c)
        m.w[l](r, c) = rng.uniform(-limit, limit);
  }
  return m;
}

namespace detail {

inline void softmax_rows_inplace(Matrix& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - mx).exp();
    z.row(i) /= z.row(i).sum();
  }
}

// Inverted-dropout mask: entries are 0 with probability rate, else
// 1/(1-rate). Row-major fill order pins rng consumption.
inline Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate,
                           Rng& rng) {
  Matrix m(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = rng.uniform() < rate ? 0.0 : keep_scale;
  return m;
}

}  // namespace detail

// Row-wise class probabilities for a batch, evaluation mode (no dropout).
inline Matrix forward_batch(const Mlp& m, const Matrix& x) {
  if (x.cols() != m.input_dim())
    throw std::invalid_argument("forward: input width mismatch");
  Matrix a = x;
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    Matrix z = (a * m.w[l]).rowwise() + m.b[l].transpose();
    if (l + 1 < m.layer_count())
      a = z.cwiseMax(0.0);
    else
      a = std::move(z);
  }
  detail::softmax_rows_inplace(a);
  return a;
}

// Single-sample forward pass. In train mode a dropout mask is applied to each
// hidden activation (inverted scaling), drawn from `rng`.
inline Vector forward(const Mlp& m, const Vector& x, bool train_mode = false,
                      Rng* rng = nullptr, double dropout_rate = 0.0) {
  if (x.size() != m.input_dim())
    throw std::invalid_argument("forward: input width mismatch");
  if (!x.allFinite())
    throw std::invalid_argument("forward: non-finite input");
  if (train_mode && dropout_rate > 0 && rng == nullptr)
    throw std::invalid_argument("forward: train mode with dropout needs rng");
  Matrix a = x.transpose();
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    Matrix z = (a * m.w[l]).rowwise() + m.b[l].transpose();
    if (l + 1 < m.layer_count()) {
      a = z.cwiseMax(0.0);
      if (train_mode && dropout_rate > 0)
        a = a.cwiseProduct(
            detail::dropout_mask(a.rows(), a.cols(), dropout_rate, *rng));
    } else {
      a = std::move(z);
    }
  }
  detail::softmax_rows_inplace(a);
  return a.row(0).transpose();
}

struct LossAndGrads {
  double loss = 0.0;
  Mlp grads;  // same shapes as the model; holds d(loss)/d(param)
};

// Mean crossentropy and analytic gradients over a batch, dropout off.
// Used by training (which adds dropout masks) and by the finite-difference
// gradient checks.
inline LossAndGrads loss_and_gradients(const Mlp& m, const Matrix& x,
                                       const std::vector<int>& y) {
  if (x.rows() == 0) throw std::invalid_argument("loss: empty batch");
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw std::invalid_argument("loss: label count mismatch");
  const Eigen::Index batch = x.rows();
  const std::size_t layers = m.layer_count();

  std::vector<Matrix> zs(layers);
  std::vector<Matrix> as(layers + 1);
  as[0] = x;
  for (std::size_t l = 0; l < layers; ++l) {
    zs[l] = (as[l] * m.w[l]).rowwise() + m.b[l].transpose();
    as[l + 1] = l + 1 < layers ? zs[l].cwiseMax(0.0) : zs[l];
  }

  // Stable mean crossentropy: logsumexp(z) - z_label.
  double loss = 0.0;
  const Matrix& logits = zs[layers - 1];
  for (Eigen::Index i = 0; i < batch; ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse =
        mx + std::log((logits.row(i).array() - mx).exp().sum());
    loss += lse - logits(i, y[static_cast<std::size_t>(i)]);
  }
  loss /= static_cast<double>(batch);

  Matrix probs = logits;
  detail::softmax_rows_inplace(probs);
  Matrix g = probs;
  for (Eigen::Index i = 0; i < batch; ++i)
    g(i, y[static_cast<std::size_t>(i)]) -= 1.0;
  g /= static_cast<double>(batch);

  LossAndGrads out;
  out.loss = loss;
  out.grads = Mlp(m.dims());
  for (std::size_t l = layers; l-- > 0;) {
    out.grads.w[l] = as[l].transpose() * g;
    out.grads.b[l] = g.colwise().sum().transpose();
    if (l > 0)
      g = (g * m.w[l].transpose())
              .cwiseProduct((zs[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return out;
}

// RMSprop accumulator, persisted per client across rounds.
struct OptState {
  std::vector<Matrix> vw;
  std::vector<Vector> vb;
  bool initialized = false;

  void ensure_shapes(const Mlp& m) {
    if (initialized) return;
    vw.clear();
    vb.clear();
    for (std::size_t l = 0; l < m.w.size(); ++l) {
      vw.emplace_back(Matrix::Zero(m.w[l].rows(), m.w[l].cols()));
      vb.emplace_back(Vector::Zero(m.b[l].size()));
    }
    initialized = true;
  }

  void reset() { initialized = false; }
};

// One RMSprop step on a flat parameter/gradient pair:
//   v <- rho*v + (1-rho)*g^2,  p <- p - lr * g / (sqrt(v) + eps)
inline void rmsprop_step(Eigen::Ref<Eigen::ArrayXd> param,
                         const Eigen::Ref<const Eigen::ArrayXd>& grad,
                         Eigen::Ref<Eigen::ArrayXd> v, double lr, double rho,
                         double eps) {
  v = rho * v + (1.0 - rho) * grad.square();
  param -= lr * grad / (v.sqrt() + eps);
}

namespace detail {

inline void rmsprop_update(Mlp& m, const Mlp& grads, OptState& opt,
                           const TrainConfig& cfg) {
  opt.ensure_shapes(m);
  for (std::size_t l = 0; l < m.w.size(); ++l) {
    {
      Eigen::Map<Eigen::ArrayXd> p(m.w[l].data(), m.w[l].size());
      Eigen::Map<const Eigen::ArrayXd> g(grads.w[l].data(), grads.w[l].size());
      Eigen::Map<Eigen::ArrayXd> v(opt.vw[l].data(), opt.vw[l].size());
      rmsprop_step(p, g, v, cfg.learning_rate, cfg.rms_decay, cfg.epsilon);
    }
    {
      Eigen::Map<Eigen::ArrayXd> p(m.b[l].data(), m.b[l].size());
      Eigen::Map<const Eigen::ArrayXd> g(grads.b[l].data(), grads.b[l].size());
      Eigen::Map<Eigen::ArrayXd> v(opt.vb[l].data(), opt.vb[l].size());
      rmsprop_step(p, g, v, cfg.learning_rate, cfg.rms_decay, cfg.epsilon);
    }
  }
}

// Forward/backward over one mini-batch with dropout masks on the hidden
// activations, followed by an RMSprop update.
inline void train_batch(Mlp& m, const Matrix& xb, const std::vector<int>& yb,
                        const TrainConfig& cfg, OptState& opt, Rng& rng) {
  const Eigen::Index batch = xb.rows();
  const std::size_t layers = m.layer_count();
  std::vector<Matrix> zs(layers);
  std::vector<Matrix> as(layers + 1);
  std::vector<Matrix> masks(layers);  // hidden layers only
  as[0] = xb;
  for (std::size_t l = 0; l < layers; ++l) {
    zs[l] = (as[l] * m.w[l]).rowwise() + m.b[l].transpose();
    if (l + 1 < layers) {
      as[l + 1] = zs[l].cwiseMax(0.0);
      if (cfg.dropout_rate > 0) {
        masks[l] = dropout_mask(batch, zs[l].cols(), cfg.dropout_rate, rng);
        as[l + 1] = as[l + 1].cwiseProduct(masks[l]);
      }
    } else {
      as[l + 1] = zs[l];
    }
  }

  Matrix g = as[layers];
  softmax_rows_inplace(g);
  for (Eigen::Index i = 0; i < batch; ++i)
    g(i, yb[static_cast<std::size_t>(i)]) -= 1.0;
  g /= static_cast<double>(batch);

  Mlp grads(m.dims());
  for (std::size_t l = layers; l-- > 0;) {
    grads.w[l] = as[l].transpose() * g;
    grads.b[l] = g.colwise().sum().transpose();
    if (l > 0) {
      g = (g * m.w[l].transpose())
              .cwiseProduct((zs[l - 1].array() > 0.0).cast<double>().matrix());
      if (cfg.dropout_rate > 0) g = g.cwiseProduct(masks[l - 1]);
    }
  }
  rmsprop_update(m, grads, opt, cfg);
}

}  // namespace detail

// Local training: epochs_per_round shuffled passes of mini-batch crossentropy
// backprop with RMSprop updates. Mutates the model and optimizer state.
inline void train_round(Mlp& m, const Matrix& x, const std::vector<int>& y,
                        const TrainConfig& cfg, OptState& opt, Rng& rng) {
  cfg.validate();
  if (x.rows() == 0) throw std::invalid_argument("train_round: empty dataset");
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw std::invalid_argument("train_round: label count mismatch");
  const Eigen::Index n = x.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs_per_round; ++epoch) {
    rng.shuffle(order);
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index bsz = std::min<Eigen::Index>(cfg.batch_size, n - start);
      Matrix xb(bsz, x.cols());
      std::vector<int> yb(static_cast<std::size_t>(bsz));
      for (Eigen::Index i = 0; i < bsz; ++i) {
        xb.row(i) = x.row(order[static_cast<std::size_t>(start + i)]);
        yb[static_cast<std::size_t>(i)] =
            y[static_cast<std::size_t>(order[static_cast<std::size_t>(start + i)])];
      }
      detail::train_batch(m, xb, yb, cfg, opt, rng);
    }
  }
}

// Fraction of samples classified correctly; argmax ties resolve to the lower
// class index. Dropout is never applied here.
inline double evaluate_accuracy(const Mlp& m, const Matrix& x,
                                const std::vector<int>& y) {
  if (x.rows() == 0) throw std::invalid_argument("evaluate: empty dataset");
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw std::invalid_argument("evaluate: label count mismatch");
  Matrix a = x;
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    Matrix z = (a * m.w[l]).rowwise() + m.b[l].transpose();
    a = l + 1 < m.layer_count() ? z.cwiseMax(0.0).eval() : std::move(z);
  }
  int correct = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    int pred = 0;
    for (Eigen::Index c = 1; c < a.cols(); ++c)
      if (a(i, c) > a(i, pred)) pred = static_cast<int>(c);
    if (pred == y[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(a.rows());
}

// Euclidean distance between two parameter sets in canonical flattening.
inline double weight_distance(const Mlp& a, const Mlp& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("weight_distance: architecture mismatch");
  double sq = 0.0;
  for (std::size_t l = 0; l < a.w.size(); ++l) {
    sq += (a.w[l] - b.w[l]).squaredNorm();
    sq += (a.b[l] - b.b[l]).squaredNorm();
  }
  return std::sqrt(sq);
}

// Elementwise arithmetic mean of the given models.
inline Mlp fedavg(std::span<const Mlp> models) {
  if (models.empty())
    throw std::invalid_argument("fedavg: empty model collection");
  Mlp out(models[0].dims());
  for (const auto& m : models) {
    if (!m.same_shape(out))
      throw std::invalid_argument("fedavg: architecture mismatch");
    for (std::size_t l = 0; l < out.w.size(); ++l) {
      out.w[l] += m.w[l];
      out.b[l] += m.b[l];
    }
  }
  const double inv = 1.0 / static_cast<double>(models.size());
  for (std::size_t l = 0; l < out.w.size(); ++l) {
    out.w[l] *= inv;
    out.b[l] *= inv;
  }
  return out;
}

inline Mlp fedavg(const std::vector<Mlp>& models) {
  return fedavg(std::span<const Mlp>(models.data(), models.size()));
}

// ---- dataset adapters -----------------------------------------------------

struct DataMatrix {
  Matrix x;
  std::vector<int> y;
};

inline DataMatrix to_matrix(const ClientDataset& ds) {
  DataMatrix out;
  out.x.resize(static_cast<Eigen::Index>(ds.samples.size()),
               FeatureSample::kFeatures);
  out.y.resize(ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    for (int k = 0; k < FeatureSample::kFeatures; ++k)
      out.x(static_cast<Eigen::Index>(i), k) = ds.samples[i].features[static_cast<std::size_t>(k)];
    out.y[i] = static_cast<int>(ds.samples[i].label);
  }
  return out;
}

inline double evaluate(const Mlp& m, const ClientDataset& ds) {
  if (ds.samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const auto dm = to_matrix(ds);
  return evaluate_accuracy(m, dm.x, dm.y);
}

inline void train_round(Mlp& m, const ClientDataset& ds, const TrainConfig& cfg,
                        OptState& opt, Rng& rng) {
  if (ds.samples.empty())
    throw std::invalid_argument("train_round: empty dataset");
  const auto dm = to_matrix(ds);
  train_round(m, dm.x, dm.y, cfg, opt, rng);
}

// ---- weight snapshot file ---------------------------------------------------
// One architecture header line, then every parameter in canonical order.

inline void save_weights(const Mlp& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write weights file: " + path);
  out << "fljam-mlp";
  for (int d : m.dims()) out << ' ' << d;
  out << '\n';
  const Vector flat = m.flatten();
  char buf[40];
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g\n", flat[i]);
    out << buf;
  }
}

inline Mlp load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open weights file: " + path);
  std::string tag;
  in >> tag;
  if (tag != "fljam-mlp")
    throw std::runtime_error("weights file " + path + ": bad header");
  std::string rest;
  std::getline(in, rest);
  std::vector<int> dims;
  {
    std::istringstream hs(rest);
    int d;
    while (hs >> d) dims.push_back(d);
  }
  if (dims.size() < 2)
    throw std::runtime_error("weights file " + path + ": bad architecture");
  Mlp m(dims);
  Vector flat(m.param_count());
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    if (!(in >> flat[i]))
      throw std::runtime_error("weights file " + path + ": truncated");
  }
  m.set_from_flat(flat);
  return m;
}

}  // namespace fljam
