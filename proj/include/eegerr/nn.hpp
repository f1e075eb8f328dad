#pragma once

// Recurrent sequence classifiers over the channel axis: (bi)LSTM or GRU, a
// dense layer to two logits, softmax and cross-entropy. Gradients come from
// hand-written backpropagation through time; Adam drives training.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "eegerr/common.hpp"
#include "eegerr/random.hpp"

namespace eegerr::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class CellKind { lstm, gru };
enum class Architecture { bilstm, lstm, gru };

inline std::string_view to_string(CellKind k) { return k == CellKind::lstm ? "lstm" : "gru"; }

inline std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::bilstm: return "bilstm";
    case Architecture::lstm: return "lstm";
    case Architecture::gru: return "gru";
  }
  return "?";
}

inline Architecture parse_architecture(std::string_view s) {
  if (s == "bilstm") return Architecture::bilstm;
  if (s == "lstm") return Architecture::lstm;
  if (s == "gru") return Architecture::gru;
  throw ConfigError("unknown architecture: " + std::string(s));
}

inline CellKind cell_kind(Architecture a) { return a == Architecture::gru ? CellKind::gru : CellKind::lstm; }
inline bool is_bidirectional(Architecture a) { return a == Architecture::bilstm; }

inline constexpr int kNumClasses = 2;

struct SeqSample {
  MatrixXd sequence;  // steps x input_dim
  int label = 0;      // 0 = OK, 1 = ERR
};

struct RecurrentParams {
  CellKind kind = CellKind::lstm;
  int input_dim = 13;
  int hidden_dim = 20;
  MatrixXd w_input;      // gates*H x D; LSTM gate order i,f,g,o; GRU r,z,n
  MatrixXd w_recurrent;  // gates*H x H
  VectorXd bias;         // gates*H

  int gates() const { return kind == CellKind::lstm ? 4 : 3; }
};

struct Model {
  RecurrentParams forward_cell;
  std::optional<RecurrentParams> backward_cell;
  MatrixXd dense_w;  // 2 x feature_dim
  VectorXd dense_b;  // 2

  bool bidirectional() const { return backward_cell.has_value(); }
  int hidden_dim() const { return forward_cell.hidden_dim; }
  int input_dim() const { return forward_cell.input_dim; }
  int feature_dim() const { return bidirectional() ? 2 * hidden_dim() : hidden_dim(); }
};

// Visits every parameter tensor in a fixed order as a flat span.
template <typename ModelT, typename Fn>
  requires std::is_same_v<std::remove_const_t<ModelT>, Model>
void for_each_tensor(ModelT& m, Fn&& fn) {
  auto visit_cell = [&](auto& cell, std::string_view prefix) {
    fn(std::string(prefix) + ".w_input", cell.w_input);
    fn(std::string(prefix) + ".w_recurrent", cell.w_recurrent);
    fn(std::string(prefix) + ".bias", cell.bias);
  };
  visit_cell(m.forward_cell, "forward");
  if (m.backward_cell) visit_cell(*m.backward_cell, "backward");
  fn(std::string("dense.w"), m.dense_w);
  fn(std::string("dense.b"), m.dense_b);
}

template <typename Derived>
std::span<double> flat(Eigen::PlainObjectBase<Derived>& t) {
  return {t.data(), static_cast<std::size_t>(t.size())};
}

template <typename Derived>
std::span<const double> flat(const Eigen::PlainObjectBase<Derived>& t) {
  return {t.data(), static_cast<std::size_t>(t.size())};
}

inline Model zeros_like(const Model& m) {
  Model z = m;
  for_each_tensor(z, [](const std::string&, auto& t) { t.setZero(); });
  return z;
}

inline std::size_t parameter_count(const Model& m) {
  std::size_t n = 0;
  for_each_tensor(m, [&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

inline bool all_finite(const Model& m) {
  bool ok = true;
  for_each_tensor(m, [&](const std::string&, const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

// FNV-1a over parameter bytes; ties a forward cache to the model that made it.
inline std::uint64_t fingerprint(const Model& m) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::span<const double> values) {
    for (double v : values) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, &v, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xff;
        h *= 1099511628211ULL;
      }
    }
  };
  for_each_tensor(m, [&](const std::string&, const auto& t) { mix(flat(t)); });
  return h;
}

// ---------------------------------------------------------------------------

inline RecurrentParams init_cell(CellKind kind, int input_dim, int hidden_dim, Rng& rng) {
  RecurrentParams p;
  p.kind = kind;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const int rows = p.gates() * hidden_dim;
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  p.w_input.resize(rows, input_dim);
  p.w_recurrent.resize(rows, hidden_dim);
  for (auto& v : flat(p.w_input)) v = rng.uniform(-k, k);
  for (auto& v : flat(p.w_recurrent)) v = rng.uniform(-k, k);
  p.bias = VectorXd::Zero(rows);
  if (kind == CellKind::lstm) p.bias.segment(hidden_dim, hidden_dim).setConstant(1.0);
  return p;
}

inline Model init_model(CellKind kind, bool bidirectional, int hidden_dim, std::uint64_t seed, int input_dim = 13) {
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  Rng rng(derive_seed(seed, 0x1417));
  Model m;
  m.forward_cell = init_cell(kind, input_dim, hidden_dim, rng);
  if (bidirectional) m.backward_cell = init_cell(kind, input_dim, hidden_dim, rng);
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  m.dense_w.resize(kNumClasses, m.feature_dim());
  for (auto& v : flat(m.dense_w)) v = rng.uniform(-k, k);
  m.dense_b = VectorXd::Zero(kNumClasses);
  return m;
}

inline Model init_model(Architecture arch, int hidden_dim, std::uint64_t seed, int input_dim = 13) {
  return init_model(cell_kind(arch), is_bidirectional(arch), hidden_dim, seed, input_dim);
}

// ---------------------------------------------------------------------------
// Forward pass

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct StepCache {
  VectorXd x;
  VectorXd h_prev;
  VectorXd c_prev;  // LSTM only
  VectorXd gates;   // activated gate values
  VectorXd c;       // LSTM only
  VectorXd u_n;     // GRU only: W_rn * h_prev
  VectorXd h;
};

struct ForwardCache {
  std::vector<StepCache> forward_steps;
  std::vector<StepCache> backward_steps;  // processed in reversed sequence order
  VectorXd features;
  VectorXd logits;
  VectorXd probs;
  std::uint64_t model_fingerprint = 0;
  long steps = 0;
  bool valid = false;
};

inline StepCache cell_step(const RecurrentParams& p, const VectorXd& x, const VectorXd& h_prev,
                           const VectorXd& c_prev) {
  const int H = p.hidden_dim;
  StepCache s;
  s.x = x;
  s.h_prev = h_prev;
  if (p.kind == CellKind::lstm) {
    VectorXd z = p.w_input * x + p.w_recurrent * h_prev + p.bias;
    s.gates.resize(4 * H);
    for (int j = 0; j < H; ++j) {
      s.gates[j] = sigmoid(z[j]);
      s.gates[H + j] = sigmoid(z[H + j]);
      s.gates[2 * H + j] = std::tanh(z[2 * H + j]);
      s.gates[3 * H + j] = sigmoid(z[3 * H + j]);
    }
    s.c_prev = c_prev;
    s.c = s.gates.segment(H, H).cwiseProduct(c_prev) + s.gates.head(H).cwiseProduct(s.gates.segment(2 * H, H));
    s.h = s.gates.segment(3 * H, H).cwiseProduct(s.c.array().tanh().matrix());
  } else {
    const VectorXd a = p.w_input * x + p.bias;
    const VectorXd u = p.w_recurrent * h_prev;
    s.gates.resize(3 * H);
    s.u_n = u.segment(2 * H, H);
    for (int j = 0; j < H; ++j) {
      s.gates[j] = sigmoid(a[j] + u[j]);
      s.gates[H + j] = sigmoid(a[H + j] + u[H + j]);
    }
    for (int j = 0; j < H; ++j) s.gates[2 * H + j] = std::tanh(a[2 * H + j] + s.gates[j] * s.u_n[j]);
    const auto zg = s.gates.segment(H, H).array();
    s.h = ((1.0 - zg) * s.gates.segment(2 * H, H).array() + zg * h_prev.array()).matrix();
  }
  return s;
}

inline std::vector<StepCache> run_direction(const RecurrentParams& p, const MatrixXd& seq, bool reversed) {
  const long n = seq.rows();
  std::vector<StepCache> steps;
  steps.reserve(static_cast<std::size_t>(n));
  VectorXd h = VectorXd::Zero(p.hidden_dim);
  VectorXd c = VectorXd::Zero(p.hidden_dim);
  for (long s = 0; s < n; ++s) {
    const long t = reversed ? n - 1 - s : s;
    steps.push_back(cell_step(p, seq.row(t).transpose(), h, c));
    h = steps.back().h;
    if (p.kind == CellKind::lstm) c = steps.back().c;
  }
  return steps;
}

inline VectorXd softmax(const VectorXd& logits) {
  const double mx = logits.maxCoeff();
  VectorXd e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

inline void check_dims(const Model& m, const SeqSample& s) {
  if (s.sequence.rows() < 1) throw DataError("sequence must have at least one element");
  if (s.sequence.cols() != m.input_dim())
    throw DataError("dimension mismatch: model expects " + std::to_string(m.input_dim()) +
                    "-vectors, sample has " + std::to_string(s.sequence.cols()));
  if (s.label < 0 || s.label >= kNumClasses) throw DataError("label out of range");
}

// Readout is [h_fwd(last step); h_bwd(first element)] for bidirectional models.
inline std::pair<VectorXd, ForwardCache> forward(const Model& m, const SeqSample& sample) {
  check_dims(m, sample);
  ForwardCache cache;
  cache.forward_steps = run_direction(m.forward_cell, sample.sequence, false);
  cache.features.resize(m.feature_dim());
  cache.features.head(m.hidden_dim()) = cache.forward_steps.back().h;
  if (m.backward_cell) {
    cache.backward_steps = run_direction(*m.backward_cell, sample.sequence, true);
    cache.features.tail(m.hidden_dim()) = cache.backward_steps.back().h;
  }
  cache.logits = m.dense_w * cache.features + m.dense_b;
  if (!cache.logits.allFinite()) throw DivergenceError("non-finite activation in forward pass");
  cache.probs = softmax(cache.logits);
  cache.model_fingerprint = fingerprint(m);
  cache.steps = sample.sequence.rows();
  cache.valid = true;
  return {cache.probs, std::move(cache)};
}

inline constexpr double kProbFloor = 1e-15;

inline double cross_entropy(const VectorXd& probs, int label) {
  return -std::log(std::max(probs[label], kProbFloor));
}

// ---------------------------------------------------------------------------
// Backpropagation through time

inline void backprop_direction(const RecurrentParams& p, const std::vector<StepCache>& steps, VectorXd dh,
                               RecurrentParams& g) {
  const int H = p.hidden_dim;
  VectorXd dc = VectorXd::Zero(H);
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    const StepCache& s = *it;
    if (p.kind == CellKind::lstm) {
      const auto i = s.gates.head(H).array();
      const auto f = s.gates.segment(H, H).array();
      const auto gg = s.gates.segment(2 * H, H).array();
      const auto o = s.gates.segment(3 * H, H).array();
      const Eigen::ArrayXd tc = s.c.array().tanh();
      const Eigen::ArrayXd dcell = dc.array() + dh.array() * o * (1.0 - tc * tc);
      VectorXd dz(4 * H);
      dz.head(H) = (dcell * gg * i * (1.0 - i)).matrix();
      dz.segment(H, H) = (dcell * s.c_prev.array() * f * (1.0 - f)).matrix();
      dz.segment(2 * H, H) = (dcell * i * (1.0 - gg * gg)).matrix();
      dz.segment(3 * H, H) = (dh.array() * tc * o * (1.0 - o)).matrix();
      g.w_input.noalias() += dz * s.x.transpose();
      g.w_recurrent.noalias() += dz * s.h_prev.transpose();
      g.bias += dz;
      dh = p.w_recurrent.transpose() * dz;
      dc = (dcell * f).matrix();
    } else {
      const auto r = s.gates.head(H).array();
      const auto z = s.gates.segment(H, H).array();
      const auto n = s.gates.segment(2 * H, H).array();
      const Eigen::ArrayXd dan = dh.array() * (1.0 - z) * (1.0 - n * n);
      const Eigen::ArrayXd dar = dan * s.u_n.array() * r * (1.0 - r);
      const Eigen::ArrayXd daz = dh.array() * (s.h_prev.array() - n) * z * (1.0 - z);
      VectorXd da(3 * H);
      da << dar.matrix(), daz.matrix(), dan.matrix();
      VectorXd du(3 * H);
      du << dar.matrix(), daz.matrix(), (dan * r).matrix();
      g.w_input.noalias() += da * s.x.transpose();
      g.bias += da;
      g.w_recurrent.noalias() += du * s.h_prev.transpose();
      dh = (dh.array() * z).matrix() + p.w_recurrent.transpose() * du;
    }
  }
}

// Gradients of cross_entropy(forward(m, sample), label), shaped like the model.
inline Model backward(const Model& m, const SeqSample& sample, const ForwardCache& cache) {
  if (!cache.valid) throw DataError("missing forward cache");
  if (cache.steps != sample.sequence.rows() || cache.model_fingerprint != fingerprint(m))
    throw DataError("stale forward cache: model or sample changed since forward()");
  Model g = zeros_like(m);
  VectorXd dlogits = cache.probs;
  dlogits[sample.label] -= 1.0;
  g.dense_w = dlogits * cache.features.transpose();
  g.dense_b = dlogits;
  const VectorXd dfeat = m.dense_w.transpose() * dlogits;
  const int H = m.hidden_dim();
  backprop_direction(m.forward_cell, cache.forward_steps, dfeat.head(H), g.forward_cell);
  if (m.backward_cell) backprop_direction(*m.backward_cell, cache.backward_steps, dfeat.tail(H), *g.backward_cell);
  return g;
}

inline double loss(const Model& m, const SeqSample& sample) {
  return cross_entropy(forward(m, sample).first, sample.label);
}

// ---------------------------------------------------------------------------

struct Prediction {
  int label = 0;
  VectorXd probs;
};

// Ties go to class 0 (OK).
inline Prediction predict(const Model& m, const SeqSample& sample) {
  auto probs = forward(m, sample).first;
  return {probs[1] > probs[0] ? 1 : 0, std::move(probs)};
}

// ---------------------------------------------------------------------------
// Optimization

struct TrainConfig {
  int epochs = 5;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  }
};

struct AdamState {
  Model first_moment;
  Model second_moment;
  long step = 0;

  explicit AdamState(const Model& m) : first_moment(zeros_like(m)), second_moment(zeros_like(m)) {}
};

inline std::vector<std::span<double>> tensors(Model& m) {
  std::vector<std::span<double>> out;
  for_each_tensor(m, [&](const std::string&, auto& t) { out.push_back(flat(t)); });
  return out;
}

inline std::vector<std::span<const double>> tensors(const Model& m) {
  std::vector<std::span<const double>> out;
  for_each_tensor(m, [&](const std::string&, const auto& t) { out.push_back(flat(t)); });
  return out;
}

inline void adam_step(Model& model, const Model& grads, AdamState& state, const TrainConfig& cfg) {
  auto params = tensors(model);
  const auto g = tensors(grads);
  auto m1 = tensors(state.first_moment);
  auto m2 = tensors(state.second_moment);
  if (params.size() != g.size() || params.size() != m1.size())
    throw DataError("Adam: gradient/state shapes do not match the model");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != g[t].size()) throw DataError("Adam: tensor shape mismatch");
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      m1[t][i] = cfg.beta1 * m1[t][i] + (1.0 - cfg.beta1) * g[t][i];
      m2[t][i] = cfg.beta2 * m2[t][i] + (1.0 - cfg.beta2) * g[t][i] * g[t][i];
      params[t][i] -= cfg.learning_rate * (m1[t][i] / c1) / (std::sqrt(m2[t][i] / c2) + cfg.adam_eps);
    }
  }
}

inline void accumulate(Model& into, const Model& g, double scale) {
  auto dst = tensors(into);
  const auto src = tensors(g);
  for (std::size_t t = 0; t < dst.size(); ++t)
    for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] += scale * src[t][i];
}

struct TrainResult {
  Model model;
  std::vector<double> history;  // mean training loss per epoch
};

// Seeded per-epoch shuffle, batch-averaged gradients, one Adam step per batch.
inline TrainResult train(Model model, std::span<const SeqSample> data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw DataError("training set is empty");
  AdamState state(model);
  std::vector<std::size_t> order(data.size());
  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(cfg.seed, 0x7A11, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Model grad = zeros_like(model);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const auto& sample = data[order[b]];
        auto [probs, cache] = forward(model, sample);
        const double l = cross_entropy(probs, sample.label);
        if (!std::isfinite(l)) throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch));
        epoch_loss += l;
        accumulate(grad, backward(model, sample, cache), scale);
      }
      adam_step(model, grad, state, cfg);
      if (!all_finite(model)) throw DivergenceError("non-finite parameters after Adam step");
    }
    result.history.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------

namespace detail {

using Real = long double;

// Loop-based forward pass in extended precision, written independently of the
// Eigen path above. Finite differences through it stay accurate for gradients
// many orders of magnitude below the loss.
class ExtendedLoss {
 public:
  explicit ExtendedLoss(const Model& m) {
    for_each_tensor(m, [&](const std::string&, const auto& t) {
      std::vector<Real> v(static_cast<std::size_t>(t.size()));
      // Eigen storage is column-major; keep (row, col) addressing below.
      for (Eigen::Index c = 0; c < t.cols(); ++c)
        for (Eigen::Index r = 0; r < t.rows(); ++r) v[static_cast<std::size_t>(r * t.cols() + c)] = t(r, c);
      tensors_.push_back(std::move(v));
      cols_.push_back(static_cast<std::size_t>(t.cols()));
    });
    kind_ = m.forward_cell.kind;
    hidden_ = static_cast<std::size_t>(m.hidden_dim());
    input_ = static_cast<std::size_t>(m.input_dim());
    bidirectional_ = m.bidirectional();
  }

  // Parameter (tensor t, flat index i in Eigen storage order) as an lvalue.
  Real& param(std::size_t t, std::size_t flat_index, std::size_t rows) {
    const std::size_t r = flat_index % rows;
    const std::size_t c = flat_index / rows;
    return tensors_[t][r * cols_[t] + c];
  }

  Real operator()(const SeqSample& s) const {
    std::vector<Real> feat = run(0, s, false);
    if (bidirectional_) {
      const auto back = run(3, s, true);
      feat.insert(feat.end(), back.begin(), back.end());
    }
    const std::size_t dense = bidirectional_ ? 6 : 3;
    Real logits[kNumClasses];
    for (int k = 0; k < kNumClasses; ++k) {
      Real acc = tensors_[dense + 1][static_cast<std::size_t>(k)];
      for (std::size_t j = 0; j < feat.size(); ++j) acc += at(dense, static_cast<std::size_t>(k), j) * feat[j];
      logits[k] = acc;
    }
    const Real mx = std::max(logits[0], logits[1]);
    const Real lse = mx + std::log(std::exp(logits[0] - mx) + std::exp(logits[1] - mx));
    return lse - logits[s.label];
  }

 private:
  Real at(std::size_t t, std::size_t r, std::size_t c) const { return tensors_[t][r * cols_[t] + c]; }

  static Real sig(Real x) { return 1.0L / (1.0L + std::exp(-x)); }

  std::vector<Real> run(std::size_t base, const SeqSample& s, bool reversed) const {
    const std::size_t H = hidden_;
    const std::size_t G = kind_ == CellKind::lstm ? 4 : 3;
    const auto n = static_cast<std::size_t>(s.sequence.rows());
    std::vector<Real> h(H, 0.0L), c(H, 0.0L), xin(G * H), rec(G * H);
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t t = reversed ? n - 1 - step : step;
      for (std::size_t r = 0; r < G * H; ++r) {
        Real a = at(base + 2, r, 0);
        for (std::size_t d = 0; d < input_; ++d)
          a += at(base, r, d) * static_cast<Real>(s.sequence(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)));
        Real u = 0.0L;
        for (std::size_t j = 0; j < H; ++j) u += at(base + 1, r, j) * h[j];
        xin[r] = a;
        rec[r] = u;
      }
      std::vector<Real> next(H);
      for (std::size_t j = 0; j < H; ++j) {
        if (kind_ == CellKind::lstm) {
          const Real i = sig(xin[j] + rec[j]);
          const Real f = sig(xin[H + j] + rec[H + j]);
          const Real g = std::tanh(xin[2 * H + j] + rec[2 * H + j]);
          const Real o = sig(xin[3 * H + j] + rec[3 * H + j]);
          c[j] = f * c[j] + i * g;
          next[j] = o * std::tanh(c[j]);
        } else {
          const Real r = sig(xin[j] + rec[j]);
          const Real z = sig(xin[H + j] + rec[H + j]);
          const Real nn = std::tanh(xin[2 * H + j] + r * rec[2 * H + j]);
          next[j] = (1.0L - z) * nn + z * h[j];
        }
      }
      h = std::move(next);
    }
    return h;
  }

  std::vector<std::vector<Real>> tensors_;
  std::vector<std::size_t> cols_;
  CellKind kind_ = CellKind::lstm;
  std::size_t hidden_ = 0;
  std::size_t input_ = 0;
  bool bidirectional_ = false;
};

}  // namespace detail

// Max over every parameter of |analytic - numeric| / max(|analytic|, |numeric|, 1e-12),
// numeric from central differences with step eps.
inline double grad_check(const Model& model, const SeqSample& sample, double eps) {
  if (!(eps > 0.0)) throw ConfigError("grad_check eps must be positive");
  auto [probs, cache] = forward(model, sample);
  const Model analytic = backward(model, sample, cache);
  const auto grads = tensors(analytic);
  std::vector<std::size_t> rows;
  for_each_tensor(model, [&](const std::string&, const auto& t) { rows.push_back(static_cast<std::size_t>(t.rows())); });
  detail::ExtendedLoss probe(model);
  const auto step = static_cast<detail::Real>(eps);
  double worst = 0.0;
  for (std::size_t t = 0; t < grads.size(); ++t) {
    for (std::size_t i = 0; i < grads[t].size(); ++i) {
      auto& p = probe.param(t, i, rows[t]);
      const detail::Real saved = p;
      p = saved + step;
      const detail::Real up = probe(sample);
      p = saved - step;
      const detail::Real down = probe(sample);
      p = saved;
      const auto numeric = static_cast<double>((up - down) / (2.0L * step));
      const double a = grads[t][i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-12});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace eegerr::nn
