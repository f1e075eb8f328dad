#include <gtest/gtest.h>

#include <cmath>

#include "eegerr/nn.hpp"

using namespace eegerr;
using namespace eegerr::nn;

namespace {

SeqSample random_sample(std::uint64_t seed, long steps, int dim, int label) {
  Rng rng(seed);
  SeqSample s;
  s.sequence.resize(steps, dim);
  for (auto& v : flat(s.sequence)) v = rng.normal();
  s.label = label;
  return s;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar-loop recurrences written straight from the cell equations.
std::vector<double> lstm_hidden(const RecurrentParams& p, const MatrixXd& seq) {
  const int H = p.hidden_dim;
  std::vector<double> h(H, 0.0), c(H, 0.0);
  for (long t = 0; t < seq.rows(); ++t) {
    std::vector<double> z(4 * H);
    for (int r = 0; r < 4 * H; ++r) {
      z[r] = p.bias[r];
      for (int d = 0; d < p.input_dim; ++d) z[r] += p.w_input(r, d) * seq(t, d);
      for (int k = 0; k < H; ++k) z[r] += p.w_recurrent(r, k) * h[k];
    }
    for (int j = 0; j < H; ++j) {
      const double i = sig(z[j]), f = sig(z[H + j]), g = std::tanh(z[2 * H + j]), o = sig(z[3 * H + j]);
      c[j] = f * c[j] + i * g;
      h[j] = o * std::tanh(c[j]);
    }
  }
  return h;
}

std::vector<double> gru_hidden(const RecurrentParams& p, const MatrixXd& seq) {
  const int H = p.hidden_dim;
  std::vector<double> h(H, 0.0);
  for (long t = 0; t < seq.rows(); ++t) {
    std::vector<double> a(3 * H), u(3 * H, 0.0);
    for (int r = 0; r < 3 * H; ++r) {
      a[r] = p.bias[r];
      for (int d = 0; d < p.input_dim; ++d) a[r] += p.w_input(r, d) * seq(t, d);
      for (int k = 0; k < H; ++k) u[r] += p.w_recurrent(r, k) * h[k];
    }
    std::vector<double> next(H);
    for (int j = 0; j < H; ++j) {
      const double r = sig(a[j] + u[j]), z = sig(a[H + j] + u[H + j]);
      const double n = std::tanh(a[2 * H + j] + r * u[2 * H + j]);
      next[j] = (1.0 - z) * n + z * h[j];
    }
    h = next;
  }
  return h;
}

}  // namespace

TEST(Softmax, KnownValueAndShiftInvariance) {
  VectorXd l(2);
  l << std::log(3.0), 0.0;
  const auto p = softmax(l);
  EXPECT_NEAR(p[0], 0.75, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
  VectorXd shifted = l.array() + 123.0;
  const auto q = softmax(shifted);
  EXPECT_NEAR(q[0], p[0], 1e-12);
  EXPECT_NEAR(q.sum(), 1.0, 1e-12);
  VectorXd big(2);
  big << 1000.0, -1000.0;
  EXPECT_TRUE(softmax(big).allFinite());
}

TEST(CrossEntropy, FloorKeepsLossFinite) {
  VectorXd p(2);
  p << 1.0, 0.0;
  EXPECT_NEAR(cross_entropy(p, 1), -std::log(kProbFloor), 1e-9);
  EXPECT_EQ(cross_entropy(p, 0), 0.0);
}

TEST(Model, ShapesFollowArchitecture) {
  const auto bi = init_model(Architecture::bilstm, 20, 1);
  EXPECT_TRUE(bi.bidirectional());
  EXPECT_EQ(bi.dense_w.rows(), 2);
  EXPECT_EQ(bi.dense_w.cols(), 40);
  EXPECT_EQ(bi.forward_cell.w_input.rows(), 80);
  EXPECT_EQ(bi.forward_cell.w_input.cols(), 13);
  EXPECT_EQ(bi.backward_cell->w_recurrent.cols(), 20);
  const auto uni = init_model(Architecture::lstm, 20, 1);
  EXPECT_EQ(uni.dense_w.cols(), 20);
  const auto gru = init_model(Architecture::gru, 20, 1);
  EXPECT_EQ(gru.forward_cell.w_input.rows(), 60);
  EXPECT_EQ(parameter_count(uni), 80u * 13 + 80 * 20 + 80 + 2 * 20 + 2);
}

TEST(Model, InitIsSeededAndBounded) {
  const auto a = init_model(Architecture::bilstm, 7, 42);
  const auto b = init_model(Architecture::bilstm, 7, 42);
  const auto c = init_model(Architecture::bilstm, 7, 43);
  EXPECT_EQ(fingerprint(a), fingerprint(b));
  EXPECT_NE(fingerprint(a), fingerprint(c));
  const double k = 1.0 / std::sqrt(7.0);
  EXPECT_LE(a.forward_cell.w_input.cwiseAbs().maxCoeff(), k);
  EXPECT_LE(a.dense_w.cwiseAbs().maxCoeff(), k);
  EXPECT_TRUE((a.forward_cell.bias.segment(7, 7).array() == 1.0).all());
  EXPECT_EQ(a.forward_cell.bias.head(7).squaredNorm(), 0.0);
  EXPECT_THROW(init_model(Architecture::gru, 0, 1), ConfigError);
}

TEST(Forward, LstmMatchesScalarRecurrence) {
  const auto m = init_model(Architecture::lstm, 3, 5, 4);
  const auto s = random_sample(6, 7, 4, 0);
  const auto cache = forward(m, s).second;
  const auto ref = lstm_hidden(m.forward_cell, s.sequence);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(cache.features[j], ref[j], 1e-14);
}

TEST(Forward, GruMatchesScalarRecurrence) {
  const auto m = init_model(Architecture::gru, 3, 5, 4);
  const auto s = random_sample(7, 7, 4, 1);
  const auto cache = forward(m, s).second;
  const auto ref = gru_hidden(m.forward_cell, s.sequence);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(cache.features[j], ref[j], 1e-14);
}

TEST(Forward, BackwardCellReadsSequenceInReverse) {
  const auto m = init_model(Architecture::bilstm, 3, 8, 4);
  const auto s = random_sample(9, 6, 4, 0);
  const auto cache = forward(m, s).second;
  const auto ref = lstm_hidden(*m.backward_cell, s.sequence.colwise().reverse());
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(cache.features[3 + j], ref[j], 1e-14);
}

TEST(Forward, ProbabilitiesFormASimplex) {
  for (auto arch : {Architecture::bilstm, Architecture::lstm, Architecture::gru}) {
    const auto m = init_model(arch, 6, 11);
    const auto p = forward(m, random_sample(12, 9, 13, 0)).first;
    EXPECT_GT(p.minCoeff(), 0.0);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  }
}

// Swapping the two cells and the dense halves, then reversing the input,
// leaves the output unchanged.
TEST(Forward, ReversalSymmetry) {
  auto m = init_model(Architecture::bilstm, 5, 21, 13);
  const auto s = random_sample(22, 10, 13, 1);
  Model swapped = m;
  std::swap(swapped.forward_cell, *swapped.backward_cell);
  swapped.dense_w.leftCols(5) = m.dense_w.rightCols(5);
  swapped.dense_w.rightCols(5) = m.dense_w.leftCols(5);
  SeqSample reversed = s;
  reversed.sequence = s.sequence.colwise().reverse();
  const auto p = forward(m, s).first;
  const auto q = forward(swapped, reversed).first;
  // Only the dense-layer summation order differs.
  EXPECT_NEAR(p[0], q[0], 1e-14);
  EXPECT_NEAR(p[1], q[1], 1e-14);
}

TEST(Forward, PalindromeWithTiedCellsGivesEqualHalves) {
  auto m = init_model(Architecture::bilstm, 4, 31, 13);
  *m.backward_cell = m.forward_cell;
  auto s = random_sample(32, 9, 13, 0);
  for (long t = 0; t < 4; ++t) s.sequence.row(8 - t) = s.sequence.row(t);
  const auto cache = forward(m, s).second;
  EXPECT_EQ(cache.features.head(4), cache.features.tail(4));
}

TEST(Forward, RejectsBadInput) {
  const auto m = init_model(Architecture::gru, 4, 1);
  EXPECT_THROW(forward(m, random_sample(1, 5, 12, 0)), DataError);
  EXPECT_THROW(forward(m, random_sample(1, 0, 13, 0)), DataError);
  EXPECT_THROW(forward(m, random_sample(1, 5, 13, 2)), DataError);
  auto bad = random_sample(1, 5, 13, 0);
  bad.sequence(2, 3) = std::nan("");
  EXPECT_THROW(forward(m, bad), DivergenceError);
}

TEST(Backward, DenseBiasGradientAtZeroWeights) {
  auto m = init_model(Architecture::bilstm, 4, 3);
  m.dense_w.setZero();
  m.dense_b.setZero();
  for (int label : {0, 1}) {
    const auto s = random_sample(4, 6, 13, label);
    const auto [p, cache] = forward(m, s);
    EXPECT_EQ(p[0], 0.5);
    const auto g = backward(m, s, cache);
    EXPECT_EQ(g.dense_b[label], -0.5);
    EXPECT_EQ(g.dense_b[1 - label], 0.5);
    // No gradient reaches the recurrent cells through a zero dense layer.
    EXPECT_EQ(g.forward_cell.w_input.squaredNorm(), 0.0);
    EXPECT_EQ(g.forward_cell.w_recurrent.squaredNorm(), 0.0);
    EXPECT_EQ(g.backward_cell->bias.squaredNorm(), 0.0);
    EXPECT_EQ(predict(m, s).label, 0);
  }
}

TEST(Backward, BlockedBackwardHalfGetsNoGradient) {
  auto m = init_model(Architecture::bilstm, 4, 5);
  m.dense_w.rightCols(4).setZero();
  const auto s = random_sample(6, 6, 13, 1);
  const auto [p, cache] = forward(m, s);
  const auto g = backward(m, s, cache);
  EXPECT_EQ(g.backward_cell->w_input.squaredNorm(), 0.0);
  EXPECT_GT(g.forward_cell.w_input.squaredNorm(), 0.0);
}

TEST(Backward, StaleOrMissingCacheIsRejected) {
  auto m = init_model(Architecture::lstm, 4, 5);
  const auto s = random_sample(6, 6, 13, 1);
  auto cache = forward(m, s).second;
  EXPECT_THROW(backward(m, s, ForwardCache{}), DataError);
  auto shorter = random_sample(6, 5, 13, 1);
  EXPECT_THROW(backward(m, shorter, cache), DataError);
  m.dense_b[0] += 1.0;
  EXPECT_THROW(backward(m, s, cache), DataError);
}

TEST(GradCheck, AllArchitecturesBelowTolerance) {
  for (auto arch : {Architecture::bilstm, Architecture::lstm, Architecture::gru}) {
    for (std::uint64_t i = 0; i < 5; ++i) {
      const auto m = init_model(arch, 4, 100 + i);
      const auto s = random_sample(200 + i, 6, 13, static_cast<int>(i % 2));
      EXPECT_LT(grad_check(m, s, 1e-5), 1e-4) << to_string(arch) << " instance " << i;
    }
  }
}

TEST(GradCheck, CoarseStepIsWorse) {
  const auto m = init_model(Architecture::bilstm, 4, 7);
  const auto s = random_sample(8, 6, 13, 1);
  EXPECT_GT(grad_check(m, s, 1e-2), grad_check(m, s, 1e-5));
  EXPECT_THROW(grad_check(m, s, 0.0), ConfigError);
}

// ---------------------------------------------------------------------------

TEST(Adam, FirstStepMovesEachParameterByLearningRate) {
  auto m = init_model(Architecture::lstm, 2, 1, 3);
  const auto before = m;
  Model g = zeros_like(m);
  g.dense_b << 0.3, -2.0;
  g.forward_cell.w_input(0, 0) = 5e-3;
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  AdamState st(m);
  adam_step(m, g, st, cfg);
  // m_hat = g and v_hat = g^2 after one step, so the update is lr * g / (|g| + eps).
  EXPECT_NEAR(m.dense_b[0], before.dense_b[0] - 0.01 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(m.dense_b[1], before.dense_b[1] + 0.01 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_NEAR(m.forward_cell.w_input(0, 0), before.forward_cell.w_input(0, 0) - 0.01 * 5e-3 / (5e-3 + 1e-8), 1e-15);
  EXPECT_EQ(m.forward_cell.w_input(1, 1), before.forward_cell.w_input(1, 1));
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, MatchesScalarRecursionOverSeveralSteps) {
  auto m = init_model(Architecture::gru, 2, 1, 2);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  AdamState st(m);
  double x = m.dense_b[0], m1 = 0.0, m2 = 0.0;
  const double grads[] = {0.4, -0.1, 0.25, 1.5, -0.7};
  for (int t = 1; t <= 5; ++t) {
    Model g = zeros_like(m);
    g.dense_b[0] = grads[t - 1];
    adam_step(m, g, st, cfg);
    m1 = 0.9 * m1 + 0.1 * grads[t - 1];
    m2 = 0.999 * m2 + 0.001 * grads[t - 1] * grads[t - 1];
    const double mh = m1 / (1.0 - std::pow(0.9, t));
    const double vh = m2 / (1.0 - std::pow(0.999, t));
    x -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(m.dense_b[0], x, 1e-14);
  }
}

TEST(Adam, ZeroLearningRateLeavesModelUnchanged) {
  auto m = init_model(Architecture::bilstm, 3, 1);
  const auto fp = fingerprint(m);
  std::vector<SeqSample> data;
  for (int i = 0; i < 10; ++i) data.push_back(random_sample(50 + i, 5, 13, i % 2));
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 2;
  const auto r = train(m, data, cfg);
  EXPECT_EQ(fingerprint(r.model), fp);
  EXPECT_EQ(r.history[0], r.history[1]);
}

TEST(Train, DeterministicForSeed) {
  std::vector<SeqSample> data;
  for (int i = 0; i < 40; ++i) data.push_back(random_sample(300 + i, 6, 13, i % 2));
  TrainConfig cfg;
  cfg.seed = 9;
  const auto a = train(init_model(Architecture::gru, 5, 3), data, cfg);
  const auto b = train(init_model(Architecture::gru, 5, 3), data, cfg);
  EXPECT_EQ(fingerprint(a.model), fingerprint(b.model));
  EXPECT_EQ(a.history, b.history);
  cfg.seed = 10;
  const auto c = train(init_model(Architecture::gru, 5, 3), data, cfg);
  EXPECT_NE(fingerprint(a.model), fingerprint(c.model));
}

TEST(Train, LearnsSeparableTask) {
  std::vector<SeqSample> data;
  for (int i = 0; i < 200; ++i) {
    auto s = random_sample(400 + i, 5, 13, i % 2);
    s.sequence.col(0).array() += s.label == 1 ? 2.0 : -2.0;
    data.push_back(std::move(s));
  }
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.epochs = 10;
  const auto r = train(init_model(Architecture::bilstm, 8, 1), data, cfg);
  EXPECT_LT(r.history.back(), 0.5 * r.history.front());
  int correct = 0;
  for (const auto& s : data) correct += predict(r.model, s).label == s.label;
  EXPECT_GT(correct, 190);
}

TEST(Train, RejectsInvalidConfig) {
  std::vector<SeqSample> data{random_sample(1, 3, 13, 0)};
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(train(init_model(Architecture::lstm, 2, 1), data, cfg), ConfigError);
  EXPECT_THROW(train(init_model(Architecture::lstm, 2, 1), {}, TrainConfig{}), DataError);
}

TEST(Train, DivergenceIsReported) {
  std::vector<SeqSample> data;
  for (int i = 0; i < 8; ++i) data.push_back(random_sample(9 + i, 3, 13, i % 2));
  data[3].sequence(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(train(init_model(Architecture::lstm, 2, 1), data, TrainConfig{}), DivergenceError);
}
