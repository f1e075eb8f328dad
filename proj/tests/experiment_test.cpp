#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "eegerr/experiment.hpp"

using namespace eegerr;

namespace {

std::vector<TrialFeatures> labeled_set(int n_ok, int n_err, const std::string& subject = "s") {
  std::vector<TrialFeatures> out;
  Rng rng(derive_seed(n_ok, n_err));
  for (int i = 0; i < n_ok + n_err; ++i) {
    TrialFeatures t{subject, i, TrialLabel::ok, {}};
    out.push_back(t);
  }
  // Scatter the ERR labels through the sequence.
  std::vector<std::size_t> idx(out.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(std::span<std::size_t>(idx));
  for (int i = 0; i < n_err; ++i) out[idx[i]].label = TrialLabel::err;
  return out;
}

// Tiny separable features: ERR trials carry a shifted first column.
std::vector<TrialFeatures> separable_set(int n_ok, int n_err, std::uint64_t seed) {
  auto out = labeled_set(n_ok, n_err);
  Rng rng(seed);
  for (auto& t : out) {
    for (int c = 0; c < 3; ++c) {
      FeatureRow row{};
      for (auto& v : row) v = rng.normal();
      row[0] += t.label == TrialLabel::err ? 3.0 : -3.0;
      t.matrix.push_back(row);
    }
  }
  return out;
}

}  // namespace

TEST(Metrics, ConfusionFixture) {
  const auto m = metrics({3, 1, 2, 4});
  EXPECT_DOUBLE_EQ(m.accuracy, 0.7);
  EXPECT_DOUBLE_EQ(m.precision, 0.75);
  EXPECT_DOUBLE_EQ(m.recall, 0.6);
  EXPECT_NEAR(m.f_score, 2.0 / 3.0, 1e-15);
  EXPECT_FALSE(m.precision_undefined || m.recall_undefined || m.f_score_undefined);
}

TEST(Metrics, HarmonicMeanFixtures) {
  EXPECT_NEAR(f_score(0.8065, 0.7576), 0.7813, 5e-4);
  EXPECT_NEAR(f_score(0.6250, 0.5882), 0.6061, 5e-4);
  EXPECT_EQ(f_score(0.0, 0.0), 0.0);
  EXPECT_EQ(f_score(1.0, 1.0), 1.0);
}

TEST(Metrics, UndefinedRatiosAreFlagged) {
  const auto none_predicted = metrics({0, 0, 5, 5});
  EXPECT_TRUE(none_predicted.precision_undefined);
  EXPECT_FALSE(none_predicted.recall_undefined);
  EXPECT_EQ(none_predicted.precision, 0.0);
  EXPECT_TRUE(none_predicted.f_score_undefined);
  const auto no_positives = metrics({0, 2, 0, 8});
  EXPECT_TRUE(no_positives.recall_undefined);
  EXPECT_DOUBLE_EQ(no_positives.accuracy, 0.8);
  EXPECT_THROW(metrics({0, 0, 0, 0}), DataError);
  EXPECT_THROW(metrics({-1, 0, 0, 3}), DataError);
}

TEST(Metrics, RandomPredictorIsAtChance) {
  Rng rng(77);
  ConfusionMatrix cm;
  for (int i = 0; i < 10000; ++i) {
    const bool truth = rng.uniform() < 0.5;
    const bool guess = rng.uniform() < 0.5;
    if (truth) {
      (guess ? cm.tp : cm.fn) += 1;
    } else {
      (guess ? cm.fp : cm.tn) += 1;
    }
  }
  const auto m = metrics(cm);
  EXPECT_NEAR(m.accuracy, 0.5, 0.02);
  EXPECT_NEAR(m.f_score, 0.5, 0.02);
}

// ---------------------------------------------------------------------------

TEST(Undersample, BalancesAndPreservesOrder) {
  const auto set = labeled_set(597, 63);
  const auto bal = undersample(set, 4);
  ASSERT_EQ(bal.size(), 126u);
  int err = 0;
  for (std::size_t i = 0; i < bal.size(); ++i) {
    err += bal[i].label == TrialLabel::err;
    if (i > 0) {
      EXPECT_LT(bal[i - 1].trial_index, bal[i].trial_index);
    }
  }
  EXPECT_EQ(err, 63);
  EXPECT_EQ(bal, undersample(set, 4));
  EXPECT_NE(bal, undersample(set, 5));
}

TEST(Undersample, MajorityCanBeEitherClass) {
  const auto bal = undersample(labeled_set(10, 30), 1);
  EXPECT_EQ(bal.size(), 20u);
  EXPECT_THROW(undersample(labeled_set(5, 0), 1), DataError);
}

TEST(Split, StratifiedDisjointAndCovering) {
  const auto bal = undersample(labeled_set(597, 63), 2);
  const auto split = random_split(bal, 0.75, 3);
  ASSERT_EQ(split.train.size(), 94u);
  ASSERT_EQ(split.test.size(), 32u);
  int train_err = 0;
  std::set<int> seen;
  for (const auto& t : split.train) {
    train_err += t.label == TrialLabel::err;
    seen.insert(t.trial_index);
  }
  for (const auto& t : split.test) EXPECT_TRUE(seen.insert(t.trial_index).second);
  EXPECT_EQ(train_err, 47);
  EXPECT_EQ(seen.size(), 126u);
}

TEST(Split, RejectsDegenerateFractions) {
  const auto set = labeled_set(4, 4);
  EXPECT_THROW(random_split(set, 0.0, 1), ConfigError);
  EXPECT_THROW(random_split(set, 1.0, 1), ConfigError);
  EXPECT_THROW(random_split(set, 0.01, 1), ConfigError);
}

TEST(Seeds, DependOnlyOnMasterAndRepetition) {
  const auto a = repetition_seeds(10, 3);
  const auto b = repetition_seeds(10, 3);
  EXPECT_EQ(a.split, b.split);
  EXPECT_NE(a.split, repetition_seeds(10, 4).split);
  EXPECT_NE(a.split, repetition_seeds(11, 3).split);
  std::set<std::uint64_t> distinct{a.undersample_train, a.undersample_test, a.split, a.init, a.shuffle};
  EXPECT_EQ(distinct.size(), 5u);
}

// ---------------------------------------------------------------------------

TEST(Protocol, IntraAggregatesAreRecomputable) {
  const auto set = separable_set(120, 40, 1);
  ExperimentConfig cfg;
  cfg.repetitions = 3;
  cfg.hidden_dim = 4;
  cfg.train.epochs = 5;
  cfg.train.learning_rate = 0.02;
  cfg.seed = 8;
  const auto r = run_intra(set, cfg);
  ASSERT_EQ(r.repetitions.size(), 3u);
  std::vector<double> acc;
  for (const auto& rep : r.repetitions) {
    EXPECT_EQ(rep.metrics, metrics(rep.confusion));
    EXPECT_EQ(rep.confusion.total(), 20);
    EXPECT_EQ(rep.train_ids.size(), 60u);
    EXPECT_EQ(rep.loss_history.size(), 5u);
    acc.push_back(rep.metrics.accuracy);
  }
  const auto s = summarize(acc);
  EXPECT_EQ(r.aggregate.accuracy.mean, s.mean);
  EXPECT_EQ(r.aggregate.accuracy.std, s.std);
  EXPECT_GT(s.mean, 0.9);
}

TEST(Protocol, ArchitecturesShareSplits) {
  const auto set = separable_set(60, 30, 2);
  ExperimentConfig cfg;
  cfg.repetitions = 2;
  cfg.hidden_dim = 3;
  cfg.train.epochs = 2;
  cfg.seed = 4;
  const auto all = compare_architectures(set, cfg);
  ASSERT_EQ(all.size(), 3u);
  const auto& ref = all.at(nn::Architecture::bilstm);
  for (const auto& [arch, report] : all) {
    EXPECT_EQ(report.config.architecture, arch);
    for (int i = 0; i < 2; ++i) {
      EXPECT_EQ(report.repetitions[i].test_ids, ref.repetitions[i].test_ids);
      EXPECT_EQ(report.repetitions[i].seeds.init, ref.repetitions[i].seeds.init);
    }
  }
}

TEST(Protocol, InterKeepsSubjectsApart) {
  auto a = separable_set(50, 20, 3);
  auto b = separable_set(40, 25, 4);
  for (auto& t : b) t.subject_id = "other";
  ExperimentConfig cfg;
  cfg.repetitions = 2;
  cfg.hidden_dim = 3;
  cfg.train.epochs = 3;
  const auto r = run_inter(a, b, cfg);
  EXPECT_EQ(r.config.mode, Mode::inter);
  for (const auto& rep : r.repetitions) {
    EXPECT_EQ(rep.train_ids.size(), 40u);
    EXPECT_EQ(rep.test_ids.size(), 50u);
    for (const auto& id : rep.test_ids) EXPECT_TRUE(id.starts_with("other:"));
  }
}

TEST(Protocol, SameSeedSameReport) {
  const auto set = separable_set(40, 20, 5);
  ExperimentConfig cfg;
  cfg.repetitions = 2;
  cfg.hidden_dim = 3;
  cfg.train.epochs = 2;
  cfg.seed = 1;
  const auto a = run_intra(set, cfg);
  const auto b = run_intra(set, cfg);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(a.repetitions[i].loss_history, b.repetitions[i].loss_history);
    EXPECT_EQ(a.repetitions[i].confusion, b.repetitions[i].confusion);
  }
  cfg.repetitions = 0;
  EXPECT_THROW(run_intra(set, cfg), ConfigError);
}

TEST(Summarize, SampleStd) {
  const auto s = summarize({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(summarize({0.7}).std, 0.0);
}
