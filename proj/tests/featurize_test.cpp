#include <gtest/gtest.h>

#include <cmath>

#include "eegerr/featurize.hpp"
#include "oracles.hpp"

using namespace eegerr;

namespace {

std::pair<EegRecording, AnnotationTrack> small_synth(std::uint64_t seed, double separation = 1.0) {
  SynthSpec spec;
  spec.n_channels = 4;
  spec.duration_s = 40.0;
  spec.seed = seed;
  spec.class_separation = separation;
  return synth_dataset(spec);
}

TrialFeatures random_features(Rng& rng, const std::string& subject, int index, int channels) {
  TrialFeatures t{subject, index, index % 3 == 0 ? TrialLabel::err : TrialLabel::ok, {}};
  for (int c = 0; c < channels; ++c) {
    FeatureRow row{};
    for (int j = 0; j < kNumFeatures; ++j) row[j] = rng.normal() * (j + 1) + 10.0 * j;
    t.matrix.push_back(row);
  }
  return t;
}

}  // namespace

TEST(Featurize, ShapeAndColumnsMatchReference) {
  Rng rng(3);
  Trial trial{"s", 0, 0.0, TrialLabel::ok, 2500.0, {}};
  for (int c = 0; c < 3; ++c) {
    std::vector<double> x(2500);
    for (auto& v : x) v = rng.normal();
    trial.samples.push_back(std::move(x));
  }
  const FeatureConfig cfg;
  const auto fb = cfg.filterbank(2500.0);
  const auto tf = featurize_trial(trial, cfg, fb);
  ASSERT_EQ(tf.matrix.size(), 3u);
  for (int c = 0; c < 3; ++c) {
    const auto spec = oracle::spectrogram(trial.samples[c], 112, 87, 512, true);
    ASSERT_EQ(spec.size(), 28u);
    double f = 0.0, h = 0.0;
    std::vector<double> ceps(11, 0.0);
    for (const auto& p : spec) {
      f += oracle::centroid(p, 2500.0, 512);
      h += oracle::entropy_bits(p);
      const auto m = oracle::mfcc(p, fb.edge_bins, 11);
      for (int i = 0; i < 11; ++i) ceps[i] += m[i];
    }
    EXPECT_NEAR(tf.matrix[c][0], f / 28.0, 1e-9);
    EXPECT_NEAR(tf.matrix[c][1], h / 28.0, 1e-10);
    for (int i = 0; i < 11; ++i) EXPECT_NEAR(tf.matrix[c][2 + i], ceps[i] / 28.0, 1e-9) << "c" << i + 1;
  }
}

TEST(Featurize, ChannelOrderIsPreserved) {
  auto [rec, track] = small_synth(1);
  const FeatureConfig cfg;
  const auto trials = segment_trials(rec, track, 0.0);
  ASSERT_FALSE(trials.empty());
  Trial swapped = trials[0];
  std::swap(swapped.samples[0], swapped.samples[3]);
  const auto fb = cfg.filterbank(rec.sample_rate_hz);
  const auto a = featurize_trial(trials[0], cfg, fb);
  const auto b = featurize_trial(swapped, cfg, fb);
  EXPECT_EQ(a.matrix[0], b.matrix[3]);
  EXPECT_EQ(a.matrix[3], b.matrix[0]);
  EXPECT_EQ(a.matrix[1], b.matrix[1]);
}

TEST(Featurize, RecordingMatchesPerTrialPath) {
  auto [rec, track] = small_synth(2);
  const FeatureConfig cfg;
  const auto fb = cfg.filterbank(rec.sample_rate_hz);
  const auto all = featurize_recording(rec, track, 0.0, cfg);
  const auto trials = segment_trials(rec, track, 0.0);
  ASSERT_EQ(all.size(), trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) EXPECT_EQ(all[i], featurize_trial(trials[i], cfg, fb));
}

TEST(Featurize, MedianReducer) {
  EXPECT_EQ(detail::reduce({3.0, 1.0, 2.0}, Reducer::median), 2.0);
  EXPECT_EQ(detail::reduce({4.0, 1.0, 3.0, 2.0}, Reducer::median), 2.5);
  EXPECT_EQ(detail::reduce({4.0, 1.0, 3.0, 2.0}, Reducer::mean), 2.5);
  auto [rec, track] = small_synth(4);
  FeatureConfig cfg;
  cfg.reducer = Reducer::median;
  const auto med = featurize_recording(rec, track, 0.0, cfg);
  const auto mean = featurize_recording(rec, track, 0.0, FeatureConfig{});
  ASSERT_EQ(med.size(), mean.size());
  EXPECT_NE(med[0].matrix[0], mean[0].matrix[0]);
}

TEST(Featurize, ZeroChannelIsRejected) {
  Trial trial{"s", 0, 0.0, TrialLabel::ok, 2500.0, {std::vector<double>(2500, 0.0)}};
  const FeatureConfig cfg;
  EXPECT_THROW(featurize_trial(trial, cfg, cfg.filterbank(2500.0)), DataError);
}

TEST(Featurize, FilterbankForOtherRateIsRejected) {
  Trial trial{"s", 0, 0.0, TrialLabel::ok, 2500.0, {std::vector<double>(2500, 1.0)}};
  const FeatureConfig cfg;
  EXPECT_THROW(featurize_trial(trial, cfg, cfg.filterbank(2000.0)), ConfigError);
}

// Mean difference between classes, in pooled standard errors, for the best
// column. With separation the classes differ; without it they should not.
TEST(Featurize, SyntheticClassesAreSeparable) {
  auto best_z = [](double separation) {
    SynthSpec spec;
    spec.n_channels = 4;
    spec.duration_s = 120.0;
    spec.seed = 5;
    spec.class_separation = separation;
    auto [rec, track] = synth_dataset(spec);
    const auto feats = featurize_recording(rec, track, 0.0, FeatureConfig{});
    double best = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      for (int j = 0; j < kNumFeatures; ++j) {
        double s[2] = {0, 0}, sq[2] = {0, 0};
        int n[2] = {0, 0};
        for (const auto& t : feats) {
          const int k = static_cast<int>(t.label);
          s[k] += t.matrix[c][j];
          sq[k] += t.matrix[c][j] * t.matrix[c][j];
          ++n[k];
        }
        double var = 0.0;
        for (int k : {0, 1}) var += (sq[k] - s[k] * s[k] / n[k]) / (n[k] - 1) / n[k];
        best = std::max(best, std::abs(s[1] / n[1] - s[0] / n[0]) / std::sqrt(var));
      }
    }
    return best;
  };
  EXPECT_GT(best_z(1.0), 3.0);
  EXPECT_LT(best_z(0.0), best_z(1.0));
}

// ---------------------------------------------------------------------------

TEST(Normalizer, ZeroMeanUnitPopulationStd) {
  Rng rng(8);
  std::vector<TrialFeatures> train;
  for (int i = 0; i < 30; ++i) train.push_back(random_features(rng, "a", i, 5));
  const auto norm = fit_normalizer(train);
  FeatureRow sum{}, sq{};
  for (const auto& t : train) {
    for (const auto& row : apply_normalizer(norm, t).matrix) {
      for (int j = 0; j < kNumFeatures; ++j) {
        sum[j] += row[j];
        sq[j] += row[j] * row[j];
      }
    }
  }
  for (int j = 0; j < kNumFeatures; ++j) {
    EXPECT_NEAR(sum[j] / 150.0, 0.0, 1e-12);
    EXPECT_NEAR(sq[j] / 150.0, 1.0, 1e-12);
  }
}

TEST(Normalizer, IndependentOfTrialOrder) {
  Rng rng(9);
  std::vector<TrialFeatures> train;
  for (int i = 0; i < 20; ++i) train.push_back(random_features(rng, i % 2 ? "a" : "b", i, 3));
  const auto a = fit_normalizer(train);
  std::reverse(train.begin(), train.end());
  EXPECT_EQ(a, fit_normalizer(train));
}

TEST(Normalizer, ConstantColumnHitsFloor) {
  Rng rng(10);
  std::vector<TrialFeatures> train;
  for (int i = 0; i < 5; ++i) {
    auto t = random_features(rng, "a", i, 2);
    for (auto& row : t.matrix) row[4] = 7.0;
    train.push_back(t);
  }
  const auto norm = fit_normalizer(train);
  EXPECT_EQ(norm.stds[4], kStdFloor);
  EXPECT_EQ(apply_normalizer(norm, train[0]).matrix[0][4], 0.0);
  EXPECT_THROW(fit_normalizer(std::vector<TrialFeatures>{}), DataError);
}

TEST(Normalizer, IdentityLeavesFeaturesUnchanged) {
  Rng rng(11);
  const auto t = random_features(rng, "a", 0, 4);
  EXPECT_EQ(apply_normalizer(Normalizer::identity(), t), t);
}

TEST(FeatureCsv, RoundTrip) {
  Rng rng(12);
  std::vector<TrialFeatures> feats;
  for (int i = 0; i < 6; ++i) feats.push_back(random_features(rng, i < 3 ? "p1" : "p2", i, 3));
  EXPECT_EQ(parse_features(format_features(feats)), feats);
}

TEST(FeatureCsv, MalformedInputIsRejected) {
  EXPECT_THROW(parse_features(""), DataError);
  EXPECT_THROW(parse_features("a,b\n"), DataError);
  std::vector<TrialFeatures> feats{TrialFeatures{"s", 0, TrialLabel::ok, {FeatureRow{}}}};
  auto text = format_features(feats);
  EXPECT_THROW(parse_features(text + "s,0,ERR,1,0,0,0,0,0,0,0,0,0,0,0,0,0\n"), DataError);
  EXPECT_THROW(parse_features(text + "s,1,OK,0,0,0,0,0,0,0,0,0,0,0,0,0,nan\n"), DataError);
  EXPECT_THROW(parse_features(text + "s,1,OK,0,0,0\n"), DataError);
}
