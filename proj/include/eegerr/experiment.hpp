#pragma once

// Evaluation protocol: class under-sampling, stratified random splits,
// repeated train/evaluate runs within or across subjects, and metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "eegerr/featurize.hpp"
#include "eegerr/nn.hpp"
#include "eegerr/random.hpp"

namespace eegerr {

// Positive class is ERR.
struct ConfusionMatrix {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;

  long total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  // Set when the ratio had a zero denominator and was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f_score_undefined = false;

  bool operator==(const MetricsReport&) const = default;
};

// Harmonic mean of precision and recall; 0 when both are 0.
inline double f_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

inline MetricsReport metrics(const ConfusionMatrix& cm) {
  if (cm.tp < 0 || cm.fp < 0 || cm.fn < 0 || cm.tn < 0) throw DataError("negative confusion count");
  if (cm.total() == 0) throw DataError("empty confusion matrix");
  MetricsReport m;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fp > 0) {
    m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  } else {
    m.precision_undefined = true;
  }
  if (cm.tp + cm.fn > 0) {
    m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  } else {
    m.recall_undefined = true;
  }
  m.f_score = f_score(m.precision, m.recall);
  m.f_score_undefined = m.precision + m.recall == 0.0;
  return m;
}

// ---------------------------------------------------------------------------

inline nn::SeqSample to_sample(const TrialFeatures& t) {
  nn::SeqSample s;
  s.sequence.resize(static_cast<Eigen::Index>(t.matrix.size()), kNumFeatures);
  for (std::size_t r = 0; r < t.matrix.size(); ++r)
    for (int c = 0; c < kNumFeatures; ++c) s.sequence(static_cast<Eigen::Index>(r), c) = t.matrix[r][c];
  s.label = static_cast<int>(t.label);
  return s;
}

inline std::string trial_id(const TrialFeatures& t) { return t.subject_id + ":" + std::to_string(t.trial_index); }

// Keeps every minority-class trial and a seeded uniform subset of the
// majority class of the same size; input order is preserved.
inline std::vector<TrialFeatures> undersample(std::span<const TrialFeatures> trials, std::uint64_t seed) {
  std::vector<std::size_t> ok;
  std::vector<std::size_t> err;
  for (std::size_t i = 0; i < trials.size(); ++i) (trials[i].label == TrialLabel::err ? err : ok).push_back(i);
  if (ok.empty() || err.empty()) throw DataError("undersample needs both OK and ERR trials");
  auto& majority = ok.size() >= err.size() ? ok : err;
  const std::size_t keep = std::min(ok.size(), err.size());
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(majority));
  majority.resize(keep);
  std::vector<std::size_t> chosen = ok;
  chosen.insert(chosen.end(), err.begin(), err.end());
  std::sort(chosen.begin(), chosen.end());
  std::vector<TrialFeatures> out;
  out.reserve(chosen.size());
  for (auto i : chosen) out.push_back(trials[i]);
  return out;
}

struct Split {
  std::vector<TrialFeatures> train;
  std::vector<TrialFeatures> test;
};

// Class-stratified: each class is shuffled and cut at round(fraction * n_class).
inline Split random_split(std::span<const TrialFeatures> set, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  if (set.size() < 2) throw DataError("split needs at least two trials");
  Rng rng(seed);
  Split out;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (TrialLabel cls : {TrialLabel::ok, TrialLabel::err}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < set.size(); ++i)
      if (set[i].label == cls) idx.push_back(i);
    rng.shuffle(std::span<std::size_t>(idx));
    const auto cut = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(idx.size())));
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
    test_idx.insert(test_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
  }
  if (train_idx.empty() || test_idx.empty())
    throw ConfigError("train_fraction leaves the train or test part empty");
  for (auto i : train_idx) out.train.push_back(set[i]);
  for (auto i : test_idx) out.test.push_back(set[i]);
  return out;
}

inline ConfusionMatrix evaluate(const nn::Model& model, std::span<const nn::SeqSample> test) {
  if (test.empty()) throw DataError("evaluate needs a non-empty test set");
  ConfusionMatrix cm;
  for (const auto& s : test) {
    const int predicted = nn::predict(model, s).label;
    if (s.label == 1) {
      (predicted == 1 ? cm.tp : cm.fn) += 1;
    } else {
      (predicted == 1 ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

// ---------------------------------------------------------------------------

enum class Mode { intra, inter };

inline std::string_view to_string(Mode m) { return m == Mode::intra ? "intra" : "inter"; }

struct ExperimentConfig {
  Mode mode = Mode::intra;
  int repetitions = 10;
  double train_fraction = 0.75;
  nn::Architecture architecture = nn::Architecture::bilstm;
  int hidden_dim = 20;
  bool normalize = true;
  std::uint64_t seed = 0;
  nn::TrainConfig train;  // train.seed is replaced per repetition

  void validate() const {
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
    train.validate();
  }
};

struct RepetitionSeeds {
  std::uint64_t undersample_train = 0;
  std::uint64_t undersample_test = 0;
  std::uint64_t split = 0;
  std::uint64_t init = 0;
  std::uint64_t shuffle = 0;
};

// Seeds depend only on the master seed and repetition index, never on the
// architecture, so architecture comparisons share their data splits.
inline RepetitionSeeds repetition_seeds(std::uint64_t master, int repetition) {
  const auto r = static_cast<std::uint64_t>(repetition);
  return {derive_seed(master, 0x05, r), derive_seed(master, 0x06, r), derive_seed(master, 0x07, r),
          derive_seed(master, 0x08, r), derive_seed(master, 0x09, r)};
}

struct RepetitionResult {
  int index = 0;
  RepetitionSeeds seeds;
  ConfusionMatrix confusion;
  MetricsReport metrics;
  std::vector<double> loss_history;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for one repetition
};

struct Aggregate {
  MetricSummary accuracy;
  MetricSummary precision;
  MetricSummary recall;
  MetricSummary f_score;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<RepetitionResult> repetitions;
  Aggregate aggregate;
};

inline MetricSummary summarize(const std::vector<double>& v) {
  MetricSummary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double sq = 0.0;
    for (double x : v) sq += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(v.size() - 1));
  }
  return s;
}

inline Aggregate aggregate(const std::vector<RepetitionResult>& reps) {
  std::vector<double> a, p, r, f;
  for (const auto& rep : reps) {
    a.push_back(rep.metrics.accuracy);
    p.push_back(rep.metrics.precision);
    r.push_back(rep.metrics.recall);
    f.push_back(rep.metrics.f_score);
  }
  return {summarize(a), summarize(p), summarize(r), summarize(f)};
}

namespace detail {

inline std::vector<nn::SeqSample> to_samples(const std::vector<TrialFeatures>& set, const Normalizer& norm) {
  std::vector<nn::SeqSample> out;
  out.reserve(set.size());
  for (const auto& t : set) out.push_back(to_sample(apply_normalizer(norm, t)));
  return out;
}

inline RepetitionResult fit_and_evaluate(const ExperimentConfig& cfg, int index, const RepetitionSeeds& seeds,
                                         const std::vector<TrialFeatures>& train_set,
                                         const std::vector<TrialFeatures>& test_set) {
  const Normalizer norm = cfg.normalize ? fit_normalizer(train_set) : Normalizer::identity();
  const auto train_samples = to_samples(train_set, norm);
  const auto test_samples = to_samples(test_set, norm);
  nn::TrainConfig tcfg = cfg.train;
  tcfg.seed = seeds.shuffle;
  auto model = nn::init_model(cfg.architecture, cfg.hidden_dim, seeds.init, kNumFeatures);
  auto trained = nn::train(std::move(model), train_samples, tcfg);

  RepetitionResult rep;
  rep.index = index;
  rep.seeds = seeds;
  rep.confusion = evaluate(trained.model, test_samples);
  rep.metrics = metrics(rep.confusion);
  rep.loss_history = std::move(trained.history);
  for (const auto& t : train_set) rep.train_ids.push_back(trial_id(t));
  for (const auto& t : test_set) rep.test_ids.push_back(trial_id(t));
  return rep;
}

}  // namespace detail

// Per repetition: undersample, stratified split, normalizer fitted on the
// training part, train a fresh model, evaluate on the held-out part.
inline ExperimentReport run_intra(std::span<const TrialFeatures> dataset, ExperimentConfig cfg) {
  cfg.mode = Mode::intra;
  cfg.validate();
  ExperimentReport report;
  report.config = cfg;
  for (int r = 0; r < cfg.repetitions; ++r) {
    const auto seeds = repetition_seeds(cfg.seed, r);
    const auto balanced = undersample(dataset, seeds.undersample_train);
    auto split = random_split(balanced, cfg.train_fraction, seeds.split);
    report.repetitions.push_back(detail::fit_and_evaluate(cfg, r, seeds, split.train, split.test));
  }
  report.aggregate = aggregate(report.repetitions);
  return report;
}

// Per repetition: balance each subject's pool independently, train on the
// whole training pool and evaluate on the whole test pool.
inline ExperimentReport run_inter(std::span<const TrialFeatures> train_dataset,
                                  std::span<const TrialFeatures> test_dataset, ExperimentConfig cfg) {
  cfg.mode = Mode::inter;
  cfg.validate();
  ExperimentReport report;
  report.config = cfg;
  for (int r = 0; r < cfg.repetitions; ++r) {
    const auto seeds = repetition_seeds(cfg.seed, r);
    const auto train_pool = undersample(train_dataset, seeds.undersample_train);
    const auto test_pool = undersample(test_dataset, seeds.undersample_test);
    report.repetitions.push_back(detail::fit_and_evaluate(cfg, r, seeds, train_pool, test_pool));
  }
  report.aggregate = aggregate(report.repetitions);
  return report;
}

inline constexpr nn::Architecture kAllArchitectures[] = {nn::Architecture::bilstm, nn::Architecture::lstm,
                                                         nn::Architecture::gru};

// Same seeds (hence identical splits) for every architecture. For inter mode
// pass the test subject's trials as `test_dataset`.
inline std::map<nn::Architecture, ExperimentReport> compare_architectures(
    std::span<const TrialFeatures> dataset, const ExperimentConfig& cfg,
    std::span<const TrialFeatures> test_dataset = {}) {
  std::map<nn::Architecture, ExperimentReport> out;
  for (auto arch : kAllArchitectures) {
    ExperimentConfig c = cfg;
    c.architecture = arch;
    out.emplace(arch, cfg.mode == Mode::intra ? run_intra(dataset, c) : run_inter(dataset, test_dataset, c));
  }
  return out;
}

}  // namespace eegerr
