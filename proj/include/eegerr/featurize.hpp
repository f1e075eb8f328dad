#pragma once

// Per-trial N x 13 feature matrix: [instfreq, entropy, c1..c11] per channel,
// each reduced over frames, plus a train-fitted z-score normalizer.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "eegerr/dsp.hpp"
#include "eegerr/eeg_io.hpp"
#include "eegerr/text.hpp"

namespace eegerr {

inline constexpr int kNumCepstral = 11;
inline constexpr int kNumFeatures = 2 + kNumCepstral;

using FeatureRow = std::array<double, kNumFeatures>;

enum class Reducer { mean, median };

struct FeatureConfig {
  dsp::FrameConfig frame;
  int num_filters = 20;
  double f_max_hz = 200.0;
  bool entropy_normalized = false;
  Reducer reducer = Reducer::mean;

  dsp::MelFilterbank filterbank(double fs) const {
    return dsp::design_mel_filterbank(num_filters, fs, frame.n_dft, f_max_hz);
  }
};

struct TrialFeatures {
  std::string subject_id;
  int trial_index = 0;
  TrialLabel label = TrialLabel::ok;
  std::vector<FeatureRow> matrix;  // one row per channel, recording order

  bool operator==(const TrialFeatures&) const = default;
};

namespace detail {

inline double reduce(std::vector<double> v, Reducer r) {
  if (r == Reducer::mean) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  }
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Frames with no power are skipped; a channel with no powered frame is an error.
inline FeatureRow featurize_channel(std::span<const double> x, double fs, const FeatureConfig& cfg,
                                    const dsp::MelFilterbank& fb) {
  const auto spec = dsp::stft_power(x, fs, cfg.frame);
  std::vector<double> instfreq;
  std::vector<double> entropy;
  std::vector<std::vector<double>> ceps(kNumCepstral);
  for (const auto& frame : spec.power) {
    const auto centroid = dsp::spectral_centroid(frame, spec.freqs_hz);
    if (!centroid) continue;
    instfreq.push_back(*centroid);
    entropy.push_back(*dsp::power_entropy(frame, cfg.entropy_normalized));
    const auto c = dsp::mfcc_frame(frame, fb, kNumCepstral);
    for (int i = 0; i < kNumCepstral; ++i) ceps[i].push_back(c[i]);
  }
  if (instfreq.empty()) throw DataError("all-zero channel: no frame with spectral power");
  FeatureRow row{};
  row[0] = detail::reduce(std::move(instfreq), cfg.reducer);
  row[1] = detail::reduce(std::move(entropy), cfg.reducer);
  for (int i = 0; i < kNumCepstral; ++i) row[2 + i] = detail::reduce(std::move(ceps[i]), cfg.reducer);
  return row;
}

inline void check_filterbank(const FeatureConfig& cfg, const dsp::MelFilterbank& fb, double fs) {
  if (fb.fs != fs || fb.n_dft != cfg.frame.n_dft)
    throw ConfigError("filterbank was designed for a different sample rate or DFT size");
  if (fb.num_filters <= kNumCepstral) throw ConfigError("filterbank needs more than 11 filters");
}

inline TrialFeatures featurize_trial(const Trial& trial, const FeatureConfig& cfg,
                                     const dsp::MelFilterbank& fb) {
  check_filterbank(cfg, fb, trial.sample_rate_hz);
  TrialFeatures out{trial.subject_id, trial.trial_index, trial.label, {}};
  out.matrix.reserve(trial.samples.size());
  for (const auto& ch : trial.samples) out.matrix.push_back(featurize_channel(ch, trial.sample_rate_hz, cfg, fb));
  return out;
}

// Segments and featurizes without materializing every trial's samples.
inline std::vector<TrialFeatures> featurize_recording(const EegRecording& rec, const AnnotationTrack& track,
                                                      double offset_s, const FeatureConfig& cfg) {
  const auto fb = cfg.filterbank(rec.sample_rate_hz);
  check_filterbank(cfg, fb, rec.sample_rate_hz);
  const auto len = trial_length_samples(rec.sample_rate_hz);
  std::vector<TrialFeatures> out;
  for (const auto& w : trial_windows(rec, track, offset_s)) {
    TrialFeatures tf{rec.subject_id, w.trial_index, w.label, {}};
    tf.matrix.reserve(rec.num_channels());
    for (const auto& row : rec.samples) {
      tf.matrix.push_back(
          featurize_channel(std::span<const double>(row).subspan(w.first_sample, len), rec.sample_rate_hz, cfg, fb));
    }
    out.push_back(std::move(tf));
  }
  return out;
}

// ---------------------------------------------------------------------------

inline constexpr double kStdFloor = 1e-8;

struct Normalizer {
  FeatureRow means{};
  FeatureRow stds{};

  static Normalizer identity() {
    Normalizer n;
    n.means.fill(0.0);
    n.stds.fill(1.0);
    return n;
  }

  bool operator==(const Normalizer&) const = default;
};

// Pooled per-column mean and population std over every row of every matrix,
// accumulated in (subject, trial) order.
inline Normalizer fit_normalizer(std::span<const TrialFeatures> train) {
  if (train.empty()) throw DataError("cannot fit a normalizer on an empty training set");
  std::vector<const TrialFeatures*> order;
  for (const auto& t : train) order.push_back(&t);
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    return std::tie(a->subject_id, a->trial_index) < std::tie(b->subject_id, b->trial_index);
  });
  Normalizer n;
  FeatureRow sum{};
  std::size_t count = 0;
  for (const auto* t : order) {
    for (const auto& row : t->matrix) {
      for (int j = 0; j < kNumFeatures; ++j) sum[j] += row[j];
      ++count;
    }
  }
  if (count == 0) throw DataError("training features have no rows");
  for (int j = 0; j < kNumFeatures; ++j) n.means[j] = sum[j] / static_cast<double>(count);
  FeatureRow sq{};
  for (const auto* t : order) {
    for (const auto& row : t->matrix) {
      for (int j = 0; j < kNumFeatures; ++j) {
        const double d = row[j] - n.means[j];
        sq[j] += d * d;
      }
    }
  }
  for (int j = 0; j < kNumFeatures; ++j)
    n.stds[j] = std::max(kStdFloor, std::sqrt(sq[j] / static_cast<double>(count)));
  return n;
}

inline TrialFeatures apply_normalizer(const Normalizer& norm, TrialFeatures feats) {
  for (auto& row : feats.matrix) {
    for (int j = 0; j < kNumFeatures; ++j) row[j] = (row[j] - norm.means[j]) / norm.stds[j];
  }
  return feats;
}

// ---------------------------------------------------------------------------
// Feature CSV: subject,trial,label,channel,f1..f13 (one row per trial x channel)

inline std::string format_features(std::span<const TrialFeatures> feats) {
  std::string out = "subject,trial,label,channel";
  for (int j = 1; j <= kNumFeatures; ++j) out += ",f" + std::to_string(j);
  out += '\n';
  for (const auto& t : feats) {
    for (std::size_t c = 0; c < t.matrix.size(); ++c) {
      out += t.subject_id + ',' + std::to_string(t.trial_index) + ',' + std::string(to_string(t.label)) + ',' +
             std::to_string(c);
      for (double v : t.matrix[c]) out += ',' + text::format_double(v);
      out += '\n';
    }
  }
  return out;
}

inline std::vector<TrialFeatures> parse_features(std::string_view content) {
  const auto rows = text::lines(content);
  if (rows.empty() || !rows[0].starts_with("subject,trial,label,channel,f1"))
    throw DataError("feature file must start with header subject,trial,label,channel,f1..f13");
  std::vector<TrialFeatures> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto cells = text::split(rows[r], ',');
    if (cells.size() != 4 + kNumFeatures) throw DataError("feature row " + std::to_string(r + 1) + " has wrong width");
    const auto trial = text::parse_int(cells[1]);
    const auto channel = text::parse_int(cells[3]);
    if (!trial || !channel) throw DataError("bad trial/channel index at feature row " + std::to_string(r + 1));
    const std::string subject(cells[0]);
    const auto label = parse_trial_label(cells[2]);
    if (out.empty() || out.back().subject_id != subject || out.back().trial_index != *trial) {
      out.push_back({subject, static_cast<int>(*trial), label, {}});
    }
    auto& tf = out.back();
    if (tf.label != label || *channel != static_cast<std::int64_t>(tf.matrix.size()))
      throw DataError("inconsistent trial rows at feature row " + std::to_string(r + 1));
    FeatureRow row{};
    for (int j = 0; j < kNumFeatures; ++j) {
      const auto v = text::parse_double(cells[4 + j]);
      if (!v || !std::isfinite(*v)) throw DataError("bad feature value at row " + std::to_string(r + 1));
      row[j] = *v;
    }
    tf.matrix.push_back(row);
  }
  return out;
}

}  // namespace eegerr
