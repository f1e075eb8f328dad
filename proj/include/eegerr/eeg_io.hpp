#pragma once

// Recordings, annotation tracks, audio/EEG synchronization, trial
// segmentation and a seeded synthetic recording generator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iterator>
#include <numbers>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "eegerr/common.hpp"
#include "eegerr/random.hpp"
#include "eegerr/text.hpp"

namespace eegerr {

struct EegRecording {
  double sample_rate_hz = 2500.0;
  std::vector<std::string> channel_names;
  std::vector<std::vector<double>> samples;  // channels x time, microvolts
  std::string subject_id;

  std::size_t num_channels() const { return samples.size(); }
  std::size_t num_samples() const { return samples.empty() ? 0 : samples.front().size(); }
  double duration_s() const { return static_cast<double>(num_samples()) / sample_rate_hz; }

  void validate() const {
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
      throw DataError("sample rate must be positive");
    if (channel_names.size() != samples.size())
      throw DataError("channel name count does not match sample rows");
    if (samples.empty()) throw DataError("recording has no channels");
    std::set<std::string> seen;
    for (const auto& name : channel_names) {
      if (name.empty()) throw DataError("empty channel name");
      if (!seen.insert(name).second) throw DataError("duplicate channel name: " + name);
    }
    const auto len = samples.front().size();
    if (len == 0) throw DataError("recording has no samples");
    for (const auto& row : samples) {
      if (row.size() != len) throw DataError("ragged rows");
      for (double v : row) {
        if (!std::isfinite(v)) throw DataError("non-finite sample value");
      }
    }
  }
};

enum class EventLabel { OK, NCH, OOT, SIL, MIS };

inline std::string_view to_string(EventLabel l) {
  switch (l) {
    case EventLabel::OK: return "OK";
    case EventLabel::NCH: return "NCH";
    case EventLabel::OOT: return "OOT";
    case EventLabel::SIL: return "SIL";
    case EventLabel::MIS: return "MIS";
  }
  return "?";
}

inline EventLabel parse_event_label(std::string_view s) {
  s = text::trim(s);
  if (s == "OK") return EventLabel::OK;
  if (s == "NCH") return EventLabel::NCH;
  if (s == "OOT") return EventLabel::OOT;
  if (s == "SIL") return EventLabel::SIL;
  if (s == "MIS") return EventLabel::MIS;
  throw DataError("unknown label: " + std::string(s));
}

inline bool is_error_event(EventLabel l) {
  return l == EventLabel::NCH || l == EventLabel::OOT || l == EventLabel::MIS;
}

struct AnnotationEvent {
  double onset_s = 0.0;
  double offset_s = 0.0;
  EventLabel label = EventLabel::OK;

  bool operator==(const AnnotationEvent&) const = default;
};

struct AnnotationTrack {
  std::vector<AnnotationEvent> events;  // sorted by onset, non-overlapping

  bool operator==(const AnnotationTrack&) const = default;
};

// Sorts by onset and enforces the track invariants.
inline AnnotationTrack make_track(std::vector<AnnotationEvent> events) {
  for (const auto& e : events) {
    if (!std::isfinite(e.onset_s) || !std::isfinite(e.offset_s) || e.onset_s < 0.0)
      throw DataError("event times must be finite and non-negative");
    if (!(e.offset_s > e.onset_s)) throw DataError("offset before onset");
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const auto& a, const auto& b) { return a.onset_s < b.onset_s; });
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].onset_s < events[i - 1].offset_s) throw DataError("overlapping events");
  }
  return AnnotationTrack{std::move(events)};
}

enum class TrialLabel { ok = 0, err = 1 };

inline std::string_view to_string(TrialLabel l) { return l == TrialLabel::ok ? "OK" : "ERR"; }

inline TrialLabel parse_trial_label(std::string_view s) {
  s = text::trim(s);
  if (s == "OK") return TrialLabel::ok;
  if (s == "ERR") return TrialLabel::err;
  throw DataError("unknown trial label: " + std::string(s));
}

struct Trial {
  std::string subject_id;
  int trial_index = 0;
  double start_s = 0.0;  // recording time of the first sample
  TrialLabel label = TrialLabel::ok;
  double sample_rate_hz = 0.0;
  std::vector<std::vector<double>> samples;  // channels x round(fs)
};

// ---------------------------------------------------------------------------
// EEGC text format

inline EegRecording parse_recording(std::string_view content) {
  const auto rows = text::lines(content);
  if (rows.size() < 4) throw DataError("malformed header: expected 4 header lines");
  if (text::trim(rows[0]) != "EEGC v1") throw DataError("malformed header: missing 'EEGC v1'");
  if (!rows[1].starts_with("fs=")) throw DataError("malformed header: missing fs=");
  const auto fs = text::parse_double(rows[1].substr(3));
  if (!fs || !(*fs > 0.0)) throw DataError("malformed header: invalid fs");
  if (!rows[2].starts_with("subject=")) throw DataError("malformed header: missing subject=");

  EegRecording rec;
  rec.sample_rate_hz = *fs;
  rec.subject_id = std::string(rows[2].substr(8));
  for (auto name : text::split(rows[3], ',')) rec.channel_names.emplace_back(text::trim(name));
  const auto channels = rec.channel_names.size();
  rec.samples.assign(channels, {});
  for (auto& ch : rec.samples) ch.reserve(rows.size() - 4);
  for (std::size_t r = 4; r < rows.size(); ++r) {
    const auto cells = text::split(rows[r], ',');
    if (cells.size() != channels) throw DataError("ragged rows at line " + std::to_string(r + 1));
    for (std::size_t c = 0; c < channels; ++c) {
      const auto v = text::parse_double(cells[c]);
      if (!v) throw DataError("unparseable value at line " + std::to_string(r + 1));
      if (!std::isfinite(*v)) throw DataError("non-finite value at line " + std::to_string(r + 1));
      rec.samples[c].push_back(*v);
    }
  }
  rec.validate();
  return rec;
}

inline std::string format_recording(const EegRecording& rec) {
  rec.validate();
  std::string out = "EEGC v1\nfs=" + text::format_double(rec.sample_rate_hz) + "\nsubject=" +
                    rec.subject_id + "\n";
  for (std::size_t c = 0; c < rec.channel_names.size(); ++c) {
    if (c) out += ',';
    out += rec.channel_names[c];
  }
  out += '\n';
  for (std::size_t t = 0; t < rec.num_samples(); ++t) {
    for (std::size_t c = 0; c < rec.num_channels(); ++c) {
      if (c) out += ',';
      out += text::format_double(rec.samples[c][t]);
    }
    out += '\n';
  }
  return out;
}

inline EegRecording load_recording(const std::filesystem::path& path) {
  return parse_recording(read_text_file(path));
}

inline void save_recording(const std::filesystem::path& path, const EegRecording& rec) {
  write_file_atomic(path, format_recording(rec));
}

// ---------------------------------------------------------------------------
// Annotation CSV: onset_s,offset_s,label

inline AnnotationTrack parse_annotations(std::string_view content) {
  const auto rows = text::lines(content);
  if (rows.empty() || text::trim(rows[0]) != "onset_s,offset_s,label")
    throw DataError("annotation file must start with header onset_s,offset_s,label");
  std::vector<AnnotationEvent> events;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (text::trim(rows[r]).empty()) continue;
    const auto cells = text::split(rows[r], ',');
    if (cells.size() != 3) throw DataError("annotation row " + std::to_string(r + 1) + " needs 3 fields");
    const auto onset = text::parse_double(cells[0]);
    const auto offset = text::parse_double(cells[1]);
    if (!onset || !offset) throw DataError("unparseable time at annotation row " + std::to_string(r + 1));
    events.push_back({*onset, *offset, parse_event_label(cells[2])});
  }
  return make_track(std::move(events));
}

inline std::string format_annotations(const AnnotationTrack& track) {
  std::string out = "onset_s,offset_s,label\n";
  for (const auto& e : track.events) {
    out += text::format_double(e.onset_s) + ',' + text::format_double(e.offset_s) + ',' +
           std::string(to_string(e.label)) + '\n';
  }
  return out;
}

inline AnnotationTrack load_annotations(const std::filesystem::path& path) {
  return parse_annotations(read_text_file(path));
}

inline void save_annotations(const std::filesystem::path& path, const AnnotationTrack& track) {
  write_file_atomic(path, format_annotations(track));
}

// ---------------------------------------------------------------------------
// Synchronization

inline constexpr double kSyncEnvelopeWindowS = 0.050;
inline constexpr double kSyncPeakFraction = 0.5;

// Centered moving-RMS envelope over a rectangular window of `window` samples.
inline std::vector<double> moving_rms(std::span<const double> x, std::size_t window) {
  std::vector<double> prefix(x.size() + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) prefix[i + 1] = prefix[i] + x[i] * x[i];
  const std::size_t half = window / 2;
  std::vector<double> env(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(x.size(), lo + window);
    env[i] = std::sqrt(std::max(0.0, prefix[hi] - prefix[lo]) / static_cast<double>(window));
  }
  return env;
}

// Time of the first sample whose envelope reaches half the global maximum
// (the clap marking the start of the performance).
inline double find_sync_offset(std::span<const double> signal, double sample_rate_hz) {
  if (signal.empty()) throw DataError("sync signal is empty");
  if (!(sample_rate_hz > 0.0)) throw DataError("sample rate must be positive");
  for (double v : signal) {
    if (!std::isfinite(v)) throw DataError("sync signal has non-finite values");
  }
  const auto window = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(kSyncEnvelopeWindowS * sample_rate_hz)));
  const auto env = moving_rms(signal, window);
  const double peak = *std::max_element(env.begin(), env.end());
  if (!(peak > 0.0)) throw DataError("sync signal is all zero: no envelope peak");
  const double threshold = kSyncPeakFraction * peak;
  const auto it = std::find_if(env.begin(), env.end(), [&](double e) { return e >= threshold; });
  return static_cast<double>(std::distance(env.begin(), it)) / sample_rate_hz;
}

// ---------------------------------------------------------------------------
// Segmentation

inline std::size_t trial_length_samples(double sample_rate_hz) {
  return static_cast<std::size_t>(std::lround(sample_rate_hz));
}

struct TrialWindow {
  int trial_index = 0;
  std::size_t first_sample = 0;
  TrialLabel label = TrialLabel::ok;
};

// Consecutive 1 s windows from offset_s; a window is kept only when it lies
// inside a single OK or error event. SIL events, event boundaries and
// unlabeled gaps are discarded.
inline std::vector<TrialWindow> trial_windows(const EegRecording& rec, const AnnotationTrack& track,
                                              double offset_s) {
  if (!(offset_s >= 0.0)) throw DataError("sync offset must be non-negative");
  const std::size_t len = trial_length_samples(rec.sample_rate_hz);
  const auto first = static_cast<std::size_t>(std::lround(offset_s * rec.sample_rate_hz));
  const std::size_t total = rec.num_samples();
  std::vector<TrialWindow> out;
  if (len == 0 || first >= total) return out;
  const std::size_t windows = (total - first) / len;
  constexpr double tol = 1e-9;
  for (std::size_t k = 0; k < windows; ++k) {
    const double w0 = static_cast<double>(k * len) / rec.sample_rate_hz;
    const double w1 = static_cast<double>((k + 1) * len) / rec.sample_rate_hz;
    auto ev = std::upper_bound(track.events.begin(), track.events.end(), w0 + tol,
                               [](double t, const AnnotationEvent& e) { return t < e.onset_s; });
    if (ev == track.events.begin()) continue;
    --ev;
    if (w1 > ev->offset_s + tol || ev->label == EventLabel::SIL) continue;
    out.push_back({static_cast<int>(k), first + k * len,
                   is_error_event(ev->label) ? TrialLabel::err : TrialLabel::ok});
  }
  return out;
}

inline Trial extract_trial(const EegRecording& rec, const TrialWindow& w) {
  const std::size_t len = trial_length_samples(rec.sample_rate_hz);
  Trial t;
  t.subject_id = rec.subject_id;
  t.trial_index = w.trial_index;
  t.start_s = static_cast<double>(w.first_sample) / rec.sample_rate_hz;
  t.label = w.label;
  t.sample_rate_hz = rec.sample_rate_hz;
  t.samples.reserve(rec.num_channels());
  const auto begin = static_cast<std::ptrdiff_t>(w.first_sample);
  for (const auto& row : rec.samples)
    t.samples.emplace_back(row.begin() + begin, row.begin() + begin + static_cast<std::ptrdiff_t>(len));
  return t;
}

inline std::vector<Trial> segment_trials(const EegRecording& rec, const AnnotationTrack& track,
                                         double offset_s) {
  std::vector<Trial> trials;
  for (const auto& w : trial_windows(rec, track, offset_s)) trials.push_back(extract_trial(rec, w));
  return trials;
}

// Removes a named channel (e.g. the audio/sync channel) from a recording.
inline EegRecording drop_channel(EegRecording rec, std::string_view name) {
  const auto it = std::find(rec.channel_names.begin(), rec.channel_names.end(), name);
  if (it == rec.channel_names.end()) throw DataError("no channel named " + std::string(name));
  const auto idx = std::distance(rec.channel_names.begin(), it);
  rec.channel_names.erase(it);
  rec.samples.erase(rec.samples.begin() + idx);
  return rec;
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthSpec {
  int n_channels = 61;
  double duration_s = 400.0;
  double error_fraction = 0.3;
  double class_separation = 1.0;
  std::uint64_t seed = 0;
  // Selects the error-class spectral signature (frequency and channel gains).
  std::uint64_t signature_seed = 1;
  double sample_rate_hz = 2500.0;
  std::string subject_id = "synth";

  void validate() const {
    if (n_channels < 1) throw ConfigError("n_channels must be >= 1");
    if (!(duration_s > 0.0)) throw ConfigError("duration_s must be positive");
    if (!(error_fraction >= 0.0 && error_fraction <= 1.0))
      throw ConfigError("error_fraction must lie in [0, 1]");
    if (!(class_separation >= 0.0)) throw ConfigError("class_separation must be non-negative");
    if (!(sample_rate_hz > 0.0)) throw ConfigError("sample_rate_hz must be positive");
  }
};

struct ClassSignature {
  int register_index = 0;
  double ok_hz = 0.0;
  double err_hz = 0.0;
  std::vector<double> channel_gain;   // 0 for channels that do not carry it
};

// A class signature lives in one of two 16 Hz registers of the 4..40 Hz band.
// Signatures from different registers share no rhythm frequency.
inline constexpr double kSynthRegisterLowHz[] = {4.0, 24.0};
inline constexpr double kSynthRegisterWidthHz = 16.0;
inline constexpr double kSynthMinGapHz = 6.0;
inline constexpr double kSynthJitterHz = 0.5;
inline constexpr double kSynthNoiseStdUv = 10.0;
inline constexpr double kSynthNoiseCutoffHz = 30.0;

inline ClassSignature class_signature(std::uint64_t signature_seed, int n_channels) {
  Rng rng(derive_seed(signature_seed, 0x5167));
  ClassSignature sig;
  sig.register_index = static_cast<int>(rng.below(2));
  const double lo = kSynthRegisterLowHz[sig.register_index];
  const double hi = lo + kSynthRegisterWidthHz;
  do {
    sig.ok_hz = rng.uniform(lo, hi);
    sig.err_hz = rng.uniform(lo, hi);
  } while (std::abs(sig.ok_hz - sig.err_hz) < kSynthMinGapHz);
  sig.channel_gain.resize(static_cast<std::size_t>(n_channels));
  bool any = false;
  for (auto& g : sig.channel_gain) {
    g = rng.uniform() < 0.5 ? rng.uniform(0.5, 1.0) : 0.0;
    any = any || g > 0.0;
  }
  if (!any) sig.channel_gain.front() = 1.0;
  return sig;
}

inline double event_frequency(Rng& rng, const ClassSignature& sig, bool error_event) {
  return (error_event ? sig.err_hz : sig.ok_hz) + rng.uniform(-kSynthJitterHz, kSynthJitterHz);
}

// Splits `total` into `parts` random positive pieces that sum to `total`.
inline std::vector<double> random_partition(Rng& rng, double total, std::size_t parts) {
  std::vector<double> w(parts);
  double sum = 0.0;
  for (auto& v : w) {
    v = rng.uniform(0.5, 1.5);
    sum += v;
  }
  for (auto& v : w) v *= total / sum;
  return w;
}

// Every event is low-pass (AR(1)) Gaussian noise plus one sinusoid of rms
// class_separation * noise std on the signature channels, at the signature's
// OK or error frequency. Only the frequency of the rhythm separates the
// classes, not its presence.
inline std::pair<EegRecording, AnnotationTrack> synth_dataset(const SynthSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0xA77));
  const double duration = spec.duration_s;

  // Annotation layout: OK / ERR alternating, ERR events ~3 s on average.
  const double err_total = spec.error_fraction * duration;
  const double ok_total = duration - err_total;
  const std::size_t n_err = err_total > 0.0 ? std::max<std::size_t>(1, std::lround(err_total / 3.0)) : 0;
  const std::size_t n_ok = ok_total > 0.0 ? n_err + 1 : 0;
  const auto err_len = random_partition(rng, err_total, n_err);
  const auto ok_len = random_partition(rng, ok_total, n_ok);
  std::vector<AnnotationEvent> events;
  double t = 0.0;
  static constexpr EventLabel kErrLabels[] = {EventLabel::NCH, EventLabel::OOT, EventLabel::MIS};
  for (std::size_t i = 0; i < std::max(n_ok, n_err); ++i) {
    if (i < n_ok) {
      events.push_back({t, t + ok_len[i], EventLabel::OK});
      t += ok_len[i];
    }
    if (i < n_err) {
      events.push_back({t, t + err_len[i], kErrLabels[rng.below(3)]});
      t += err_len[i];
    }
  }
  events.back().offset_s = duration;

  EegRecording rec;
  rec.sample_rate_hz = spec.sample_rate_hz;
  rec.subject_id = spec.subject_id;
  const auto n = static_cast<std::size_t>(std::lround(duration * spec.sample_rate_hz));
  const double pole = std::exp(-2.0 * std::numbers::pi * kSynthNoiseCutoffHz / spec.sample_rate_hz);
  const double drive = kSynthNoiseStdUv * std::sqrt(1.0 - pole * pole);
  for (int c = 0; c < spec.n_channels; ++c) {
    rec.channel_names.push_back("Ch" + std::to_string(c + 1));
    Rng noise(derive_seed(spec.seed, 0xC4A, static_cast<std::uint64_t>(c)));
    std::vector<double> row(n);
    double y = kSynthNoiseStdUv * noise.normal();
    for (auto& v : row) {
      y = pole * y + drive * noise.normal();
      v = y;
    }
    rec.samples.push_back(std::move(row));
  }

  const auto sig = class_signature(spec.signature_seed, spec.n_channels);
  const double amp = spec.class_separation * kSynthNoiseStdUv * std::numbers::sqrt2;
  for (const auto& e : events) {
    const double freq = event_frequency(rng, sig, is_error_event(e.label));
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    if (amp == 0.0) continue;
    const auto s0 = static_cast<std::size_t>(std::lround(e.onset_s * spec.sample_rate_hz));
    const auto s1 = std::min(n, static_cast<std::size_t>(std::lround(e.offset_s * spec.sample_rate_hz)));
    for (std::size_t c = 0; c < sig.channel_gain.size(); ++c) {
      const double g = sig.channel_gain[c];
      if (g == 0.0) continue;
      for (std::size_t i = s0; i < s1; ++i) {
        rec.samples[c][i] += g * amp * std::sin(2.0 * std::numbers::pi * freq * i / spec.sample_rate_hz + phase);
      }
    }
  }
  return {std::move(rec), make_track(std::move(events))};
}

}  // namespace eegerr
