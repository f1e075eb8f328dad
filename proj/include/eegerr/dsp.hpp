#pragma once

// Short-time spectral features of a single channel: power spectrogram,
// spectral centroid (instantaneous frequency), spectral entropy and MFCCs
// over a Mel filterbank restricted to the low EEG range.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "eegerr/common.hpp"

namespace eegerr::dsp {

enum class Window { hamming, rectangular };

struct FrameConfig {
  double frame_len_s = 0.045;
  double overlap_s = 0.010;  // hop = frame_len_s - overlap_s
  Window window = Window::hamming;
  int n_dft = 512;

  int frame_samples(double fs) const { return static_cast<int>(std::floor(frame_len_s * fs + 1e-9)); }
  int hop_samples(double fs) const {
    return static_cast<int>(std::floor((frame_len_s - overlap_s) * fs + 1e-9));
  }
  int num_bins() const { return n_dft / 2 + 1; }

  void validate(double fs) const {
    if (!(fs > 0.0)) throw ConfigError("sample rate must be positive");
    if (!(overlap_s > 0.0 && overlap_s < frame_len_s))
      throw ConfigError("frame config requires 0 < overlap_s < frame_len_s");
    if (frame_samples(fs) < 2) throw ConfigError("frame shorter than two samples");
    if (hop_samples(fs) < 1) throw ConfigError("hop shorter than one sample");
    if (n_dft < frame_samples(fs)) throw ConfigError("n_dft must be >= frame length in samples");
  }
};

struct Spectrogram {
  std::vector<double> frame_times_s;
  std::vector<double> freqs_hz;
  std::vector<std::vector<double>> power;  // frames x bins

  std::size_t num_frames() const { return power.size(); }
  std::size_t num_bins() const { return freqs_hz.size(); }
};

inline std::vector<double> make_window(Window kind, int length) {
  std::vector<double> w(static_cast<std::size_t>(length), 1.0);
  if (kind == Window::hamming && length > 1) {
    for (int n = 0; n < length; ++n)
      w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (length - 1));
  }
  return w;
}

inline int num_frames(std::size_t signal_len, double fs, const FrameConfig& cfg) {
  const auto frame = static_cast<std::size_t>(cfg.frame_samples(fs));
  if (signal_len < frame) return 0;
  return static_cast<int>((signal_len - frame) / cfg.hop_samples(fs)) + 1;
}

// One-sided periodogram |X(k)|^2 / N_frame for k = 0..n_dft/2.
inline Spectrogram stft_power(std::span<const double> x, double fs, const FrameConfig& cfg) {
  cfg.validate(fs);
  const int frame = cfg.frame_samples(fs);
  const int hop = cfg.hop_samples(fs);
  const int frames = num_frames(x.size(), fs, cfg);
  if (frames == 0) throw DataError("signal shorter than one frame");
  for (double v : x) {
    if (!std::isfinite(v)) throw DataError("non-finite sample in signal");
  }

  Spectrogram spec;
  const int bins = cfg.num_bins();
  spec.freqs_hz.resize(bins);
  for (int k = 0; k < bins; ++k) spec.freqs_hz[k] = k * fs / cfg.n_dft;

  const auto window = make_window(cfg.window, frame);
  Eigen::FFT<double> fft;
  std::vector<double> buf(static_cast<std::size_t>(cfg.n_dft), 0.0);
  std::vector<std::complex<double>> out;
  spec.power.reserve(frames);
  spec.frame_times_s.reserve(frames);
  for (int f = 0; f < frames; ++f) {
    const std::size_t start = static_cast<std::size_t>(f) * hop;
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int n = 0; n < frame; ++n) buf[n] = x[start + n] * window[n];
    fft.fwd(out, buf);
    std::vector<double> row(static_cast<std::size_t>(bins));
    for (int k = 0; k < bins; ++k) row[k] = std::norm(out[k]) / frame;
    spec.power.push_back(std::move(row));
    spec.frame_times_s.push_back((start + 0.5 * frame) / fs);
  }
  return spec;
}

// Spectral centroid of one frame; nullopt when the frame carries no power.
inline std::optional<double> spectral_centroid(std::span<const double> power,
                                               std::span<const double> freqs) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < power.size(); ++k) {
    num += freqs[k] * power[k];
    den += power[k];
  }
  if (!(den > 0.0)) return std::nullopt;
  return num / den;
}

// Shannon entropy (bits) of one frame's normalized power; optionally divided
// by log2 of the bin count to land in [0, 1].
inline std::optional<double> power_entropy(std::span<const double> power, bool normalized = false) {
  double total = 0.0;
  for (double p : power) total += p;
  if (!(total > 0.0)) return std::nullopt;
  double h = 0.0;
  for (double s : power) {
    const double p = s / total;
    if (p > 0.0) h -= p * std::log2(p);
  }
  if (normalized) h /= std::log2(static_cast<double>(power.size()));
  return h;
}

inline std::vector<double> instantaneous_frequency(const Spectrogram& spec) {
  std::vector<double> out;
  out.reserve(spec.num_frames());
  for (const auto& row : spec.power) {
    auto c = spectral_centroid(row, spec.freqs_hz);
    if (!c) throw DataError("zero-power frame: spectral centroid undefined");
    out.push_back(*c);
  }
  return out;
}

inline std::vector<double> spectral_entropy(const Spectrogram& spec, bool normalized = false) {
  std::vector<double> out;
  out.reserve(spec.num_frames());
  for (const auto& row : spec.power) {
    auto h = power_entropy(row, normalized);
    if (!h) throw DataError("zero-power frame: spectral entropy undefined");
    out.push_back(*h);
  }
  return out;
}

inline double hz_to_mel(double f) {
  if (!(f >= 0.0)) throw DataError("frequency must be non-negative");
  return 2595.0 * std::log10(1.0 + f / 700.0);
}

inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

inline double critical_bandwidth(double f) {
  if (!(f >= 0.0)) throw DataError("frequency must be non-negative");
  const double r = f / 1000.0;
  return 25.0 + 75.0 * std::pow(1.0 + 1.4 * r * r, 0.69);
}

inline std::vector<std::vector<double>> dct2_basis(std::size_t n) {
  std::vector<std::vector<double>> basis(n, std::vector<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
    for (std::size_t m = 0; m < n; ++m)
      basis[k][m] = scale * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * m + 1.0) / (2.0 * n));
  }
  return basis;
}

// Orthonormal DCT-II.
inline std::vector<double> dct2(std::span<const double> v) {
  const auto basis = dct2_basis(v.size());
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t k = 0; k < v.size(); ++k)
    for (std::size_t m = 0; m < v.size(); ++m) out[k] += basis[k][m] * v[m];
  return out;
}

struct MelFilterbank {
  int num_filters = 0;
  double fs = 0.0;
  int n_dft = 0;
  double f_min_hz = 0.0;
  double f_max_hz = 200.0;
  std::vector<int> edge_bins;                // num_filters + 2 rounded boundary bins
  std::vector<int> bin_centers;              // edge_bins[1..num_filters]
  std::vector<std::vector<double>> weights;  // filters x (n_dft/2 + 1)
  std::vector<std::vector<double>> dct_basis;  // orthonormal DCT-II rows, filters x filters
};

// Triangular filters evenly spaced in Mel over [0, f_max]; edges rounded to
// DFT bins, so filter m rises from the center bin of filter m-1.
inline MelFilterbank design_mel_filterbank(int num_filters, double fs, int n_dft, double f_max = 200.0) {
  if (num_filters < 1) throw ConfigError("num_filters must be >= 1");
  if (!(fs > 0.0) || n_dft < 2) throw ConfigError("invalid sample rate or DFT size");
  if (!(f_max > 0.0 && f_max <= fs / 2.0)) throw ConfigError("f_max must lie in (0, fs/2]");

  MelFilterbank fb;
  fb.num_filters = num_filters;
  fb.fs = fs;
  fb.n_dft = n_dft;
  fb.f_max_hz = f_max;
  const double mel_max = hz_to_mel(f_max);
  const int points = num_filters + 2;
  for (int j = 0; j < points; ++j) {
    const double hz = mel_to_hz(mel_max * j / (points - 1));
    fb.edge_bins.push_back(static_cast<int>(std::lround(hz * n_dft / fs)));
  }
  for (int j = 1; j < points; ++j) {
    if (fb.edge_bins[j] <= fb.edge_bins[j - 1]) {
      throw ConfigError("Mel filterbank collapses: " + std::to_string(points) +
                        " boundary points need more distinct DFT bins below f_max (raise n_dft)");
    }
  }
  const int bins = n_dft / 2 + 1;
  for (int m = 1; m <= num_filters; ++m) {
    const int lo = fb.edge_bins[m - 1];
    const int mid = fb.edge_bins[m];
    const int hi = fb.edge_bins[m + 1];
    std::vector<double> row(static_cast<std::size_t>(bins), 0.0);
    for (int k = lo; k <= mid; ++k) row[k] = static_cast<double>(k - lo) / (mid - lo);
    for (int k = mid; k <= hi; ++k) row[k] = static_cast<double>(hi - k) / (hi - mid);
    fb.bin_centers.push_back(mid);
    fb.weights.push_back(std::move(row));
  }
  fb.dct_basis = dct2_basis(static_cast<std::size_t>(num_filters));
  return fb;
}

// CSV rows "filter,bin,weight" for every non-zero weight.
inline std::string filterbank_csv(const MelFilterbank& fb) {
  std::string out = "filter,bin,freq_hz,weight\n";
  for (int m = 0; m < fb.num_filters; ++m) {
    for (std::size_t k = 0; k < fb.weights[m].size(); ++k) {
      const double w = fb.weights[m][k];
      if (w == 0.0) continue;
      out += std::to_string(m) + ',' + std::to_string(k) + ',' +
             std::to_string(k * fb.fs / fb.n_dft) + ',' + std::to_string(w) + '\n';
    }
  }
  return out;
}

inline constexpr double kLogFloor = 1e-12;

// Cepstral coefficients c_1..c_n of one periodogram frame (c_0 dropped).
inline std::vector<double> mfcc_frame(std::span<const double> power, const MelFilterbank& fb,
                                      int n_coeffs) {
  std::vector<double> log_energy(static_cast<std::size_t>(fb.num_filters));
  for (int m = 0; m < fb.num_filters; ++m) {
    double e = 0.0;
    for (int k = fb.edge_bins[m]; k <= fb.edge_bins[m + 2]; ++k) e += fb.weights[m][k] * power[k];
    log_energy[m] = std::log(std::max(e, kLogFloor));
  }
  std::vector<double> c(static_cast<std::size_t>(n_coeffs), 0.0);
  for (int k = 1; k <= n_coeffs; ++k)
    for (int m = 0; m < fb.num_filters; ++m) c[k - 1] += fb.dct_basis[k][m] * log_energy[m];
  return c;
}

inline std::vector<std::vector<double>> mfcc_from_spectrogram(const Spectrogram& spec,
                                                              const MelFilterbank& fb,
                                                              int n_coeffs = 11) {
  if (n_coeffs < 1 || n_coeffs >= fb.num_filters)
    throw ConfigError("n_coeffs must lie in [1, num_filters - 1]");
  if (spec.num_bins() != static_cast<std::size_t>(fb.n_dft / 2 + 1))
    throw ConfigError("filterbank DFT size does not match the spectrogram");
  std::vector<std::vector<double>> out;
  out.reserve(spec.num_frames());
  for (const auto& row : spec.power) out.push_back(mfcc_frame(row, fb, n_coeffs));
  return out;
}

inline std::vector<std::vector<double>> mfcc(std::span<const double> x, double fs, const FrameConfig& cfg,
                                             const MelFilterbank& fb, int n_coeffs = 11) {
  if (fb.n_dft != cfg.n_dft || fb.fs != fs)
    throw ConfigError("filterbank was designed for a different sample rate or DFT size");
  return mfcc_from_spectrogram(stft_power(x, fs, cfg), fb, n_coeffs);
}

}  // namespace eegerr::dsp
