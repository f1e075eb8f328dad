#pragma once

// key=value run configuration. Blank lines and '#' comments are ignored;
// unknown keys, repeated keys and unparsable values are errors that name the
// offending key.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "eegerr/common.hpp"
#include "eegerr/experiment.hpp"
#include "eegerr/featurize.hpp"
#include "eegerr/text.hpp"

namespace eegerr {

using Json = nlohmann::ordered_json;

struct GradcheckConfig {
  int instances = 50;
  double eps = 1e-5;
  int steps = 8;
  int hidden_dim = 5;
  double tolerance = 1e-4;
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  FeatureConfig features;
  ExperimentConfig experiment;
  std::string sync_channel;  // empty: use sync_offset_s as given
  double sync_offset_s = 0.0;
  GradcheckConfig gradcheck;

  std::uint64_t require_seed() const {
    if (!seed) throw ConfigError("missing required key 'seed' (set it in the config or pass --seed)");
    return *seed;
  }

  void validate() const {
    if (features.frame.n_dft < 2) throw ConfigError("n_dft must be >= 2");
    if (features.num_filters <= kNumCepstral) throw ConfigError("num_filters must be > 11");
    if (!(features.f_max_hz > 0.0)) throw ConfigError("f_max_hz must be positive");
    if (!(sync_offset_s >= 0.0)) throw ConfigError("sync_offset_s must be non-negative");
    if (gradcheck.instances < 1 || gradcheck.steps < 1 || gradcheck.hidden_dim < 1)
      throw ConfigError("gradcheck_instances, gradcheck_steps and gradcheck_hidden must be >= 1");
    if (!(gradcheck.eps > 0.0) || !(gradcheck.tolerance > 0.0))
      throw ConfigError("gradcheck_eps and gradcheck_tolerance must be positive");
    experiment.validate();
  }
};

namespace detail {

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

inline std::vector<KeyValue> parse_key_values(std::string_view content) {
  std::vector<KeyValue> out;
  std::map<std::string, std::size_t> seen;
  const auto rows = text::lines(content);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto row = text::trim(rows[i]);
    if (row.empty() || row.front() == '#') continue;
    const auto eq = row.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(i + 1) + ": expected key=value, got '" + std::string(row) + "'");
    KeyValue kv{std::string(text::trim(row.substr(0, eq))), std::string(text::trim(row.substr(eq + 1))), i + 1};
    if (kv.key.empty()) throw ConfigError("line " + std::to_string(i + 1) + ": empty key");
    if (auto [it, fresh] = seen.emplace(kv.key, kv.line); !fresh)
      throw ConfigError("key '" + kv.key + "' repeated on lines " + std::to_string(it->second) + " and " +
                        std::to_string(kv.line));
    out.push_back(std::move(kv));
  }
  return out;
}

inline ConfigError mismatch(std::string_view key, std::string_view expected, std::string_view got) {
  return ConfigError("config key '" + std::string(key) + "': expected " + std::string(expected) + ", got '" +
                     std::string(got) + "'");
}

inline double as_double(std::string_view key, std::string_view v) {
  const auto d = text::parse_double(v);
  if (!d || !std::isfinite(*d)) throw mismatch(key, "a number", v);
  return *d;
}

inline int as_int(std::string_view key, std::string_view v) {
  const auto i = text::parse_int(v);
  if (!i || *i < std::numeric_limits<int>::min() || *i > std::numeric_limits<int>::max())
    throw mismatch(key, "an integer", v);
  return static_cast<int>(*i);
}

inline std::uint64_t as_u64(std::string_view key, std::string_view v) {
  const auto u = text::parse_u64(v);
  if (!u) throw mismatch(key, "an unsigned 64-bit integer", v);
  return *u;
}

inline bool as_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw mismatch(key, "true or false", v);
}

using Setter = std::function<void(std::string_view key, std::string_view value)>;

inline void apply_settings(const std::vector<KeyValue>& kvs, const std::map<std::string, Setter, std::less<>>& setters) {
  for (const auto& kv : kvs) {
    const auto it = setters.find(kv.key);
    if (it == setters.end())
      throw ConfigError("unknown config key '" + kv.key + "' on line " + std::to_string(kv.line));
    it->second(kv.key, kv.value);
  }
}

}  // namespace detail

inline dsp::Window parse_window(std::string_view s) {
  if (s == "hamming") return dsp::Window::hamming;
  if (s == "rectangular") return dsp::Window::rectangular;
  throw ConfigError("config key 'window': expected hamming or rectangular, got '" + std::string(s) + "'");
}

inline std::string_view to_string(dsp::Window w) { return w == dsp::Window::hamming ? "hamming" : "rectangular"; }
inline std::string_view to_string(Reducer r) { return r == Reducer::mean ? "mean" : "median"; }

inline constexpr std::string_view kReadout = "final_state";

inline RunConfig parse_run_config(std::string_view content, RunConfig cfg = {}) {
  using namespace detail;
  auto& f = cfg.features;
  auto& e = cfg.experiment;
  auto& t = cfg.experiment.train;
  auto& g = cfg.gradcheck;
  const std::map<std::string, Setter, std::less<>> setters = {
      {"seed", [&](auto k, auto v) { cfg.seed = as_u64(k, v); }},
      {"frame_len_s", [&](auto k, auto v) { f.frame.frame_len_s = as_double(k, v); }},
      {"overlap_s", [&](auto k, auto v) { f.frame.overlap_s = as_double(k, v); }},
      {"window", [&](auto, auto v) { f.frame.window = parse_window(v); }},
      {"n_dft", [&](auto k, auto v) { f.frame.n_dft = as_int(k, v); }},
      {"num_filters", [&](auto k, auto v) { f.num_filters = as_int(k, v); }},
      {"f_max_hz", [&](auto k, auto v) { f.f_max_hz = as_double(k, v); }},
      {"entropy_normalized", [&](auto k, auto v) { f.entropy_normalized = as_bool(k, v); }},
      {"reducer",
       [&](auto k, auto v) {
         if (v == "mean") f.reducer = Reducer::mean;
         else if (v == "median") f.reducer = Reducer::median;
         else throw mismatch(k, "mean or median", v);
       }},
      {"architecture", [&](auto, auto v) { e.architecture = nn::parse_architecture(v); }},
      {"hidden_dim", [&](auto k, auto v) { e.hidden_dim = as_int(k, v); }},
      {"repetitions", [&](auto k, auto v) { e.repetitions = as_int(k, v); }},
      {"train_fraction", [&](auto k, auto v) { e.train_fraction = as_double(k, v); }},
      {"normalize", [&](auto k, auto v) { e.normalize = as_bool(k, v); }},
      {"readout",
       [&](auto k, auto v) {
         if (v != kReadout) throw mismatch(k, kReadout, v);
       }},
      {"epochs", [&](auto k, auto v) { t.epochs = as_int(k, v); }},
      {"batch_size", [&](auto k, auto v) { t.batch_size = as_int(k, v); }},
      {"learning_rate", [&](auto k, auto v) { t.learning_rate = as_double(k, v); }},
      {"beta1", [&](auto k, auto v) { t.beta1 = as_double(k, v); }},
      {"beta2", [&](auto k, auto v) { t.beta2 = as_double(k, v); }},
      {"adam_eps", [&](auto k, auto v) { t.adam_eps = as_double(k, v); }},
      {"sync_channel", [&](auto, auto v) { cfg.sync_channel = std::string(v); }},
      {"sync_offset_s", [&](auto k, auto v) { cfg.sync_offset_s = as_double(k, v); }},
      {"gradcheck_instances", [&](auto k, auto v) { g.instances = as_int(k, v); }},
      {"gradcheck_eps", [&](auto k, auto v) { g.eps = as_double(k, v); }},
      {"gradcheck_steps", [&](auto k, auto v) { g.steps = as_int(k, v); }},
      {"gradcheck_hidden", [&](auto k, auto v) { g.hidden_dim = as_int(k, v); }},
      {"gradcheck_tolerance", [&](auto k, auto v) { g.tolerance = as_double(k, v); }},
  };
  apply_settings(parse_key_values(content), setters);
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_run_config(read_text_file(path));
}

// Every effective value, keyed as in the config file.
inline Json config_echo(const RunConfig& cfg) {
  const auto& f = cfg.features;
  const auto& e = cfg.experiment;
  const auto& t = cfg.experiment.train;
  Json j;
  j["seed"] = cfg.seed ? Json(*cfg.seed) : Json(nullptr);
  j["frame_len_s"] = f.frame.frame_len_s;
  j["overlap_s"] = f.frame.overlap_s;
  j["window"] = to_string(f.frame.window);
  j["n_dft"] = f.frame.n_dft;
  j["num_filters"] = f.num_filters;
  j["f_max_hz"] = f.f_max_hz;
  j["entropy_normalized"] = f.entropy_normalized;
  j["reducer"] = to_string(f.reducer);
  j["architecture"] = nn::to_string(e.architecture);
  j["hidden_dim"] = e.hidden_dim;
  j["repetitions"] = e.repetitions;
  j["train_fraction"] = e.train_fraction;
  j["normalize"] = e.normalize;
  j["readout"] = kReadout;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["learning_rate"] = t.learning_rate;
  j["beta1"] = t.beta1;
  j["beta2"] = t.beta2;
  j["adam_eps"] = t.adam_eps;
  j["sync_channel"] = cfg.sync_channel;
  j["sync_offset_s"] = cfg.sync_offset_s;
  j["gradcheck_instances"] = cfg.gradcheck.instances;
  j["gradcheck_eps"] = cfg.gradcheck.eps;
  j["gradcheck_steps"] = cfg.gradcheck.steps;
  j["gradcheck_hidden"] = cfg.gradcheck.hidden_dim;
  j["gradcheck_tolerance"] = cfg.gradcheck.tolerance;
  return j;
}

// ---------------------------------------------------------------------------
// Synthetic-spec files use the SynthSpec field names as keys.

inline SynthSpec parse_synth_spec(std::string_view content, SynthSpec spec = {}, bool* has_seed = nullptr) {
  using namespace detail;
  bool seeded = false;
  const std::map<std::string, Setter, std::less<>> setters = {
      {"n_channels", [&](auto k, auto v) { spec.n_channels = as_int(k, v); }},
      {"duration_s", [&](auto k, auto v) { spec.duration_s = as_double(k, v); }},
      {"error_fraction", [&](auto k, auto v) { spec.error_fraction = as_double(k, v); }},
      {"class_separation", [&](auto k, auto v) { spec.class_separation = as_double(k, v); }},
      {"seed",
       [&](auto k, auto v) {
         spec.seed = as_u64(k, v);
         seeded = true;
       }},
      {"signature_seed", [&](auto k, auto v) { spec.signature_seed = as_u64(k, v); }},
      {"sample_rate_hz", [&](auto k, auto v) { spec.sample_rate_hz = as_double(k, v); }},
      {"subject_id", [&](auto, auto v) { spec.subject_id = std::string(v); }},
  };
  apply_settings(parse_key_values(content), setters);
  if (has_seed) *has_seed = seeded;
  return spec;
}

inline Json synth_spec_echo(const SynthSpec& s) {
  Json j;
  j["n_channels"] = s.n_channels;
  j["duration_s"] = s.duration_s;
  j["error_fraction"] = s.error_fraction;
  j["class_separation"] = s.class_separation;
  j["seed"] = s.seed;
  j["signature_seed"] = s.signature_seed;
  j["sample_rate_hz"] = s.sample_rate_hz;
  j["subject_id"] = s.subject_id;
  return j;
}

}  // namespace eegerr
