#pragma once

// JSON checkpoints and experiment reports, plus the plain-text summary table.
// Matrices are stored column-major (Eigen's native layout) with their shape.

#include <cstdio>
#include <map>
#include <string>

#include "json.hpp"

#include "eegerr/config.hpp"
#include "eegerr/experiment.hpp"
#include "eegerr/featurize.hpp"
#include "eegerr/nn.hpp"

namespace eegerr {

inline constexpr int kCheckpointFormat = 1;

struct Checkpoint {
  nn::Architecture architecture = nn::Architecture::bilstm;
  nn::Model model;
  Normalizer normalizer = Normalizer::identity();
  std::uint64_t seed = 0;
  Json config;  // resolved config echo; informational
};

namespace detail {

inline Json row_json(const FeatureRow& r) { return Json(std::vector<double>(r.begin(), r.end())); }

inline FeatureRow row_from_json(const Json& j, std::string_view what) {
  if (!j.is_array() || j.size() != kNumFeatures)
    throw DataError("checkpoint: " + std::string(what) + " must hold 13 numbers");
  FeatureRow r{};
  for (int i = 0; i < kNumFeatures; ++i) r[i] = j.at(i).get<double>();
  return r;
}

template <typename T>
T field(const Json& j, std::string_view key) {
  const auto it = j.find(key);
  if (it == j.end()) throw DataError("checkpoint: missing field '" + std::string(key) + "'");
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError("checkpoint: field '" + std::string(key) + "' has the wrong type");
  }
}

}  // namespace detail

inline Json checkpoint_json(const Checkpoint& c) {
  const auto& m = c.model;
  Json j;
  j["format_version"] = kCheckpointFormat;
  j["tool_version"] = kToolVersion;
  j["architecture"] = nn::to_string(c.architecture);
  j["cell"] = nn::to_string(m.forward_cell.kind);
  j["bidirectional"] = m.bidirectional();
  j["readout"] = kReadout;
  j["input_dim"] = m.input_dim();
  j["hidden_dim"] = m.hidden_dim();
  j["seed"] = c.seed;
  j["normalizer"] = {{"means", detail::row_json(c.normalizer.means)},
                     {"stds", detail::row_json(c.normalizer.stds)}};
  Json params = Json::array();
  nn::for_each_tensor(m, [&](const std::string& name, const auto& t) {
    const auto v = nn::flat(t);
    params.push_back({{"name", name},
                      {"shape", {t.rows(), t.cols()}},
                      {"values", std::vector<double>(v.begin(), v.end())}});
  });
  j["params"] = std::move(params);
  j["config"] = c.config;
  return j;
}

inline Checkpoint checkpoint_from_json(const Json& j) {
  using detail::field;
  if (!j.is_object()) throw DataError("checkpoint: not a JSON object");
  const int version = field<int>(j, "format_version");
  if (version != kCheckpointFormat)
    throw DataError("checkpoint: unsupported format_version " + std::to_string(version));
  Checkpoint c;
  try {
    c.architecture = nn::parse_architecture(field<std::string>(j, "architecture"));
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  const int input_dim = field<int>(j, "input_dim");
  const int hidden_dim = field<int>(j, "hidden_dim");
  if (input_dim < 1 || hidden_dim < 1) throw DataError("checkpoint: dimensions must be positive");
  if (field<bool>(j, "bidirectional") != nn::is_bidirectional(c.architecture) ||
      field<std::string>(j, "cell") != nn::to_string(nn::cell_kind(c.architecture)))
    throw DataError("checkpoint: cell/bidirectional flags disagree with the architecture");
  if (field<std::string>(j, "readout") != kReadout) throw DataError("checkpoint: unsupported readout");
  c.seed = field<std::uint64_t>(j, "seed");
  const auto& norm = j.at("normalizer");
  c.normalizer.means = detail::row_from_json(norm.at("means"), "normalizer.means");
  c.normalizer.stds = detail::row_from_json(norm.at("stds"), "normalizer.stds");
  for (double s : c.normalizer.stds)
    if (!(s > 0.0)) throw DataError("checkpoint: normalizer std must be positive");

  // Shapes come from the architecture; the file must match them exactly.
  c.model = nn::init_model(c.architecture, hidden_dim, 0, input_dim);
  const auto& params = j.at("params");
  if (!params.is_array()) throw DataError("checkpoint: params must be an array");
  std::size_t next = 0;
  nn::for_each_tensor(c.model, [&](const std::string& name, auto& t) {
    if (next >= params.size()) throw DataError("checkpoint: missing tensor " + name);
    const auto& p = params.at(next++);
    if (field<std::string>(p, "name") != name)
      throw DataError("checkpoint: expected tensor " + name + ", found " + field<std::string>(p, "name"));
    const auto shape = field<std::vector<long>>(p, "shape");
    if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols())
      throw DataError("checkpoint: tensor " + name + " has the wrong shape");
    const auto values = field<std::vector<double>>(p, "values");
    if (values.size() != static_cast<std::size_t>(t.size()))
      throw DataError("checkpoint: tensor " + name + " has the wrong number of values");
    auto dst = nn::flat(t);
    std::copy(values.begin(), values.end(), dst.begin());
  });
  if (next != params.size()) throw DataError("checkpoint: unexpected extra tensors");
  if (!nn::all_finite(c.model)) throw DataError("checkpoint: non-finite parameter");
  if (j.contains("config")) c.config = j.at("config");
  return c;
}

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

inline Checkpoint parse_checkpoint(std::string_view content) {
  Json j;
  try {
    j = Json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  return checkpoint_from_json(j);
}

// ---------------------------------------------------------------------------

inline Json metrics_json(const MetricsReport& m) {
  return {{"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f_score", m.f_score},
          {"precision_undefined", m.precision_undefined},
          {"recall_undefined", m.recall_undefined},
          {"f_score_undefined", m.f_score_undefined}};
}

inline Json confusion_json(const ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
}

inline Json summary_json(const MetricSummary& s) { return {{"mean", s.mean}, {"std", s.std}}; }

inline Json report_body(const ExperimentReport& r) {
  Json j;
  j["mode"] = to_string(r.config.mode);
  j["architecture"] = nn::to_string(r.config.architecture);
  j["master_seed"] = r.config.seed;
  Json reps = Json::array();
  for (const auto& rep : r.repetitions) {
    Json e;
    e["index"] = rep.index;
    e["seeds"] = {{"undersample_train", rep.seeds.undersample_train},
                  {"undersample_test", rep.seeds.undersample_test},
                  {"split", rep.seeds.split},
                  {"init", rep.seeds.init},
                  {"shuffle", rep.seeds.shuffle}};
    e["confusion"] = confusion_json(rep.confusion);
    e["metrics"] = metrics_json(rep.metrics);
    e["loss_history"] = rep.loss_history;
    e["train_size"] = rep.train_ids.size();
    e["test_ids"] = rep.test_ids;
    reps.push_back(std::move(e));
  }
  j["repetitions"] = std::move(reps);
  j["aggregate"] = {{"accuracy", summary_json(r.aggregate.accuracy)},
                    {"precision", summary_json(r.aggregate.precision)},
                    {"recall", summary_json(r.aggregate.recall)},
                    {"f_score", summary_json(r.aggregate.f_score)}};
  return j;
}

inline Json report_json(const ExperimentReport& r, const Json& config) {
  Json j;
  j["tool_version"] = kToolVersion;
  j["config"] = config;
  j.update(report_body(r));
  return j;
}

inline Json comparison_json(const std::map<nn::Architecture, ExperimentReport>& reports, const Json& config) {
  Json j;
  j["tool_version"] = kToolVersion;
  j["config"] = config;
  Json by_arch;
  for (auto arch : kAllArchitectures) {
    if (auto it = reports.find(arch); it != reports.end()) by_arch[std::string(nn::to_string(arch))] = report_body(it->second);
  }
  j["reports"] = std::move(by_arch);
  return j;
}

// ---------------------------------------------------------------------------

namespace detail {

inline std::string summary_line(std::string_view label, const Aggregate& a) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f\n", std::string(label).c_str(),
                a.accuracy.mean, a.accuracy.std, a.precision.mean, a.precision.std, a.recall.mean, a.recall.std,
                a.f_score.mean, a.f_score.std);
  return buf;
}

inline constexpr std::string_view kSummaryHeader =
    "arch      acc_mean  acc_std   p_mean    p_std    r_mean    r_std    f_mean    f_std\n";

}  // namespace detail

inline std::string summary_table(const ExperimentReport& r) {
  std::string out(kToolVersion);
  out += "  mode=" + std::string(to_string(r.config.mode)) + "  repetitions=" + std::to_string(r.repetitions.size()) +
         "  seed=" + std::to_string(r.config.seed) + "\n";
  out += detail::kSummaryHeader;
  out += detail::summary_line(nn::to_string(r.config.architecture), r.aggregate);
  return out;
}

inline std::string summary_table(const std::map<nn::Architecture, ExperimentReport>& reports) {
  std::string out(kToolVersion);
  if (!reports.empty()) {
    const auto& any = reports.begin()->second;
    out += "  mode=" + std::string(to_string(any.config.mode)) + "  repetitions=" +
           std::to_string(any.repetitions.size()) + "  seed=" + std::to_string(any.config.seed);
  }
  out += "\n";
  out += detail::kSummaryHeader;
  for (auto arch : kAllArchitectures)
    if (auto it = reports.find(arch); it != reports.end())
      out += detail::summary_line(nn::to_string(arch), it->second.aggregate);
  return out;
}

}  // namespace eegerr
