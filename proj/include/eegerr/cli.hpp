#pragma once

// Command-line front end. run_command() parses argv (without the program
// name), runs one subcommand and maps errors onto exit codes:
// 0 ok, 1 failed check, 2 config error, 3 data error, 4 numerical divergence.

#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "eegerr/config.hpp"
#include "eegerr/eeg_io.hpp"
#include "eegerr/experiment.hpp"
#include "eegerr/featurize.hpp"
#include "eegerr/serialize.hpp"

namespace eegerr::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kConfigError = 2, kDataError = 3, kDivergence = 4 };

struct Options {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::optional<std::string> arch;
  std::optional<double> train_fraction;
  std::optional<int> repetitions;
  std::optional<int> epochs;

  std::string spec;
  std::string eeg, ann, features;
  std::string train_eeg, train_ann, train_features;
  std::string test_eeg, test_ann, test_features;
  double fs = 2500.0;

  std::string out, out_eeg, out_ann, out_summary;
};

namespace detail {

inline void require_file(const std::string& path, std::string_view flag) {
  if (!std::filesystem::is_regular_file(path))
    throw ConfigError(std::string(flag) + ": file not found: " + path);
}

inline void require_flag(const std::string& value, std::string_view flag) {
  if (value.empty()) throw ConfigError("missing required option " + std::string(flag));
}

inline RunConfig resolve(const Options& o) {
  RunConfig cfg;
  if (!o.config.empty()) {
    require_file(o.config, "--config");
    cfg = load_config(o.config);
  }
  if (o.seed) cfg.seed = o.seed;
  if (o.arch) cfg.experiment.architecture = nn::parse_architecture(*o.arch);
  if (o.train_fraction) cfg.experiment.train_fraction = *o.train_fraction;
  if (o.repetitions) cfg.experiment.repetitions = *o.repetitions;
  if (o.epochs) cfg.experiment.train.epochs = *o.epochs;
  if (cfg.seed) cfg.experiment.seed = *cfg.seed;
  cfg.validate();
  return cfg;
}

// A dataset is either a feature CSV or an EEGC recording plus annotations.
inline std::vector<TrialFeatures> load_dataset(const RunConfig& cfg, const std::string& eeg, const std::string& ann,
                                               const std::string& features, std::string_view prefix) {
  const std::string p(prefix);
  if (!features.empty()) {
    if (!eeg.empty() || !ann.empty())
      throw ConfigError("--" + p + "features cannot be combined with --" + p + "eeg/--" + p + "ann");
    require_file(features, "--" + p + "features");
    return parse_features(read_text_file(features));
  }
  if (eeg.empty() || ann.empty())
    throw ConfigError("need --" + p + "features or both --" + p + "eeg and --" + p + "ann");
  require_file(eeg, "--" + p + "eeg");
  require_file(ann, "--" + p + "ann");
  auto rec = load_recording(eeg);
  const auto track = load_annotations(ann);
  double offset = cfg.sync_offset_s;
  if (!cfg.sync_channel.empty()) {
    const auto it = std::find(rec.channel_names.begin(), rec.channel_names.end(), cfg.sync_channel);
    if (it == rec.channel_names.end()) throw DataError("sync channel not in recording: " + cfg.sync_channel);
    offset = find_sync_offset(rec.samples[static_cast<std::size_t>(it - rec.channel_names.begin())],
                              rec.sample_rate_hz);
    rec = drop_channel(std::move(rec), cfg.sync_channel);
  }
  return featurize_recording(rec, track, offset, cfg.features);
}

inline std::string summary_path(const Options& o) {
  if (!o.out_summary.empty()) return o.out_summary;
  return std::filesystem::path(o.out).replace_extension(".txt").string();
}

inline long count_errors(const std::vector<TrialFeatures>& ds) {
  return std::count_if(ds.begin(), ds.end(), [](const auto& t) { return t.label == TrialLabel::err; });
}

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------

inline int cmd_synth(const Options& o, std::ostream& out) {
  require_flag(o.spec, "--spec");
  require_flag(o.out_eeg, "--out-eeg");
  require_flag(o.out_ann, "--out-ann");
  require_file(o.spec, "--spec");
  bool has_seed = false;
  auto spec = parse_synth_spec(read_text_file(o.spec), {}, &has_seed);
  if (o.seed) {
    spec.seed = *o.seed;
    has_seed = true;
  }
  if (!has_seed) throw ConfigError("missing required key 'seed' (set it in the spec or pass --seed)");
  spec.validate();
  const auto [rec, track] = synth_dataset(spec);
  save_recording(o.out_eeg, rec);
  save_annotations(o.out_ann, track);
  out << "synth: " << rec.num_channels() << " channels x " << rec.num_samples() << " samples, "
      << track.events.size() << " events -> " << o.out_eeg << ", " << o.out_ann << "\n";
  return kOk;
}

inline int cmd_featurize(const Options& o, std::ostream& out) {
  require_flag(o.out, "--out");
  const auto cfg = resolve(o);
  if (!o.features.empty()) throw ConfigError("featurize reads --eeg and --ann, not --features");
  const auto ds = load_dataset(cfg, o.eeg, o.ann, "", "");
  write_file_atomic(o.out, format_features(ds));
  out << "featurize: " << ds.size() << " trials (" << count_errors(ds) << " ERR) x "
      << (ds.empty() ? 0 : ds.front().matrix.size()) << " channels -> " << o.out << "\n";
  return kOk;
}

inline int cmd_train(const Options& o, std::ostream& out) {
  require_flag(o.out, "--out");
  const auto cfg = resolve(o);
  const auto seed = cfg.require_seed();
  const auto ds = load_dataset(cfg, o.eeg, o.ann, o.features, "");
  const auto& ecfg = cfg.experiment;
  const auto seeds = repetition_seeds(seed, 0);
  const auto balanced = undersample(ds, seeds.undersample_train);
  const Normalizer norm = ecfg.normalize ? fit_normalizer(balanced) : Normalizer::identity();
  std::vector<nn::SeqSample> samples;
  for (const auto& t : balanced) samples.push_back(to_sample(apply_normalizer(norm, t)));
  auto tcfg = ecfg.train;
  tcfg.seed = seeds.shuffle;
  auto trained = nn::train(nn::init_model(ecfg.architecture, ecfg.hidden_dim, seeds.init, kNumFeatures), samples, tcfg);
  const auto cm = evaluate(trained.model, samples);
  Checkpoint ck{ecfg.architecture, trained.model, norm, seed, config_echo(cfg)};
  write_file_atomic(o.out, dump_json(checkpoint_json(ck)));
  out << "train: " << nn::to_string(ecfg.architecture) << " on " << balanced.size() << " balanced trials, final loss "
      << fixed(trained.history.back()) << ", training accuracy " << fixed(metrics(cm).accuracy) << " -> " << o.out
      << "\n";
  return kOk;
}

inline int cmd_intra(const Options& o, std::ostream& out) {
  require_flag(o.out, "--out");
  const auto cfg = resolve(o);
  cfg.require_seed();
  const auto ds = load_dataset(cfg, o.eeg, o.ann, o.features, "");
  const auto report = run_intra(ds, cfg.experiment);
  write_file_atomic(o.out, dump_json(report_json(report, config_echo(cfg))));
  const auto table = summary_path(o);
  write_file_atomic(table, summary_table(report));
  out << "intra: " << nn::to_string(report.config.architecture) << " accuracy "
      << fixed(report.aggregate.accuracy.mean) << " +/- " << fixed(report.aggregate.accuracy.std) << " over "
      << report.repetitions.size() << " repetitions -> " << o.out << ", " << table << "\n";
  return kOk;
}

inline int cmd_inter(const Options& o, std::ostream& out) {
  require_flag(o.out, "--out");
  const auto cfg = resolve(o);
  cfg.require_seed();
  const auto train_ds = load_dataset(cfg, o.train_eeg, o.train_ann, o.train_features, "train-");
  const auto test_ds = load_dataset(cfg, o.test_eeg, o.test_ann, o.test_features, "test-");
  const auto report = run_inter(train_ds, test_ds, cfg.experiment);
  write_file_atomic(o.out, dump_json(report_json(report, config_echo(cfg))));
  const auto table = summary_path(o);
  write_file_atomic(table, summary_table(report));
  out << "inter: " << nn::to_string(report.config.architecture) << " accuracy "
      << fixed(report.aggregate.accuracy.mean) << " +/- " << fixed(report.aggregate.accuracy.std) << " over "
      << report.repetitions.size() << " repetitions -> " << o.out << ", " << table << "\n";
  return kOk;
}

// Intra mode by default; giving a test dataset switches to inter mode with the
// main dataset as the training subject.
inline int cmd_compare(const Options& o, std::ostream& out) {
  require_flag(o.out, "--out");
  auto cfg = resolve(o);
  cfg.require_seed();
  const bool inter = !o.test_features.empty() || !o.test_eeg.empty() || !o.test_ann.empty();
  const auto ds = load_dataset(cfg, o.eeg, o.ann, o.features, "");
  std::vector<TrialFeatures> test_ds;
  if (inter) test_ds = load_dataset(cfg, o.test_eeg, o.test_ann, o.test_features, "test-");
  cfg.experiment.mode = inter ? Mode::inter : Mode::intra;
  const auto reports = compare_architectures(ds, cfg.experiment, test_ds);
  write_file_atomic(o.out, dump_json(comparison_json(reports, config_echo(cfg))));
  const auto table = summary_path(o);
  write_file_atomic(table, summary_table(reports));
  out << "compare (" << to_string(cfg.experiment.mode) << "):";
  for (const auto& [arch, rep] : reports) out << " " << nn::to_string(arch) << "=" << fixed(rep.aggregate.accuracy.mean);
  out << " -> " << o.out << ", " << table << "\n";
  return kOk;
}

struct GradcheckResult {
  nn::Architecture architecture;
  std::vector<double> errors;
  double worst = 0.0;
};

// Random models and random sequences; labels alternate between instances.
inline std::vector<GradcheckResult> run_gradchecks(const GradcheckConfig& g, std::uint64_t seed) {
  std::vector<GradcheckResult> out;
  for (auto arch : kAllArchitectures) {
    GradcheckResult r{arch, {}, 0.0};
    for (int i = 0; i < g.instances; ++i) {
      const auto idx = static_cast<std::uint64_t>(i);
      const auto model = nn::init_model(arch, g.hidden_dim, derive_seed(seed, 0x6C0 + static_cast<int>(arch), idx),
                                        kNumFeatures);
      Rng rng(derive_seed(seed, 0x6D0, idx));
      nn::SeqSample s;
      s.sequence.resize(g.steps, kNumFeatures);
      for (auto& v : nn::flat(s.sequence)) v = rng.normal();
      s.label = i % 2;
      const double err = nn::grad_check(model, s, g.eps);
      r.errors.push_back(err);
      r.worst = std::max(r.worst, err);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline int cmd_gradcheck(const Options& o, std::ostream& out) {
  require_flag(o.out, "--out");
  const auto cfg = resolve(o);
  const auto seed = cfg.require_seed();
  const auto results = run_gradchecks(cfg.gradcheck, seed);
  Json j;
  j["tool_version"] = kToolVersion;
  j["config"] = config_echo(cfg);
  bool pass = true;
  Json by_arch;
  for (const auto& r : results) {
    const bool ok = r.worst < cfg.gradcheck.tolerance;
    pass = pass && ok;
    by_arch[std::string(nn::to_string(r.architecture))] = {
        {"max_relative_error", r.worst}, {"pass", ok}, {"errors", r.errors}};
  }
  j["results"] = std::move(by_arch);
  j["pass"] = pass;
  write_file_atomic(o.out, dump_json(j));
  out << "gradcheck:";
  for (const auto& r : results) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " %s=%.3g", std::string(nn::to_string(r.architecture)).c_str(), r.worst);
    out << buf;
  }
  out << " (tolerance " << cfg.gradcheck.tolerance << ", " << (pass ? "pass" : "FAIL") << ") -> " << o.out << "\n";
  return pass ? kOk : kCheckFailed;
}

inline int cmd_inspect_filterbank(const Options& o, std::ostream& out) {
  require_flag(o.out, "--out");
  const auto cfg = resolve(o);
  const auto fb = cfg.features.filterbank(o.fs);
  write_file_atomic(o.out, dsp::filterbank_csv(fb));
  out << "inspect-filterbank: " << fb.num_filters << " filters over " << fb.f_min_hz << "-" << fb.f_max_hz
      << " Hz, n_dft " << fb.n_dft << ", edge bins";
  for (auto b : fb.edge_bins) out << " " << b;
  out << " -> " << o.out << "\n";
  return kOk;
}

}  // namespace detail

inline int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"EEG error-event detection: synthesis, features, recurrent classifiers, evaluation", "eegerr"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Master seed (required for anything random)");
    sub->add_option("--config", o.config, "key=value config file");
  };
  auto experiment_flags = [&](CLI::App* sub) {
    sub->add_option("--arch", o.arch, "bilstm|lstm|gru");
    sub->add_option("--train-fraction", o.train_fraction, "Training share of each balanced class");
    sub->add_option("--repetitions", o.repetitions, "Number of repetitions");
    sub->add_option("--epochs", o.epochs, "Training epochs");
  };
  auto dataset = [&](CLI::App* sub, const std::string& p, std::string& eeg, std::string& ann, std::string& feats) {
    sub->add_option("--" + p + "eeg", eeg, "EEGC recording");
    sub->add_option("--" + p + "ann", ann, "Annotation CSV");
    sub->add_option("--" + p + "features", feats, "Feature CSV (instead of recording + annotations)");
  };
  auto outputs = [&](CLI::App* sub, bool summary) {
    sub->add_option("--out", o.out, "Output file");
    if (summary) sub->add_option("--out-summary", o.out_summary, "Summary table (default: --out with .txt)");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic recording and annotation track");
  synth->add_option("--spec", o.spec, "Synthetic-spec file (SynthSpec fields as key=value)");
  synth->add_option("--seed", o.seed, "Overrides the spec's seed");
  synth->add_option("--out-eeg", o.out_eeg, "EEGC output");
  synth->add_option("--out-ann", o.out_ann, "Annotation CSV output");

  auto* featurize = app.add_subcommand("featurize", "Segment and featurize a recording into a feature CSV");
  common(featurize);
  dataset(featurize, "", o.eeg, o.ann, o.features);
  outputs(featurize, false);

  auto* train = app.add_subcommand("train", "Train one model on a balanced dataset and save a checkpoint");
  common(train);
  experiment_flags(train);
  dataset(train, "", o.eeg, o.ann, o.features);
  outputs(train, false);

  auto* intra = app.add_subcommand("intra", "Repeated intra-subject evaluation");
  common(intra);
  experiment_flags(intra);
  dataset(intra, "", o.eeg, o.ann, o.features);
  outputs(intra, true);

  auto* inter = app.add_subcommand("inter", "Train on one subject, evaluate on another");
  common(inter);
  experiment_flags(inter);
  dataset(inter, "train-", o.train_eeg, o.train_ann, o.train_features);
  dataset(inter, "test-", o.test_eeg, o.test_ann, o.test_features);
  outputs(inter, true);

  auto* compare = app.add_subcommand("compare", "Run bilstm, lstm and gru on shared splits");
  common(compare);
  experiment_flags(compare);
  dataset(compare, "", o.eeg, o.ann, o.features);
  dataset(compare, "test-", o.test_eeg, o.test_ann, o.test_features);
  outputs(compare, true);

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the BPTT gradients");
  common(gradcheck);
  outputs(gradcheck, false);

  auto* inspect = app.add_subcommand("inspect-filterbank", "Dump the Mel filterbank as CSV");
  common(inspect);
  inspect->add_option("--fs", o.fs, "Sample rate in Hz")->check(CLI::PositiveNumber);
  outputs(inspect, false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (synth->parsed()) return detail::cmd_synth(o, out);
    if (featurize->parsed()) return detail::cmd_featurize(o, out);
    if (train->parsed()) return detail::cmd_train(o, out);
    if (intra->parsed()) return detail::cmd_intra(o, out);
    if (inter->parsed()) return detail::cmd_inter(o, out);
    if (compare->parsed()) return detail::cmd_compare(o, out);
    if (gradcheck->parsed()) return detail::cmd_gradcheck(o, out);
    if (inspect->parsed()) return detail::cmd_inspect_filterbank(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DivergenceError& e) {
    err << "numerical divergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  }
  err << "no subcommand given\n";
  return kConfigError;
}

}  // namespace eegerr::cli
