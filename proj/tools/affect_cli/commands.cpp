#include "affect_cli/commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "affect/errors.hpp"
#include "affect/heads.hpp"
#include "affect/ingest.hpp"
#include "affect/metrics.hpp"
#include "affect/pipeline.hpp"
#include "affect/postprocess.hpp"
#include "affect/synthetic.hpp"
#include "affect/train.hpp"
#include "affect_cli/manifest.hpp"

namespace affect::cli {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<double> parse_number_list(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(trim(item), &used));
      if (used != trim(item).size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(flag + ": not a number: '" + item + "'");
    }
  }
  return values;
}

struct DataArgs {
  std::string root;
  std::string features;
  std::string annotations;
};

struct DataPaths {
  fs::path features;
  fs::path annotations;
};

void add_data_options(CLI::App* sub, DataArgs& d, const std::string& prefix, const std::string& what) {
  const std::string dir_flag = prefix.empty() ? "--data" : "--" + prefix;
  const std::string p = prefix.empty() ? "--" : "--" + prefix + "-";
  sub->add_option(dir_flag, d.root, what + " directory with features/ and annotations/");
  sub->add_option(p + "features", d.features, what + " features (.affr file or directory)");
  sub->add_option(p + "annotations", d.annotations, what + " annotation root (EXPR/, VA/, AU/)");
}

DataPaths resolve(const DataArgs& d, const std::string& prefix) {
  const std::string dir_flag = prefix.empty() ? "--data" : "--" + prefix;
  if (d.root.empty() && d.features.empty())
    throw UsageError("missing " + dir_flag + " (or " + (prefix.empty() ? "--" : "--" + prefix + "-") + "features)");
  DataPaths out;
  out.features = d.features.empty() ? fs::path(d.root) / "features" : fs::path(d.features);
  if (!d.annotations.empty())
    out.annotations = d.annotations;
  else if (!d.root.empty())
    out.annotations = fs::path(d.root) / "annotations";
  return out;
}

Task to_task(const std::string& s) {
  auto t = parse_task(s);
  if (!t) throw UsageError("unknown task '" + s + "'");
  return *t;
}

FeatureKind to_kind(const std::string& s) {
  auto k = parse_feature_kind(s);
  if (!k) throw UsageError("unknown feature kind '" + s + "'");
  return *k;
}

SmoothingConfig to_smoothing(const std::string& s) {
  if (s.empty()) return {};
  try {
    return parse_smoothing(s);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

/// The task a checkpoint was built for.
Task model_task(const HeadArchitecture& arch) {
  const int groups = int(arch.expression) + int(arch.valence_arousal) + int(arch.action_units);
  if (groups > 1) return Task::MultiTask;
  if (arch.valence_arousal) return Task::ValenceArousal;
  if (arch.action_units) return Task::ActionUnits;
  return Task::Expression;
}

void require_groups(const HeadModel& model, Task task) {
  if (!model.arch.has_group(task))
    throw ConfigError("checkpoint has no output group for task '" + std::string(task_name(task)) + "'");
}

/// Effective option values of a subcommand, one per line.
std::string snapshot(const CLI::App* sub) {
  std::string out;
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_name() == "--help" || opt->get_lnames().empty()) continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->reduced_results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    out += opt->get_lnames().front() + "=" + value + "\n";
  }
  return out;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- synth ----------------------------------------------------------------

struct SynthOptions {
  std::string out = "synthetic";
  std::uint64_t seed = 0;
  std::size_t tracks = 4;
  std::size_t val_tracks = 1;
  std::size_t frames = 500;
  std::size_t dim = 32;
  std::string task = "all";
  double separation = 6.0;
  double va_noise = 0.1;
  double dropout = 0.0;
  std::string au_rate = "0.3";
  double persistence = 0.95;
  double correlation = 0.95;
  double au_gain = 2.5;
};

void add_synth(CLI::App& app, SynthOptions& o) {
  auto* s = app.add_subcommand("synth", "generate a synthetic dataset with a known ground-truth model");
  s->add_option("--out", o.out, "output directory")->capture_default_str();
  s->add_option("--seed", o.seed, "generator seed")->required();
  s->add_option("--tracks", o.tracks, "training tracks")->capture_default_str();
  s->add_option("--val-tracks", o.val_tracks, "validation tracks")->capture_default_str();
  s->add_option("--frames", o.frames, "frames per track")->capture_default_str();
  s->add_option("--dim", o.dim, "embedding width D")->capture_default_str();
  s->add_option("--task", o.task, "labels to emit: expr, va, au, all")
      ->check(CLI::IsMember({"expr", "va", "au", "mtl", "all"}))
      ->capture_default_str();
  s->add_option("--separation", o.separation, "distance between class centroids")->capture_default_str();
  s->add_option("--va-noise", o.va_noise, "noise sd on valence/arousal before tanh")->capture_default_str();
  s->add_option("--dropout", o.dropout, "fraction of undetected frames")->capture_default_str();
  s->add_option("--au-rate", o.au_rate, "AU positive rate, one value or 12 comma separated")->capture_default_str();
  s->add_option("--persistence", o.persistence, "probability an expression carries to the next frame")
      ->capture_default_str();
  s->add_option("--correlation", o.correlation, "AR(1) coefficient of embedding noise")->capture_default_str();
  s->add_option("--au-gain", o.au_gain, "AU logit gain")->capture_default_str();
}

int cmd_synth(const SynthOptions& o, const CLI::App* sub, std::ostream& out) {
  const auto t0 = Clock::now();
  SyntheticSpec spec;
  spec.seed = o.seed;
  spec.num_tracks = o.tracks;
  spec.validation_tracks = o.val_tracks;
  spec.frames_per_track = o.frames;
  spec.embedding_dim = o.dim;
  const Task task = to_task(o.task);
  spec.task_mix = task == Task::MultiTask ? TaskMix{} : TaskMix::only(task);
  spec.expr_separation = o.separation;
  spec.va_noise_sd = o.va_noise;
  spec.dropout_rate = o.dropout;
  const auto rates = parse_number_list(o.au_rate, "--au-rate");
  if (rates.size() == 1)
    spec.au_positive_rates.fill(rates[0]);
  else if (rates.size() == kNumActionUnits)
    std::copy(rates.begin(), rates.end(), spec.au_positive_rates.begin());
  else
    throw UsageError("--au-rate takes 1 or 12 values, got " + std::to_string(rates.size()));
  spec.label_persistence = o.persistence;
  spec.temporal_correlation = o.correlation;
  spec.au_gain = o.au_gain;
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }

  const auto data = generate_synthetic(spec);
  const fs::path root(o.out);
  fs::create_directories(root);
  save_dataset(data.train, root / "train");
  std::vector<std::string> outputs = {(root / "train").string()};
  if (!data.validation.tracks.empty()) {
    save_dataset(data.validation, root / "validation");
    outputs.push_back((root / "validation").string());
  }
  write_text_file(root / "ground_truth.json", data.truth.to_json());
  outputs.push_back((root / "ground_truth.json").string());

  RunManifest m{"synth", snapshot(sub), {}, o.seed, outputs, seconds_since(t0)};
  m.write(root);
  out << "wrote " << data.train.tracks.size() << " train and " << data.validation.tracks.size()
      << " validation tracks to " << root.string() << "\n";
  return 0;
}

// ---- train / train-mtl ----------------------------------------------------

struct TrainOptions {
  std::string task = "expr";
  DataArgs train_data;
  DataArgs val_data;
  std::string out = "run";
  std::string feature_kind = "embeddings";
  std::size_t hidden = kDefaultHiddenUnits;
  double lr = 1e-3;
  std::size_t epochs = 20;
  std::size_t batch = 256;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  bool uniform_weights = false;
  std::string loss_weights = "1,1,1";
  std::size_t jobs = 1;
};

CLI::App* add_train(CLI::App& app, TrainOptions& o, bool mtl) {
  auto* s = mtl ? app.add_subcommand("train-mtl", "jointly train expression, valence/arousal and AU heads")
                : app.add_subcommand("train", "train a single-task head");
  if (!mtl)
    s->add_option("--task", o.task, "expr, va, au or mtl")
        ->check(CLI::IsMember({"expr", "va", "au", "mtl", "all"}))
        ->capture_default_str();
  add_data_options(s, o.train_data, "train", "training");
  add_data_options(s, o.val_data, "val", "validation");
  s->add_option("--out", o.out, "output directory")->capture_default_str();
  s->add_option("--feature-kind", o.feature_kind, "embeddings, scores or concat")
      ->check(CLI::IsMember({"embeddings", "scores", "concat"}))
      ->capture_default_str();
  s->add_option("--hidden", o.hidden, "hidden ReLU units (0 = no hidden layer)")->capture_default_str();
  s->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  s->add_option("--epochs", o.epochs, "maximum epochs")->capture_default_str();
  s->add_option("--batch", o.batch, "batch size")->capture_default_str();
  s->add_option("--patience", o.patience, "epochs without improvement before stopping")->capture_default_str();
  s->add_option("--seed", o.seed, "initialization and shuffling seed")->capture_default_str();
  s->add_flag("--uniform-weights", o.uniform_weights, "disable class / positive weighting");
  if (mtl)
    s->add_option("--loss-weights", o.loss_weights, "expr,va,au loss weights")->capture_default_str();
  s->add_option("--jobs", o.jobs, "worker threads for validation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  return s;
}

int cmd_train(TrainOptions o, bool mtl, const CLI::App* sub, std::ostream& out, std::ostream& err) {
  const auto t0 = Clock::now();
  const Task task = mtl ? Task::MultiTask : to_task(o.task);
  const FeatureKind kind = to_kind(o.feature_kind);
  const auto train_paths = resolve(o.train_data, "train");
  const auto val_paths = resolve(o.val_data, "val");

  TrainConfig cfg;
  cfg.task = task;
  cfg.feature_kind = kind;
  cfg.learning_rate = o.lr;
  cfg.max_epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.early_stop_patience = o.patience;
  cfg.seed = o.seed;
  cfg.uniform_class_weights = o.uniform_weights;
  cfg.jobs = o.jobs;
  if (mtl) {
    const auto w = parse_number_list(o.loss_weights, "--loss-weights");
    if (w.size() != 3) throw UsageError("--loss-weights takes 3 values (expr,va,au)");
    std::copy(w.begin(), w.end(), cfg.task_loss_weights.begin());
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }

  const auto train_set = load_features(train_paths.features, train_paths.annotations, task, Split::Train);
  const auto val_set = load_features(val_paths.features, val_paths.annotations, task, Split::Validation);
  const std::optional<std::size_t> hidden = o.hidden == 0 ? std::nullopt : std::optional(o.hidden);
  const auto arch = HeadArchitecture::for_task(task, kind, train_set.embedding_dim, hidden);
  const auto result = mtl ? train_mtl(train_set, val_set, arch, cfg) : train(train_set, val_set, arch, cfg);

  const fs::path root(o.out);
  fs::create_directories(root);
  save_checkpoint(root / "checkpoint.json", result.model);
  write_text_file(root / "train_log.csv", format_training_log(result.log));

  std::size_t skipped = 0;
  for (const auto& r : result.log) skipped += r.skipped_batches;
  if (skipped > 0) err << "warning: " << skipped << " batches had no labeled frames and were skipped\n";

  RunManifest m{mtl ? "train-mtl" : "train",
                snapshot(sub),
                digest_inputs({train_paths.features, train_paths.annotations, val_paths.features,
                               val_paths.annotations}),
                o.seed,
                {(root / "checkpoint.json").string(), (root / "train_log.csv").string()},
                seconds_since(t0)};
  m.write(root);

  const auto& best = result.log.at(result.best_epoch - 1);
  out << "epochs run: " << result.log.size() << ", best epoch: " << result.best_epoch
      << ", validation metric: " << fmt(best.validation_metric) << "\n";
  return 0;
}

// ---- predict / tune-thresholds / eval -------------------------------------

struct EvalOptions {
  std::string checkpoint;
  std::string task;
  DataArgs data;
  std::string out;
  std::string smooth;
  std::string thresholds;
  bool sweep = false;
  std::size_t jobs = 1;
};

CLI::App* add_predict(CLI::App& app, EvalOptions& o) {
  auto* s = app.add_subcommand("predict", "write challenge-format prediction files");
  s->add_option("--checkpoint", o.checkpoint, "checkpoint.json from train")->required();
  s->add_option("--task", o.task, "task to emit (default: the checkpoint's)")
      ->check(CLI::IsMember({"expr", "va", "au", "mtl", "all"}));
  add_data_options(s, o.data, "", "input");
  s->add_option("--out", o.out, "output directory")->required();
  s->add_option("--smooth", o.smooth, "none, mean,K or median,K[,exclusive]");
  s->add_option("--thresholds", o.thresholds, "AU thresholds file (default 0.5)");
  s->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  return s;
}

CLI::App* add_tune(CLI::App& app, EvalOptions& o) {
  auto* s = app.add_subcommand("tune-thresholds", "grid-search per-AU decision thresholds");
  s->add_option("--checkpoint", o.checkpoint, "checkpoint.json with an AU head")->required();
  add_data_options(s, o.data, "", "AU-labeled");
  s->add_option("--out", o.out, "output directory")->required();
  s->add_option("--smooth", o.smooth, "smoothing applied before tuning");
  s->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  return s;
}

CLI::App* add_eval(CLI::App& app, EvalOptions& o) {
  auto* s = app.add_subcommand("eval", "predict, post-process and score a labeled dataset");
  s->add_option("--checkpoint", o.checkpoint, "checkpoint.json from train")->required();
  s->add_option("--task", o.task, "task to score (default: the checkpoint's)")
      ->check(CLI::IsMember({"expr", "va", "au", "mtl", "all"}));
  add_data_options(s, o.data, "", "labeled");
  s->add_option("--out", o.out, "output directory")->required();
  s->add_option("--smooth", o.smooth, "none, mean,K or median,K[,exclusive]");
  s->add_option("--thresholds", o.thresholds, "AU thresholds file, or 'tune'");
  s->add_flag("--sweep-smoothing", o.sweep, "score frame-level, mean and median with k = 5, 15");
  s->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  return s;
}

struct Prepared {
  HeadModel model;
  Task task;
  DataPaths paths;
  Dataset dataset;
  SmoothingConfig smoothing;
  TrackPredictions raw;
};

Prepared prepare(const EvalOptions& o, std::optional<Task> forced, Split split) {
  const auto smoothing = to_smoothing(o.smooth);
  std::optional<Task> requested = forced;
  if (!requested && !o.task.empty()) requested = to_task(o.task);
  auto paths = resolve(o.data, "");
  if (split == Split::Test) paths.annotations.clear();  // predict never reads labels
  auto model = load_checkpoint(o.checkpoint);
  const Task task = requested.value_or(model_task(model.arch));
  require_groups(model, task);
  auto dataset = load_features(paths.features, paths.annotations, task, split);
  auto raw = predict_dataset(model, dataset, o.jobs);
  return {std::move(model), task, paths, std::move(dataset), smoothing, std::move(raw)};
}

std::map<std::string, std::string> digests_for(const EvalOptions& o, const DataPaths& paths) {
  std::vector<fs::path> inputs = {o.checkpoint, paths.features, paths.annotations};
  if (!o.thresholds.empty() && o.thresholds != "tune") inputs.emplace_back(o.thresholds);
  return digest_inputs(inputs);
}

int cmd_predict(const EvalOptions& o, const CLI::App* sub, std::ostream& out) {
  const auto t0 = Clock::now();
  auto p = prepare(o, std::nullopt, Split::Test);
  const auto thresholds = o.thresholds.empty() ? AUThresholds{} : read_thresholds(o.thresholds);
  const auto smoothed = smooth_all(p.raw, p.smoothing, o.jobs);
  const fs::path root(o.out);
  fs::create_directories(root);
  write_predictions(to_predicted_tracks(p.dataset, smoothed), p.task, root, thresholds);

  RunManifest m{"predict", snapshot(sub), digests_for(o, p.paths), 0, {}, seconds_since(t0)};
  for (const auto& track : p.dataset.tracks) {
    if (p.task == Task::MultiTask) {
      for (Task t : {Task::Expression, Task::ValenceArousal, Task::ActionUnits})
        m.outputs.push_back((root / annotation_subdir(t) / (track.video_id + ".txt")).string());
    } else {
      m.outputs.push_back((root / (track.video_id + ".txt")).string());
    }
  }
  m.write(root);
  out << "wrote predictions for " << p.dataset.tracks.size() << " videos (" << task_name(p.task) << ", "
      << describe(p.smoothing) << ") to " << root.string() << "\n";
  return 0;
}

void print_tuning(const ThresholdTuning& tuning, std::ostream& out, std::ostream& err) {
  for (std::size_t a = 0; a < kNumActionUnits; ++a) {
    out << kActionUnitNames[a] << " threshold " << fmt(tuning.thresholds.values[a]) << " F1 "
        << fmt(tuning.f1[a]) << "\n";
    if (tuning.defaulted[a])
      err << "warning: " << kActionUnitNames[a] << " lacks positives or negatives; threshold left at 0.5\n";
  }
}

int cmd_tune(const EvalOptions& o, const CLI::App* sub, std::ostream& out, std::ostream& err) {
  const auto t0 = Clock::now();
  auto p = prepare(o, Task::ActionUnits, Split::Validation);
  const auto tuning = tune_thresholds(p.dataset, smooth_all(p.raw, p.smoothing, o.jobs));
  const fs::path root(o.out);
  fs::create_directories(root);
  write_thresholds(root / "thresholds.txt", tuning.thresholds);
  print_tuning(tuning, out, err);
  RunManifest m{"tune-thresholds", snapshot(sub), digests_for(o, p.paths), 0,
                {(root / "thresholds.txt").string()}, seconds_since(t0)};
  m.write(root);
  return 0;
}

std::string opt_cell(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::string sweep_csv(const std::vector<MetricsReport>& rows) {
  std::string s = "smoothing,p_expr,ccc_v,ccc_a,p_va,p_au,p_mtl\n";
  for (const auto& r : rows)
    s += r.smoothing_used + "," + opt_cell(r.p_expr) + "," + opt_cell(r.ccc_v) + "," + opt_cell(r.ccc_a) + "," +
         opt_cell(r.p_va) + "," + opt_cell(r.p_au) + "," + opt_cell(r.p_mtl) + "\n";
  return s;
}

std::string sweep_table(const std::vector<MetricsReport>& rows) {
  auto cell = [](const std::optional<double>& v) {
    char buf[16];
    if (v)
      std::snprintf(buf, sizeof buf, "%9.4f", *v);
    else
      std::snprintf(buf, sizeof buf, "%9s", "-");
    return std::string(buf);
  };
  char head[128];
  std::snprintf(head, sizeof head, "%-14s%9s%9s%9s%9s\n", "smoothing", "P_EXPR", "P_VA", "P_AU", "P_MTL");
  std::string s = head;
  for (const auto& r : rows) {
    char name[32];
    std::snprintf(name, sizeof name, "%-14s", r.smoothing_used.c_str());
    s += name + cell(r.p_expr) + cell(r.p_va) + cell(r.p_au) + cell(r.p_mtl) + "\n";
  }
  return s;
}

int cmd_eval(const EvalOptions& o, const CLI::App* sub, std::ostream& out, std::ostream& err) {
  const auto t0 = Clock::now();
  auto p = prepare(o, std::nullopt, Split::Validation);
  const bool has_au = p.task == Task::ActionUnits || p.task == Task::MultiTask;
  const fs::path root(o.out);
  fs::create_directories(root);
  std::vector<std::string> outputs;

  const auto smoothed = smooth_all(p.raw, p.smoothing, o.jobs);
  AUThresholds thresholds;
  std::string threshold_source = "uniform 0.5";
  if (o.thresholds == "tune") {
    if (!has_au) throw UsageError("--thresholds tune needs a task with action units");
    const auto tuning = tune_thresholds(p.dataset, smoothed);
    print_tuning(tuning, out, err);
    thresholds = tuning.thresholds;
    write_thresholds(root / "thresholds.txt", thresholds);
    outputs.push_back((root / "thresholds.txt").string());
    threshold_source = "tuned";
  } else if (!o.thresholds.empty()) {
    thresholds = read_thresholds(o.thresholds);
    threshold_source = o.thresholds;
  }

  std::map<std::string, std::string> provenance = {
      {"checkpoint", o.checkpoint},
      {"features", p.paths.features.string()},
      {"annotations", p.paths.annotations.string()},
      {"thresholds", threshold_source},
  };

  auto report = evaluate_predictions(p.dataset, smoothed, p.task, thresholds, p.smoothing);
  report.provenance = provenance;
  write_text_file(root / "report.json", report.to_json());
  write_text_file(root / "report.txt", report.to_text());
  outputs.push_back((root / "report.json").string());
  outputs.push_back((root / "report.txt").string());
  out << report.to_text();

  if (o.sweep) {
    auto rows = sweep_smoothing(p.dataset, p.raw, p.task, thresholds, o.jobs);
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (auto& r : rows) {
      r.provenance = provenance;
      arr.push_back(nlohmann::ordered_json::parse(r.to_json()));
    }
    write_text_file(root / "sweep.csv", sweep_csv(rows));
    write_text_file(root / "sweep.txt", sweep_table(rows));
    write_text_file(root / "sweep.json", arr.dump(1) + "\n");
    for (const char* f : {"sweep.csv", "sweep.txt", "sweep.json"}) outputs.push_back((root / f).string());
    out << "\n" << sweep_table(rows);
  }

  RunManifest m{"eval", snapshot(sub), digests_for(o, p.paths), 0, outputs, seconds_since(t0)};
  m.write(root);
  return 0;
}

// ---- report ---------------------------------------------------------------

struct ReportOptions {
  std::vector<std::string> inputs;
  bool combine = false;
  std::optional<double> p_expr;
  std::optional<double> p_va;
  std::optional<double> p_au;
  std::optional<double> ccc_v;
  std::optional<double> ccc_a;
};

CLI::App* add_report(CLI::App& app, ReportOptions& o) {
  auto* s = app.add_subcommand("report", "print metrics reports and combine challenge scores");
  s->add_option("inputs", o.inputs, "report.json files");
  s->add_flag("--combine", o.combine, "sum P_EXPR, P_VA and P_AU across the inputs into P_MTL");
  s->add_option("--p-expr", o.p_expr, "expression score to combine");
  s->add_option("--p-va", o.p_va, "valence/arousal score to combine");
  s->add_option("--p-au", o.p_au, "action-unit score to combine");
  s->add_option("--ccc-v", o.ccc_v, "valence CCC (P_VA = mean with --ccc-a)");
  s->add_option("--ccc-a", o.ccc_a, "arousal CCC");
  return s;
}

int cmd_report(ReportOptions o, std::ostream& out) {
  if (o.ccc_v.has_value() != o.ccc_a.has_value()) throw UsageError("--ccc-v and --ccc-a go together");
  if (o.ccc_v) {
    const double p = 0.5 * (*o.ccc_v + *o.ccc_a);
    out << "P_VA = " << fmt(p) << "\n";
    if (!o.p_va) o.p_va = p;
  }
  const bool manual = o.p_expr || o.p_au || (o.p_va && !o.ccc_v);
  if (o.inputs.empty() && !manual && !o.ccc_v) throw UsageError("report needs input files or score flags");

  for (const auto& path : o.inputs) {
    const auto report = MetricsReport::from_json(read_text_file(path));
    if (!o.combine) {
      out << "== " << path << "\n" << report.to_text();
      continue;
    }
    auto take = [&](std::optional<double>& slot, const std::optional<double>& v, const char* name) {
      if (!v) return;
      if (slot) throw UsageError(std::string("--combine: ") + name + " given more than once (" + path + ")");
      slot = v;
    };
    take(o.p_expr, report.p_expr, "P_EXPR");
    take(o.p_va, report.p_va, "P_VA");
    take(o.p_au, report.p_au, "P_AU");
  }
  if (o.combine || manual) {
    try {
      const double total = p_mtl(o.p_expr, o.p_va, o.p_au);
      out << "P_EXPR = " << fmt(*o.p_expr) << "\nP_VA = " << fmt(*o.p_va) << "\nP_AU = " << fmt(*o.p_au)
          << "\nP_MTL = " << fmt(total) << "\n";
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
  return 0;
}

}  // namespace

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::optional<std::string> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!config) return rest;

  std::ifstream in(*config);
  if (!in) throw UsageError("cannot read config file " + *config);
  std::vector<std::string> injected;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(*config + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (key.empty()) throw UsageError(*config + ":" + std::to_string(lineno) + ": empty key");
    injected.push_back("--" + key + "=" + value);
  }
  // Subcommand first, then config values, then the explicit flags.
  std::vector<std::string> out;
  std::size_t first = 0;
  if (!rest.empty() && rest[0].rfind("-", 0) != 0) out.push_back(rest[first++]);
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), rest.begin() + static_cast<std::ptrdiff_t>(first), rest.end());
  return out;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Frame-level affect prediction: synthetic data, head training, post-processing, evaluation",
               "affect"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);
  app.footer("Options may also come from --config FILE (lines of key = value); explicit flags win.");

  SynthOptions synth;
  TrainOptions train_opts, mtl_opts;
  mtl_opts.hidden = 0;
  mtl_opts.feature_kind = "concat";
  mtl_opts.task = "mtl";
  EvalOptions predict_opts, tune_opts, eval_opts;
  ReportOptions report_opts;

  add_synth(app, synth);
  auto* train_sub = add_train(app, train_opts, false);
  auto* mtl_sub = add_train(app, mtl_opts, true);
  auto* predict_sub = add_predict(app, predict_opts);
  auto* tune_sub = add_tune(app, tune_opts);
  auto* eval_sub = add_eval(app, eval_opts);
  auto* report_sub = add_report(app, report_opts);

  try {
    auto args = expand_config(raw_args);
    std::vector<char*> argv;
    std::string prog = "affect";
    argv.push_back(prog.data());
    for (auto& a : args) argv.push_back(a.data());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? 0 : 2;
    }

    if (app.got_subcommand("synth")) return cmd_synth(synth, app.get_subcommand("synth"), out);
    if (app.got_subcommand(train_sub)) return cmd_train(train_opts, false, train_sub, out, err);
    if (app.got_subcommand(mtl_sub)) return cmd_train(mtl_opts, true, mtl_sub, out, err);
    if (app.got_subcommand(predict_sub)) return cmd_predict(predict_opts, predict_sub, out);
    if (app.got_subcommand(tune_sub)) return cmd_tune(tune_opts, tune_sub, out, err);
    if (app.got_subcommand(eval_sub)) return cmd_eval(eval_opts, eval_sub, out, err);
    if (app.got_subcommand(report_sub)) return cmd_report(report_opts, out);
    return 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for more information.\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace affect::cli
