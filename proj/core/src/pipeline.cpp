#include "affect/pipeline.hpp"

#include "affect/errors.hpp"
#include "affect/parallel.hpp"

namespace affect {

TrackPredictions predict_dataset(const HeadModel& model, const Dataset& dataset, std::size_t jobs) {
  check_compatible(model, dataset.embedding_dim);
  TrackPredictions out(dataset.tracks.size());
  parallel_for(dataset.tracks.size(), jobs, [&](std::size_t i) {
    const auto& track = dataset.tracks[i];
    const auto raw = predict_track(model, track, model.arch.feature_kind);
    std::vector<std::uint32_t> indices;
    indices.reserve(track.frames.size());
    for (const auto& f : track.frames) indices.push_back(f.features.frame_index);
    out[i] = interpolate_missing(raw, indices, track.video_id);
  });
  return out;
}

TrackPredictions smooth_all(const TrackPredictions& predictions, const SmoothingConfig& config, std::size_t jobs) {
  TrackPredictions out(predictions.size());
  parallel_for(predictions.size(), jobs, [&](std::size_t i) { out[i] = smooth(predictions[i], config); });
  return out;
}

MetricsReport evaluate_predictions(const Dataset& dataset, const TrackPredictions& predictions, Task task,
                                   const AUThresholds& thresholds, const SmoothingConfig& smoothing) {
  if (predictions.size() != dataset.tracks.size())
    throw ShapeError("evaluate: prediction track count differs from the dataset");
  const bool want_expr = task == Task::Expression || task == Task::MultiTask;
  const bool want_va = task == Task::ValenceArousal || task == Task::MultiTask;
  const bool want_au = task == Task::ActionUnits || task == Task::MultiTask;

  std::vector<int> expr_pred, expr_true;
  std::vector<ValenceArousal> va_pred, va_true;
  std::vector<std::array<double, kNumActionUnits>> au_pred;
  std::vector<AUVector> au_true;
  std::size_t frames = 0;
  for (std::size_t t = 0; t < dataset.tracks.size(); ++t) {
    const auto& track = dataset.tracks[t];
    if (predictions[t].size() != track.frames.size())
      throw ShapeError("evaluate: " + track.video_id + " has " + std::to_string(predictions[t].size()) +
                       " predictions for " + std::to_string(track.frames.size()) + " frames");
    for (std::size_t i = 0; i < track.frames.size(); ++i) {
      const auto& l = track.frames[i].labels;
      const auto& p = predictions[t][i];
      bool used = false;
      if (want_expr && l.expression) {
        if (!p.expr_probs) throw ShapeError("evaluate: predictions carry no expression output");
        expr_pred.push_back(argmax(*p.expr_probs));
        expr_true.push_back(*l.expression);
        used = true;
      }
      if (want_va && l.va) {
        if (!p.va) throw ShapeError("evaluate: predictions carry no valence/arousal output");
        va_pred.push_back(*p.va);
        va_true.push_back(*l.va);
        used = true;
      }
      if (want_au && l.action_units) {
        if (!p.au_probs) throw ShapeError("evaluate: predictions carry no action-unit output");
        au_pred.push_back(*p.au_probs);
        au_true.push_back(*l.action_units);
        used = true;
      }
      frames += used ? 1 : 0;
    }
  }

  MetricsReport report;
  report.task = std::string(task_name(task));
  report.smoothing_used = describe(smoothing);
  report.frames = frames;
  if (!expr_true.empty()) {
    const auto f1 = macro_f1(expr_pred, expr_true);
    report.p_expr = f1.macro;
    report.per_class_f1 = f1.per_class;
    report.undefined_classes = f1.undefined_classes;
    report.accuracy = unbalanced_accuracy(expr_pred, expr_true);
  }
  if (va_true.size() >= 2) {
    const auto m = va_metrics(va_pred, va_true);
    report.ccc_v = m.ccc_v;
    report.ccc_a = m.ccc_a;
    report.p_va = m.p_va;
  }
  if (!au_true.empty()) {
    const auto m = au_f1(au_pred, au_true, thresholds);
    report.per_au_f1 = m.per_au;
    report.p_au = m.p_au;
    report.thresholds_used = thresholds.values;
  }
  if (!report.p_expr && !report.p_va && !report.p_au)
    throw ConfigError("evaluate: no frames labeled for " + report.task);
  report.finalize();
  return report;
}

ThresholdTuning tune_thresholds(const Dataset& dataset, const TrackPredictions& predictions) {
  std::vector<std::array<double, kNumActionUnits>> probs;
  std::vector<AUVector> labels;
  for (std::size_t t = 0; t < dataset.tracks.size(); ++t)
    for (std::size_t i = 0; i < dataset.tracks[t].frames.size(); ++i) {
      const auto& l = dataset.tracks[t].frames[i].labels;
      const auto& p = predictions.at(t).at(i);
      if (!l.action_units) continue;
      if (!p.au_probs) throw ShapeError("tune thresholds: predictions carry no action-unit output");
      probs.push_back(*p.au_probs);
      labels.push_back(*l.action_units);
    }
  if (labels.empty()) throw ConfigError("tune thresholds: no AU-labeled frames");
  return tune_au_thresholds(probs, labels);
}

std::vector<SmoothingConfig> smoothing_sweep_grid() {
  return {
      {SmoothingKind::Mean, 1, WindowStyle::CenteredInclusive},
      {SmoothingKind::Mean, 5, WindowStyle::CenteredInclusive},
      {SmoothingKind::Median, 5, WindowStyle::CenteredInclusive},
      {SmoothingKind::Mean, 15, WindowStyle::CenteredInclusive},
      {SmoothingKind::Median, 15, WindowStyle::CenteredInclusive},
  };
}

std::vector<MetricsReport> sweep_smoothing(const Dataset& dataset, const TrackPredictions& predictions, Task task,
                                           const AUThresholds& thresholds, std::size_t jobs) {
  std::vector<MetricsReport> rows;
  for (const auto& cfg : smoothing_sweep_grid())
    rows.push_back(evaluate_predictions(dataset, smooth_all(predictions, cfg, jobs), task, thresholds, cfg));
  return rows;
}

std::vector<PredictedTrack> to_predicted_tracks(const Dataset& dataset, const TrackPredictions& predictions) {
  std::vector<PredictedTrack> out;
  for (std::size_t t = 0; t < dataset.tracks.size(); ++t) {
    PredictedTrack p;
    p.video_id = dataset.tracks[t].video_id;
    for (const auto& pred : predictions.at(t)) p.frames.emplace_back(pred);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace affect
