#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "affect/datamodel.hpp"
#include "affect/heads.hpp"
#include "affect/ingest.hpp"
#include "affect/metrics.hpp"
#include "affect/postprocess.hpp"

namespace affect {

/// Per-track, per-frame predictions (outer index = track).
using TrackPredictions = std::vector<std::vector<TaskPrediction>>;

/// Frame-level predictions with undetected frames filled in.
TrackPredictions predict_dataset(const HeadModel& model, const Dataset& dataset, std::size_t jobs = 1);

TrackPredictions smooth_all(const TrackPredictions& predictions, const SmoothingConfig& config,
                            std::size_t jobs = 1);

/// Metrics over every frame labeled for `task`; AU predictions binarized with `thresholds`.
MetricsReport evaluate_predictions(const Dataset& dataset, const TrackPredictions& predictions, Task task,
                                   const AUThresholds& thresholds, const SmoothingConfig& smoothing);

/// Tunes per-AU thresholds on every AU-labeled frame.
ThresholdTuning tune_thresholds(const Dataset& dataset, const TrackPredictions& predictions);

/// Frame-level, mean/median with k = 5 and k = 15.
std::vector<SmoothingConfig> smoothing_sweep_grid();

/// One report per sweep configuration, in smoothing_sweep_grid() order.
std::vector<MetricsReport> sweep_smoothing(const Dataset& dataset, const TrackPredictions& predictions, Task task,
                                           const AUThresholds& thresholds, std::size_t jobs = 1);

std::vector<PredictedTrack> to_predicted_tracks(const Dataset& dataset, const TrackPredictions& predictions);

}  // namespace affect
