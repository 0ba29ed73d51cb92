#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affect/datamodel.hpp"

namespace affect {

enum class SmoothingKind { Mean, Median };

/// CenteredInclusive: k consecutive frames around t, t included.
/// CenteredExclusive: t-k/2 .. t-1, t+1 .. t+k/2 (t itself left out).
enum class WindowStyle { CenteredInclusive, CenteredExclusive };

struct SmoothingConfig {
  SmoothingKind kind = SmoothingKind::Mean;
  std::size_t k = 1;
  WindowStyle window_style = WindowStyle::CenteredInclusive;

  bool operator==(const SmoothingConfig&) const = default;
};

/// "frame-level", "mean,5", "median,15", ...
std::string describe(const SmoothingConfig& config);
/// Parses "mean,5" / "median,15" / "none".
SmoothingConfig parse_smoothing(const std::string& text);

inline constexpr std::array<double, 9> kThresholdGrid = {0.1, 0.2, 0.3, 0.4, 0.5,
                                                         0.6, 0.7, 0.8, 0.9};

struct AUThresholds {
  std::array<double, kNumActionUnits> values;

  AUThresholds() { values.fill(0.5); }
  /// Throws ConfigError unless every value lies in (0,1).
  explicit AUThresholds(const std::array<double, kNumActionUnits>& v);

  static AUThresholds uniform(double t = 0.5);
  bool operator==(const AUThresholds&) const = default;
};

/// Single line, 12 comma-separated reals.
std::string format_thresholds(const AUThresholds& t);
AUThresholds parse_thresholds(const std::string& text);
AUThresholds read_thresholds(const std::filesystem::path& path);
void write_thresholds(const std::filesystem::path& path, const AUThresholds& t);

/// Binarizes with prob >= threshold.
AUVector binarize(const std::array<double, kNumActionUnits>& probs, const AUThresholds& t);

/// Fills undetected frames: linear in frame_index between detected
/// neighbours, nearest-detected copy at the edges. Detected frames are copied
/// through unchanged. `frame_indices` defaults to 0..n-1 when empty.
/// Throws Error naming `track_id` when no frame is detected.
std::vector<TaskPrediction> interpolate_missing(std::span<const std::optional<TaskPrediction>> predictions,
                                                std::span<const std::uint32_t> frame_indices = {},
                                                std::string_view track_id = {});

/// k = 1 returns the input unchanged. Throws ConfigError for k < 1.
std::vector<TaskPrediction> smooth(std::span<const TaskPrediction> predictions,
                                   const SmoothingConfig& config);

/// Window of frame positions used for position `t`; exposed for tests.
std::vector<std::size_t> smoothing_window(std::size_t t, std::size_t n, const SmoothingConfig& config);

struct ThresholdTuning {
  AUThresholds thresholds;
  std::array<bool, kNumActionUnits> defaulted{};  // true when an AU lacked positives or negatives
  std::array<double, kNumActionUnits> f1{};
};

/// Per-AU exhaustive scan of kThresholdGrid maximizing that AU's F1; ties go to
/// the value closest to 0.5, then the smaller one.
ThresholdTuning tune_au_thresholds(std::span<const std::array<double, kNumActionUnits>> probs,
                                   std::span<const AUVector> labels);

}  // namespace affect
