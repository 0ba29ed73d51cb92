#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace affect {

inline constexpr std::size_t kNumExpressions = 8;
inline constexpr std::size_t kNumScores = 8;
inline constexpr std::size_t kNumActionUnits = 12;

/// Expression classes in challenge order.
enum class Expression : int {
  Neutral = 0,
  Anger,
  Disgust,
  Fear,
  Happiness,
  Sadness,
  Surprise,
  Other
};

inline constexpr std::array<std::string_view, kNumExpressions> kExpressionNames = {
    "Neutral", "Anger", "Disgust", "Fear", "Happiness", "Sadness", "Surprise", "Other"};

inline constexpr std::array<std::string_view, kNumActionUnits> kActionUnitNames = {
    "AU1", "AU2", "AU4", "AU6", "AU7", "AU10", "AU12", "AU15", "AU23", "AU24", "AU25", "AU26"};

enum class Task { Expression, ValenceArousal, ActionUnits, MultiTask };

std::string_view task_name(Task task);
/// Accepts "expr", "va", "au", "mtl"/"all" (case-insensitive).
std::optional<Task> parse_task(std::string_view text);

enum class FeatureKind { EmbeddingsOnly, ScoresOnly, Concatenated };

std::string_view feature_kind_name(FeatureKind kind);
std::optional<FeatureKind> parse_feature_kind(std::string_view text);

/// Effective model input width for a feature kind: D, 8 or D+8.
std::size_t input_dim(FeatureKind kind, std::size_t embedding_dim);

struct FrameFeatures {
  std::uint32_t frame_index = 0;
  bool detected = false;
  std::vector<float> embedding;  // empty when !detected
  std::vector<float> scores;     // empty when !detected

  bool operator==(const FrameFeatures&) const = default;
};

using AUVector = std::array<std::uint8_t, kNumActionUnits>;

struct ValenceArousal {
  double valence = 0.0;
  double arousal = 0.0;

  bool operator==(const ValenceArousal&) const = default;
};

struct FrameLabels {
  std::optional<int> expression;
  std::optional<AUVector> action_units;
  std::optional<ValenceArousal> va;

  bool has(Task task) const;
  bool operator==(const FrameLabels&) const = default;
};

struct Frame {
  FrameFeatures features;
  FrameLabels labels;

  bool operator==(const Frame&) const = default;
};

struct VideoTrack {
  std::string video_id;
  std::vector<Frame> frames;

  std::size_t total_frames() const noexcept { return frames.size(); }
  bool operator==(const VideoTrack&) const = default;
};

enum class Split { Train, Validation, Test };

struct Dataset {
  std::vector<VideoTrack> tracks;
  std::size_t embedding_dim = 0;
  Split split = Split::Train;

  std::size_t frame_count() const noexcept;
  /// Frames carrying a label for `task` (any label for MultiTask).
  std::size_t labeled_count(Task task) const noexcept;
  bool operator==(const Dataset&) const = default;
};

/// Builds the model input vector for a detected frame.
std::vector<double> effective_input(const FrameFeatures& features, FeatureKind kind);

struct TaskPrediction {
  std::optional<std::array<double, kNumExpressions>> expr_probs;
  std::optional<std::array<double, kNumActionUnits>> au_probs;
  std::optional<ValenceArousal> va;

  bool operator==(const TaskPrediction&) const = default;
};

/// Index of the largest probability; ties resolve to the lowest index.
int argmax(std::span<const double> probs);

struct Violation {
  std::string track;
  std::optional<std::size_t> frame;  // position within the track
  std::string rule;
  std::string detail;
};

/// Reports every broken invariant; never throws on bad data.
std::vector<Violation> validate_dataset(const Dataset& dataset);

std::string to_string(const Violation& v);

}  // namespace affect
