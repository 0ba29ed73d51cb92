#include "affect/datamodel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace affect {
namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view task_name(Task task) {
  switch (task) {
    case Task::Expression: return "expr";
    case Task::ValenceArousal: return "va";
    case Task::ActionUnits: return "au";
    case Task::MultiTask: return "mtl";
  }
  return "?";
}

std::optional<Task> parse_task(std::string_view text) {
  const auto t = lower(text);
  if (t == "expr") return Task::Expression;
  if (t == "va") return Task::ValenceArousal;
  if (t == "au") return Task::ActionUnits;
  if (t == "mtl" || t == "all") return Task::MultiTask;
  return std::nullopt;
}

std::string_view feature_kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::EmbeddingsOnly: return "embeddings";
    case FeatureKind::ScoresOnly: return "scores";
    case FeatureKind::Concatenated: return "concat";
  }
  return "?";
}

std::optional<FeatureKind> parse_feature_kind(std::string_view text) {
  const auto t = lower(text);
  if (t == "embeddings" || t == "emb") return FeatureKind::EmbeddingsOnly;
  if (t == "scores") return FeatureKind::ScoresOnly;
  if (t == "concat" || t == "concatenated") return FeatureKind::Concatenated;
  return std::nullopt;
}

std::size_t input_dim(FeatureKind kind, std::size_t embedding_dim) {
  switch (kind) {
    case FeatureKind::EmbeddingsOnly: return embedding_dim;
    case FeatureKind::ScoresOnly: return kNumScores;
    case FeatureKind::Concatenated: return embedding_dim + kNumScores;
  }
  return 0;
}

bool FrameLabels::has(Task task) const {
  switch (task) {
    case Task::Expression: return expression.has_value();
    case Task::ValenceArousal: return va.has_value();
    case Task::ActionUnits: return action_units.has_value();
    case Task::MultiTask:
      return expression.has_value() || va.has_value() || action_units.has_value();
  }
  return false;
}

std::size_t Dataset::frame_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tracks) n += t.frames.size();
  return n;
}

std::size_t Dataset::labeled_count(Task task) const noexcept {
  std::size_t n = 0;
  for (const auto& t : tracks)
    for (const auto& f : t.frames)
      if (f.labels.has(task)) ++n;
  return n;
}

std::vector<double> effective_input(const FrameFeatures& features, FeatureKind kind) {
  std::vector<double> out;
  if (kind != FeatureKind::ScoresOnly)
    out.insert(out.end(), features.embedding.begin(), features.embedding.end());
  if (kind != FeatureKind::EmbeddingsOnly)
    out.insert(out.end(), features.scores.begin(), features.scores.end());
  return out;
}

int argmax(std::span<const double> probs) {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

std::vector<Violation> validate_dataset(const Dataset& dataset) {
  std::vector<Violation> out;
  auto report = [&](const std::string& track, std::optional<std::size_t> frame,
                    std::string rule, std::string detail) {
    out.push_back({track, frame, std::move(rule), std::move(detail)});
  };

  for (const auto& track : dataset.tracks) {
    if (track.frames.empty()) report(track.video_id, std::nullopt, "empty track", "T must be >= 1");

    for (std::size_t i = 0; i < track.frames.size(); ++i) {
      const auto& [features, labels] = track.frames[i];

      if (i > 0 && features.frame_index <= track.frames[i - 1].features.frame_index)
        report(track.video_id, i, "frame order",
               "frame_index " + std::to_string(features.frame_index) + " follows " +
                   std::to_string(track.frames[i - 1].features.frame_index));

      if (features.detected) {
        if (features.embedding.size() != dataset.embedding_dim)
          report(track.video_id, i, "embedding length",
                 std::to_string(features.embedding.size()) + " != D=" +
                     std::to_string(dataset.embedding_dim));
        if (std::any_of(features.embedding.begin(), features.embedding.end(),
                        [](float v) { return !std::isfinite(v); }))
          report(track.video_id, i, "embedding finite", "non-finite embedding value");

        if (features.scores.size() != kNumScores) {
          report(track.video_id, i, "scores length",
                 std::to_string(features.scores.size()) + " != 8");
        } else {
          double sum = 0.0;
          bool in_range = true;
          for (float s : features.scores) {
            sum += s;
            in_range = in_range && s >= 0.0f && s <= 1.0f;
          }
          if (!in_range) report(track.video_id, i, "scores range", "score outside [0,1]");
          if (std::abs(sum - 1.0) > 1e-4)
            report(track.video_id, i, "scores simplex", "scores sum to " + std::to_string(sum));
        }
      }

      if (labels.expression &&
          (*labels.expression < 0 || *labels.expression >= static_cast<int>(kNumExpressions)))
        report(track.video_id, i, "expression range",
               "class " + std::to_string(*labels.expression));
      if (labels.action_units &&
          std::any_of(labels.action_units->begin(), labels.action_units->end(),
                      [](std::uint8_t b) { return b > 1; }))
        report(track.video_id, i, "au value", "AU entry not in {0,1}");
      if (labels.va) {
        const auto [v, a] = *labels.va;
        if (!(v >= -1.0 && v <= 1.0 && a >= -1.0 && a <= 1.0))
          report(track.video_id, i, "va range", "valence/arousal outside [-1,1]");
      }
    }
  }

  if (dataset.split == Split::Train && dataset.labeled_count(Task::MultiTask) == 0)
    report("", std::nullopt, "labeled frames", "training split has no labeled frames");
  return out;
}

std::string to_string(const Violation& v) {
  std::string s = v.track.empty() ? std::string("<dataset>") : v.track;
  if (v.frame) s += "[" + std::to_string(*v.frame) + "]";
  return s + ": " + v.rule + ": " + v.detail;
}

}  // namespace affect
