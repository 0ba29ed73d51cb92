#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "affect/datamodel.hpp"

namespace affect {

inline constexpr std::size_t kDefaultHiddenUnits = 128;

/// 0 or 1 hidden layer (ReLU) feeding one or more task output groups:
/// Expression (8, softmax), ValenceArousal (2, tanh), ActionUnits (12, sigmoid).
/// With a hidden layer present it is shared by every group.
struct HeadArchitecture {
  FeatureKind feature_kind = FeatureKind::EmbeddingsOnly;
  std::size_t input_dim = 0;
  std::optional<std::size_t> hidden_units;
  bool expression = false;
  bool valence_arousal = false;
  bool action_units = false;

  /// Output groups needed for `task` (all three for MultiTask).
  static HeadArchitecture for_task(Task task, FeatureKind kind, std::size_t embedding_dim,
                                   std::optional<std::size_t> hidden_units);

  bool has_group(Task task) const;
  /// Throws ConfigError for zero input_dim, zero hidden width or no groups.
  void validate() const;
  bool operator==(const HeadArchitecture&) const = default;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  bool operator==(const DenseLayer& o) const { return weight == o.weight && bias == o.bias; }
};

struct ParameterBlock {
  std::string name;
  std::span<double> values;
};

struct ConstParameterBlock {
  std::string name;
  std::span<const double> values;
};

struct HeadModel {
  HeadArchitecture arch;
  std::uint64_t seed = 0;
  std::optional<DenseLayer> hidden;
  std::optional<DenseLayer> expression;
  std::optional<DenseLayer> valence_arousal;
  std::optional<DenseLayer> action_units;

  /// Every weight/bias array in a fixed order ("hidden.weight", ...).
  std::vector<ParameterBlock> blocks();
  std::vector<ConstParameterBlock> blocks() const;
  /// Same structure with every parameter zero (used for gradients).
  HeadModel zeros_like() const;
  bool all_finite() const;
  bool operator==(const HeadModel&) const = default;
};

/// Fan-in scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero
/// biases, deterministic in `seed`. Layers are drawn hidden, expression,
/// valence/arousal, action units, so a group's weights do not depend on which
/// later groups exist.
HeadModel init_head(const HeadArchitecture& arch, std::uint64_t seed);

/// Throws ShapeError if `features` does not match the architecture input.
TaskPrediction forward(const HeadModel& model, std::span<const double> features);

/// Intermediate values of a batched forward pass; rows are samples.
struct BatchForward {
  Eigen::MatrixXd hidden_pre;
  Eigen::MatrixXd hidden;
  Eigen::MatrixXd expr_logits, expr_probs;
  Eigen::MatrixXd va_pre, va;
  Eigen::MatrixXd au_logits, au_probs;
};

BatchForward forward_batch(const HeadModel& model, const Eigen::MatrixXd& inputs);

/// Loss gradients w.r.t. each group's pre-activation. An empty matrix means the
/// group does not contribute.
struct OutputGradients {
  Eigen::MatrixXd expr_logits;
  Eigen::MatrixXd va_pre;
  Eigen::MatrixXd au_logits;
};

/// Parameter gradients, shaped like `model`.
HeadModel backward(const HeadModel& model, const Eigen::MatrixXd& inputs, const BatchForward& fwd,
                   const OutputGradients& grads);

/// One entry per frame; undetected frames are left empty.
std::vector<std::optional<TaskPrediction>> predict_track(const HeadModel& model,
                                                         const VideoTrack& track, FeatureKind kind);

/// Throws ShapeError naming both sides when a dataset's embedding width does
/// not fit the model.
void check_compatible(const HeadModel& model, std::size_t embedding_dim);

std::string checkpoint_to_json(const HeadModel& model);
HeadModel checkpoint_from_json(const std::string& text);
void save_checkpoint(const std::filesystem::path& path, const HeadModel& model);
HeadModel load_checkpoint(const std::filesystem::path& path);

}  // namespace affect
