#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "affect/datamodel.hpp"
#include "affect/heads.hpp"
#include "affect/losses.hpp"

namespace affect {

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

struct TrainConfig {
  Task task = Task::Expression;
  FeatureKind feature_kind = FeatureKind::EmbeddingsOnly;
  double learning_rate = 1e-3;
  std::size_t max_epochs = 20;
  std::size_t batch_size = 256;
  std::size_t early_stop_patience = 5;
  std::uint64_t seed = 0;
  bool uniform_class_weights = false;
  /// Multi-task loss multipliers: expression, valence/arousal, action units.
  std::array<double, 3> task_loss_weights = {1.0, 1.0, 1.0};
  /// Threads used for validation prediction; results do not depend on it.
  std::size_t jobs = 1;

  /// Throws ConfigError for lr <= 0, zero epochs/patience/batch.
  void validate() const;
};

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  static AdamState for_model(const HeadModel& model);
};

/// One Adam update (bias-corrected, beta1 0.9, beta2 0.999, eps 1e-8).
/// Throws NumericError naming the block if a gradient is not finite.
void adam_step(HeadModel& model, const HeadModel& gradients, AdamState& state, double learning_rate);

/// Tracks the best metric; improvement must be strict.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records the metric of the next epoch; true when it is a new best.
  bool observe(double metric);
  bool should_stop() const { return since_best_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_ = 0.0;
  bool have_best_ = false;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_metric = 0.0;
  double wall_seconds = 0.0;
  std::size_t skipped_batches = 0;
};

struct TrainResult {
  HeadModel model;
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
};

/// "epoch,train_loss,validation_metric,wall_time_s" rows.
std::string format_training_log(std::span<const EpochRecord> log);

/// Challenge metric of `task` on detected, labeled validation frames
/// (MultiTask: sum of the components that have labels). AU uses threshold 0.5.
double validation_metric(const HeadModel& model, const Dataset& validation, Task task, FeatureKind kind,
                         std::size_t jobs = 1);

/// Mini-batch Adam on one task with early stopping on the validation metric.
TrainResult train(const Dataset& train_set, const Dataset& validation, const HeadArchitecture& arch,
                  const TrainConfig& config);

/// Joint training of every output group in `arch`: loss = sum of weighted
/// group losses, each over the frames that carry that group's label.
TrainResult train_mtl(const Dataset& train_set, const Dataset& validation, const HeadArchitecture& arch,
                      const TrainConfig& config);

}  // namespace affect
