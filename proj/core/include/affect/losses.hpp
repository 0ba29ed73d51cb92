#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "affect/datamodel.hpp"

namespace affect {

/// Probabilities are clamped to this floor before taking logs.
inline constexpr double kLogClamp = 1e-12;

/// Concordance correlation coefficient with population (1/n) moments:
/// 2 cov / (var_x + var_y + (mean_x - mean_y)^2). Returns 0 when the
/// denominator is 0. Throws ShapeError for unequal lengths or n < 2.
double ccc(std::span<const double> x, std::span<const double> y);

/// d ccc(x, y) / d x_i for every i (zero when the denominator is 0).
std::vector<double> ccc_gradient(std::span<const double> x, std::span<const double> y);

struct LossResult {
  double value = 0.0;
  Eigen::MatrixXd grad;  // same shape as the pre-activation batch
};

/// Mean over rows of -w[y] log p[y]; gradient w.r.t. the softmax logits.
LossResult loss_expr(const Eigen::MatrixXd& probs, std::span<const int> labels,
                     const std::array<double, kNumExpressions>& weights);

/// 1 - 0.5 (CCC(v^, v) + CCC(a^, a)) over the batch. `predictions` holds the
/// tanh outputs (B x 2); the gradient is w.r.t. the pre-tanh values.
LossResult loss_va(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& labels);

/// Mean over rows and units of -[w_i y log p + (1 - y) log(1 - p)];
/// gradient w.r.t. the sigmoid logits.
LossResult loss_au(const Eigen::MatrixXd& probs, std::span<const AUVector> labels,
                   const std::array<double, kNumActionUnits>& positive_weights);

struct ClassWeights {
  std::optional<std::array<double, kNumExpressions>> expr;
  std::optional<std::array<double, kNumActionUnits>> au_pos;
};

/// w_c = N / (8 N_c). Throws ConfigError naming the empty class.
std::array<double, kNumExpressions> expression_class_weights(std::span<const int> labels);
/// Per-unit N_neg / N_pos. Throws ConfigError if a unit lacks positives or negatives.
std::array<double, kNumActionUnits> au_positive_weights(std::span<const AUVector> labels);

/// Weights for the task groups present in `task`, counted over detected,
/// labeled frames. With `uniform` every weight is 1.
ClassWeights compute_class_weights(const Dataset& dataset, Task task, bool uniform = false);

}  // namespace affect
