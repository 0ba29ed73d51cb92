#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affect/datamodel.hpp"
#include "affect/postprocess.hpp"

namespace affect {

struct F1Result {
  std::vector<double> per_class;
  double macro = 0.0;
  /// Classes neither predicted nor present: F1 is 0 by convention.
  std::vector<int> undefined_classes;
};

/// Per-class 2TP / (2TP + FP + FN) (0 when that is 0/0) and their unweighted mean.
F1Result macro_f1(std::span<const int> predicted, std::span<const int> truth,
                  std::size_t num_classes = kNumExpressions);

double unbalanced_accuracy(std::span<const int> predicted, std::span<const int> truth);

struct AUF1Result {
  std::array<double, kNumActionUnits> per_au{};
  double p_au = 0.0;
};

/// Binarizes prob >= threshold, then per-AU positive-class F1 and their mean.
AUF1Result au_f1(std::span<const std::array<double, kNumActionUnits>> probs,
                 std::span<const AUVector> labels, const AUThresholds& thresholds);

/// F1 of a single binary column; 0/0 counts as 0.
double binary_f1(std::size_t tp, std::size_t fp, std::size_t fn);

struct VAMetrics {
  double ccc_v = 0.0;
  double ccc_a = 0.0;
  double p_va = 0.0;
};

/// CCC pooled over every frame given (dataset level). Throws for < 2 frames.
VAMetrics va_metrics(std::span<const ValenceArousal> predicted, std::span<const ValenceArousal> truth);

/// P_EXPR + P_VA + P_AU. Throws ConfigError if any component is missing.
double p_mtl(std::optional<double> p_expr, std::optional<double> p_va, std::optional<double> p_au);

struct MetricsReport {
  std::string task;
  std::optional<double> p_expr;
  std::optional<std::vector<double>> per_class_f1;
  std::vector<int> undefined_classes;
  std::optional<double> accuracy;
  std::optional<std::array<double, kNumActionUnits>> per_au_f1;
  std::optional<double> p_au;
  std::optional<double> ccc_v;
  std::optional<double> ccc_a;
  std::optional<double> p_va;
  std::optional<double> p_mtl;
  std::optional<std::array<double, kNumActionUnits>> thresholds_used;
  std::string smoothing_used = "frame-level";
  std::size_t frames = 0;
  /// Configuration provenance (checkpoint, data paths, flags).
  std::map<std::string, std::string> provenance;

  /// Fills p_mtl when every component is present.
  void finalize();
  std::string to_text() const;
  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);
};

}  // namespace affect
