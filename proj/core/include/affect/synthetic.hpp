#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "affect/datamodel.hpp"

namespace affect {

struct TaskMix {
  bool expression = true;
  bool valence_arousal = true;
  bool action_units = true;

  static TaskMix only(Task task);
};

/// Parameters of the deterministic synthetic corpus.
struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t num_tracks = 4;         // training tracks
  std::size_t validation_tracks = 1;
  std::size_t frames_per_track = 500;
  std::size_t embedding_dim = 32;
  TaskMix task_mix;
  double expr_separation = 6.0;       // pairwise centroid distance
  double va_noise_sd = 0.1;           // added to the pre-tanh valence/arousal value
  std::array<double, kNumActionUnits> au_positive_rates = {0.3, 0.3, 0.3, 0.3, 0.3, 0.3,
                                                           0.3, 0.3, 0.3, 0.3, 0.3, 0.3};
  double dropout_rate = 0.0;          // fraction of undetected frames
  double label_persistence = 0.95;    // P(expression class carries over to the next frame)
  double temporal_correlation = 0.95; // AR(1) coefficient of the per-frame latent noise
  double au_gain = 2.5;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
};

/// The generating parameters, kept so tests can compare trained heads
/// against the generator's own decision rules.
struct GroundTruthModel {
  std::size_t embedding_dim = 0;
  std::vector<std::array<double, kNumExpressions>> centroids;  // [D][8], column c = class centroid
  std::array<std::vector<double>, 2> va_weights;               // valence, arousal directions
  std::array<double, 2> va_bias{};
  std::vector<std::vector<double>> au_weights;                 // [12][D]
  std::array<double, kNumActionUnits> au_bias{};

  /// Posterior over classes under unit isotropic noise (also the stored scores).
  std::array<double, kNumExpressions> expression_posterior(std::span<const double> x) const;
  int classify(std::span<const double> x) const;
  ValenceArousal valence_arousal(std::span<const double> x) const;
  /// logit_shift moves every AU's calibration; 0 is the generating model.
  std::array<double, kNumActionUnits> au_probs(std::span<const double> x,
                                               double logit_shift = 0.0) const;
  std::string to_json() const;
};

struct SyntheticData {
  Dataset train;
  Dataset validation;
  GroundTruthModel truth;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace affect
