#include "affect/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "affect/errors.hpp"
#include "affect/random.hpp"

namespace affect {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    for (auto& x : v) x = rng.normal();
    norm = std::sqrt(dot(v, v));
  }
  for (auto& x : v) x /= norm;
  return v;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TaskMix TaskMix::only(Task task) {
  return {task == Task::Expression || task == Task::MultiTask,
          task == Task::ValenceArousal || task == Task::MultiTask,
          task == Task::ActionUnits || task == Task::MultiTask};
}

void SyntheticSpec::validate() const {
  if (num_tracks == 0) throw ConfigError("synthetic: num_tracks must be >= 1");
  if (frames_per_track == 0) throw ConfigError("synthetic: frames_per_track must be >= 1");
  if (embedding_dim == 0) throw ConfigError("synthetic: embedding_dim must be >= 1");
  if (!(expr_separation >= 0.0)) throw ConfigError("synthetic: expr_separation must be >= 0");
  if (!(va_noise_sd >= 0.0)) throw ConfigError("synthetic: va_noise_sd must be >= 0");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ConfigError("synthetic: dropout_rate must lie in [0,1)");
  for (double r : au_positive_rates)
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("synthetic: AU positive rates must lie in (0,1)");
  if (!(label_persistence >= 0.0 && label_persistence < 1.0))
    throw ConfigError("synthetic: label_persistence must lie in [0,1)");
  if (!(temporal_correlation >= 0.0 && temporal_correlation < 1.0))
    throw ConfigError("synthetic: temporal_correlation must lie in [0,1)");
}

std::array<double, kNumExpressions> GroundTruthModel::expression_posterior(
    std::span<const double> x) const {
  std::array<double, kNumExpressions> logits{};
  for (std::size_t c = 0; c < kNumExpressions; ++c) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < embedding_dim; ++i) {
      const double d = x[i] - centroids[i][c];
      d2 += d * d;
    }
    logits[c] = -0.5 * d2;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (auto& l : logits) z += (l = std::exp(l - top));
  for (auto& l : logits) l /= z;
  return logits;
}

int GroundTruthModel::classify(std::span<const double> x) const {
  return argmax(expression_posterior(x));
}

ValenceArousal GroundTruthModel::valence_arousal(std::span<const double> x) const {
  return {std::tanh(dot(va_weights[0], x) + va_bias[0]),
          std::tanh(dot(va_weights[1], x) + va_bias[1])};
}

std::array<double, kNumActionUnits> GroundTruthModel::au_probs(std::span<const double> x,
                                                               double logit_shift) const {
  std::array<double, kNumActionUnits> p{};
  for (std::size_t j = 0; j < kNumActionUnits; ++j)
    p[j] = sigmoid(dot(au_weights[j], x) + au_bias[j] + logit_shift);
  return p;
}

std::string GroundTruthModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "affect-ground-truth";
  j["version"] = 1;
  j["embedding_dim"] = embedding_dim;
  j["centroids"] = centroids;
  j["va_weights"] = va_weights;
  j["va_bias"] = va_bias;
  j["au_weights"] = au_weights;
  j["au_bias"] = au_bias;
  return j.dump(1) + "\n";
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t dim = spec.embedding_dim;

  // Generating parameters come from their own stream so they do not depend on
  // corpus size.
  Rng param_rng(spec.seed);
  GroundTruthModel truth;
  truth.embedding_dim = dim;
  {
    std::vector<std::vector<double>> basis;
    for (std::size_t c = 0; c < kNumExpressions; ++c) {
      auto v = random_unit(param_rng, dim);
      if (dim >= kNumExpressions) {
        // Gram-Schmidt: orthonormal centroids give exact pairwise distances.
        for (int pass = 0; pass < 2; ++pass)
          for (const auto& b : basis) {
            const double p = dot(v, b);
            for (std::size_t i = 0; i < dim; ++i) v[i] -= p * b[i];
          }
        const double n = std::sqrt(dot(v, v));
        for (auto& x : v) x /= n;
      }
      basis.push_back(std::move(v));
    }
    truth.centroids.assign(dim, {});
    const double scale = spec.expr_separation / std::sqrt(2.0);
    for (std::size_t c = 0; c < kNumExpressions; ++c)
      for (std::size_t i = 0; i < dim; ++i) truth.centroids[i][c] = scale * basis[c][i];
  }
  for (auto& w : truth.va_weights) w = random_unit(param_rng, dim);
  truth.va_bias = {0.0, 0.0};
  truth.au_weights.resize(kNumActionUnits);
  for (std::size_t j = 0; j < kNumActionUnits; ++j) {
    truth.au_weights[j] = random_unit(param_rng, dim);
    for (auto& w : truth.au_weights[j]) w *= spec.au_gain;
    const double r = spec.au_positive_rates[j];
    truth.au_bias[j] = std::log(r / (1.0 - r));
  }

  Rng rng(spec.seed ^ 0x9E3779B97F4A7C15ULL);
  const double rho = spec.temporal_correlation;
  const double innovation = std::sqrt(1.0 - rho * rho);

  auto make_track = [&](const std::string& id) {
    VideoTrack track;
    track.video_id = id;
    track.frames.resize(spec.frames_per_track);
    std::vector<double> latent(dim);
    for (auto& z : latent) z = rng.normal();
    int cls = static_cast<int>(rng.below(kNumExpressions));
    std::vector<double> x(dim);
    bool any_detected = false;

    for (std::size_t t = 0; t < spec.frames_per_track; ++t) {
      if (t > 0) {
        if (!rng.bernoulli(spec.label_persistence))
          cls = static_cast<int>(rng.below(kNumExpressions));
        for (auto& z : latent) z = rho * z + innovation * rng.normal();
      }
      std::vector<float> embedding(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        embedding[i] = static_cast<float>(truth.centroids[i][cls] + latent[i]);
        x[i] = embedding[i];  // labels derive from the stored precision
      }

      auto& frame = track.frames[t];
      frame.features.frame_index = static_cast<std::uint32_t>(t);
      frame.features.detected = !rng.bernoulli(spec.dropout_rate);
      any_detected |= frame.features.detected;

      const double noise_v = rng.normal() * spec.va_noise_sd;
      const double noise_a = rng.normal() * spec.va_noise_sd;
      std::array<double, kNumActionUnits> au_u{};
      for (auto& u : au_u) u = rng.uniform();

      const auto posterior = truth.expression_posterior(x);
      std::vector<float> scores(kNumScores);
      for (std::size_t c = 0; c < kNumScores; ++c) scores[c] = static_cast<float>(posterior[c]);
      frame.features.embedding = std::move(embedding);
      frame.features.scores = std::move(scores);

      if (spec.task_mix.expression) frame.labels.expression = cls;
      if (spec.task_mix.valence_arousal)
        frame.labels.va = ValenceArousal{std::tanh(dot(truth.va_weights[0], x) + truth.va_bias[0] + noise_v),
                                         std::tanh(dot(truth.va_weights[1], x) + truth.va_bias[1] + noise_a)};
      if (spec.task_mix.action_units) {
        const auto p = truth.au_probs(x);
        AUVector bits{};
        for (std::size_t j = 0; j < kNumActionUnits; ++j) bits[j] = au_u[j] < p[j] ? 1 : 0;
        frame.labels.action_units = bits;
      }
    }
    if (!any_detected) track.frames.front().features.detected = true;
    for (auto& frame : track.frames)
      if (!frame.features.detected) {
        frame.features.embedding.clear();
        frame.features.scores.clear();
      }
    return track;
  };

  auto id = [](const char* prefix, std::size_t i) {
    std::string n = std::to_string(i);
    return std::string(prefix) + std::string(n.size() < 3 ? 3 - n.size() : 0, '0') + n;
  };

  SyntheticData data;
  data.train.embedding_dim = dim;
  data.train.split = Split::Train;
  data.validation.embedding_dim = dim;
  data.validation.split = Split::Validation;
  for (std::size_t i = 0; i < spec.num_tracks; ++i) data.train.tracks.push_back(make_track(id("train_", i)));
  for (std::size_t i = 0; i < spec.validation_tracks; ++i)
    data.validation.tracks.push_back(make_track(id("val_", i)));
  data.truth = std::move(truth);
  return data;
}

}  // namespace affect
