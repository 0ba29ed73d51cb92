#include "affect/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "affect/errors.hpp"
#include "affect/metrics.hpp"
#include "affect/parallel.hpp"
#include "affect/random.hpp"

namespace affect {
namespace {

struct ActiveGroups {
  bool expression = false;
  bool valence_arousal = false;
  bool action_units = false;
};

/// Detected training frames with at least one active label, as dense arrays.
struct TrainingRows {
  Eigen::MatrixXd inputs;
  std::vector<std::optional<int>> expr;
  std::vector<std::optional<ValenceArousal>> va;
  std::vector<std::optional<AUVector>> au;
};

TrainingRows collect_rows(const Dataset& data, const ActiveGroups& active, FeatureKind kind,
                          std::size_t input_dim) {
  std::vector<const Frame*> frames;
  for (const auto& t : data.tracks)
    for (const auto& f : t.frames) {
      if (!f.features.detected) continue;
      const bool use = (active.expression && f.labels.expression) || (active.valence_arousal && f.labels.va) ||
                       (active.action_units && f.labels.action_units);
      if (use) frames.push_back(&f);
    }
  TrainingRows rows;
  rows.inputs.resize(static_cast<Eigen::Index>(frames.size()), static_cast<Eigen::Index>(input_dim));
  for (std::size_t r = 0; r < frames.size(); ++r) {
    const auto& f = *frames[r];
    const auto x = effective_input(f.features, kind);
    if (x.size() != input_dim)
      throw ShapeError("training frame " + std::to_string(f.features.frame_index) + ": feature length " +
                       std::to_string(x.size()) + " != model input_dim " + std::to_string(input_dim));
    for (std::size_t c = 0; c < x.size(); ++c)
      rows.inputs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x[c];
    rows.expr.push_back(active.expression ? f.labels.expression : std::nullopt);
    rows.va.push_back(active.valence_arousal ? f.labels.va : std::nullopt);
    rows.au.push_back(active.action_units ? f.labels.action_units : std::nullopt);
  }
  return rows;
}

Task single_task(const ActiveGroups& g) {
  if (g.expression + g.valence_arousal + g.action_units > 1) return Task::MultiTask;
  if (g.expression) return Task::Expression;
  if (g.valence_arousal) return Task::ValenceArousal;
  return Task::ActionUnits;
}

TrainResult run_training(const Dataset& train_set, const Dataset& validation, const HeadArchitecture& arch,
                         const TrainConfig& config, const ActiveGroups& active) {
  config.validate();
  arch.validate();
  if (arch.feature_kind != config.feature_kind)
    throw ConfigError("architecture feature kind differs from the training config");
  check_compatible(init_head(arch, config.seed), train_set.embedding_dim);
  const Task metric_task = single_task(active);

  const auto rows = collect_rows(train_set, active, config.feature_kind, arch.input_dim);
  const auto n = static_cast<std::size_t>(rows.inputs.rows());
  if (n == 0)
    throw ConfigError("training split has no detected frames labeled for " +
                      std::string(task_name(metric_task)));
  if (validation.labeled_count(metric_task) == 0)
    throw ConfigError("validation split has no frames labeled for " + std::string(task_name(metric_task)));

  const auto weights = compute_class_weights(train_set, metric_task, config.uniform_class_weights);

  HeadModel model = init_head(arch, config.seed);
  AdamState adam = AdamState::for_model(model);
  EarlyStopping stopper(config.early_stop_patience);
  TrainResult result;
  result.model = model;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(config.seed ^ 0xA5A5A5A55A5A5A5AULL);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t batches = 0, skipped = 0;

    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, n - start);
      Eigen::MatrixXd x(static_cast<Eigen::Index>(b), rows.inputs.cols());
      for (std::size_t i = 0; i < b; ++i) x.row(static_cast<Eigen::Index>(i)) = rows.inputs.row(static_cast<Eigen::Index>(order[start + i]));
      const auto fwd = forward_batch(model, x);

      OutputGradients grads;
      double loss = 0.0;
      bool contributed = false;

      if (model.expression && active.expression && weights.expr) {
        std::vector<Eigen::Index> idx;
        std::vector<int> labels;
        for (std::size_t i = 0; i < b; ++i)
          if (const auto& y = rows.expr[order[start + i]]) {
            idx.push_back(static_cast<Eigen::Index>(i));
            labels.push_back(*y);
          }
        if (!idx.empty()) {
          const Eigen::MatrixXd probs = fwd.expr_probs(idx, Eigen::all);
          auto r = loss_expr(probs, labels, *weights.expr);
          grads.expr_logits = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(kNumExpressions));
          const double w = config.task_loss_weights[0];
          for (std::size_t k = 0; k < idx.size(); ++k) grads.expr_logits.row(idx[k]) = w * r.grad.row(static_cast<Eigen::Index>(k));
          loss += w * r.value;
          contributed = true;
        }
      }
      if (model.valence_arousal && active.valence_arousal) {
        std::vector<Eigen::Index> idx;
        for (std::size_t i = 0; i < b; ++i)
          if (rows.va[order[start + i]]) idx.push_back(static_cast<Eigen::Index>(i));
        if (idx.size() >= 2) {
          Eigen::MatrixXd labels(static_cast<Eigen::Index>(idx.size()), 2);
          for (std::size_t k = 0; k < idx.size(); ++k) {
            const auto& y = *rows.va[order[start + static_cast<std::size_t>(idx[k])]];
            labels(static_cast<Eigen::Index>(k), 0) = y.valence;
            labels(static_cast<Eigen::Index>(k), 1) = y.arousal;
          }
          const Eigen::MatrixXd preds = fwd.va(idx, Eigen::all);
          auto r = loss_va(preds, labels);
          grads.va_pre = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b), 2);
          const double w = config.task_loss_weights[1];
          for (std::size_t k = 0; k < idx.size(); ++k) grads.va_pre.row(idx[k]) = w * r.grad.row(static_cast<Eigen::Index>(k));
          loss += w * r.value;
          contributed = true;
        }
      }
      if (model.action_units && active.action_units && weights.au_pos) {
        std::vector<Eigen::Index> idx;
        std::vector<AUVector> labels;
        for (std::size_t i = 0; i < b; ++i)
          if (const auto& y = rows.au[order[start + i]]) {
            idx.push_back(static_cast<Eigen::Index>(i));
            labels.push_back(*y);
          }
        if (!idx.empty()) {
          const Eigen::MatrixXd probs = fwd.au_probs(idx, Eigen::all);
          auto r = loss_au(probs, labels, *weights.au_pos);
          grads.au_logits = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(kNumActionUnits));
          const double w = config.task_loss_weights[2];
          for (std::size_t k = 0; k < idx.size(); ++k) grads.au_logits.row(idx[k]) = w * r.grad.row(static_cast<Eigen::Index>(k));
          loss += w * r.value;
          contributed = true;
        }
      }

      if (!contributed) {
        ++skipped;
        continue;
      }
      if (!std::isfinite(loss)) throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch));
      const auto param_grads = backward(model, x, fwd, grads);
      adam_step(model, param_grads, adam, config.learning_rate);
      loss_sum += loss;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    rec.validation_metric = validation_metric(model, validation, metric_task, config.feature_kind, config.jobs);
    rec.skipped_batches = skipped;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.push_back(rec);

    if (stopper.observe(rec.validation_metric)) {
      result.model = model;
      result.best_epoch = epoch;
    }
    if (stopper.should_stop()) break;
  }
  return result;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  for (double w : task_loss_weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("task loss weights must be finite and >= 0");
}

AdamState AdamState::for_model(const HeadModel& model) {
  AdamState s;
  for (const auto& b : model.blocks()) {
    s.first_moment.emplace_back(b.values.size(), 0.0);
    s.second_moment.emplace_back(b.values.size(), 0.0);
  }
  return s;
}

void adam_step(HeadModel& model, const HeadModel& gradients, AdamState& state, double learning_rate) {
  auto params = model.blocks();
  const auto grads = gradients.blocks();
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw ShapeError("adam_step: gradient/state structure does not match the model");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].values.size() != grads[b].values.size() ||
        params[b].values.size() != state.first_moment[b].size())
      throw ShapeError("adam_step: block " + params[b].name + " has mismatched size");
    for (double g : grads[b].values)
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in block " + grads[b].name);
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(kAdamBeta1, t);
  const double correction2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    const auto g = grads[b].values;
    auto p = params[b].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
      v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
    }
  }
}

bool EarlyStopping::observe(double metric) {
  ++epoch_;
  if (std::isfinite(metric) && (!have_best_ || metric > best_)) {
    best_ = metric;
    have_best_ = true;
    best_epoch_ = epoch_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

std::string format_training_log(std::span<const EpochRecord> log) {
  std::string s = "epoch,train_loss,validation_metric,wall_time_s\n";
  char buf[160];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.3f\n", r.epoch, r.train_loss, r.validation_metric,
                  r.wall_seconds);
    s += buf;
  }
  return s;
}

double validation_metric(const HeadModel& model, const Dataset& validation, Task task, FeatureKind kind,
                         std::size_t jobs) {
  std::vector<std::vector<std::optional<TaskPrediction>>> preds(validation.tracks.size());
  parallel_for(validation.tracks.size(), jobs,
               [&](std::size_t i) { preds[i] = predict_track(model, validation.tracks[i], kind); });

  std::vector<int> expr_pred, expr_true;
  std::vector<ValenceArousal> va_pred, va_true;
  std::vector<std::array<double, kNumActionUnits>> au_pred;
  std::vector<AUVector> au_true;
  const bool want_expr = task == Task::Expression || task == Task::MultiTask;
  const bool want_va = task == Task::ValenceArousal || task == Task::MultiTask;
  const bool want_au = task == Task::ActionUnits || task == Task::MultiTask;
  for (std::size_t t = 0; t < validation.tracks.size(); ++t) {
    const auto& frames = validation.tracks[t].frames;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto& p = preds[t][i];
      if (!p) continue;
      const auto& l = frames[i].labels;
      if (want_expr && l.expression && p->expr_probs) {
        expr_pred.push_back(argmax(*p->expr_probs));
        expr_true.push_back(*l.expression);
      }
      if (want_va && l.va && p->va) {
        va_pred.push_back(*p->va);
        va_true.push_back(*l.va);
      }
      if (want_au && l.action_units && p->au_probs) {
        au_pred.push_back(*p->au_probs);
        au_true.push_back(*l.action_units);
      }
    }
  }

  double metric = 0.0;
  bool any = false;
  if (!expr_true.empty()) {
    metric += macro_f1(expr_pred, expr_true).macro;
    any = true;
  }
  if (va_true.size() >= 2) {
    metric += va_metrics(va_pred, va_true).p_va;
    any = true;
  }
  if (!au_true.empty()) {
    metric += au_f1(au_pred, au_true, AUThresholds::uniform(0.5)).p_au;
    any = true;
  }
  if (!any) throw ConfigError("validation split has no detected frames labeled for " + std::string(task_name(task)));
  return metric;
}

TrainResult train(const Dataset& train_set, const Dataset& validation, const HeadArchitecture& arch,
                  const TrainConfig& config) {
  if (config.task == Task::MultiTask) return train_mtl(train_set, validation, arch, config);
  if (!arch.has_group(config.task))
    throw ConfigError("architecture has no output group for task " + std::string(task_name(config.task)));
  ActiveGroups active;
  active.expression = config.task == Task::Expression;
  active.valence_arousal = config.task == Task::ValenceArousal;
  active.action_units = config.task == Task::ActionUnits;
  return run_training(train_set, validation, arch, config, active);
}

TrainResult train_mtl(const Dataset& train_set, const Dataset& validation, const HeadArchitecture& arch,
                      const TrainConfig& config) {
  if (train_set.tracks.empty() || train_set.frame_count() == 0) throw ConfigError("train_mtl: empty dataset");
  ActiveGroups active;
  active.expression = arch.expression && train_set.labeled_count(Task::Expression) > 0;
  active.valence_arousal = arch.valence_arousal && train_set.labeled_count(Task::ValenceArousal) > 0;
  active.action_units = arch.action_units && train_set.labeled_count(Task::ActionUnits) > 0;
  if (!active.expression && !active.valence_arousal && !active.action_units)
    throw ConfigError("train_mtl: no labels for any output group of the architecture");
  return run_training(train_set, validation, arch, config, active);
}

}  // namespace affect
