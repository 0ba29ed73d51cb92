#include "affect/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "affect/errors.hpp"

namespace affect {
namespace {

struct Moments {
  double mean_x = 0, mean_y = 0, var_x = 0, var_y = 0, cov = 0;
  double denominator() const {
    const double d = mean_x - mean_y;
    return var_x + var_y + d * d;
  }
};

Moments moments(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw ShapeError("ccc: sequences differ in length (" + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()) + ")");
  if (x.size() < 2) throw ShapeError("ccc: need at least 2 values, got " + std::to_string(x.size()));
  const auto n = static_cast<double>(x.size());
  Moments m;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m.mean_x += x[i];
    m.mean_y += y[i];
  }
  m.mean_x /= n;
  m.mean_y /= n;
  // rounding in the mean would otherwise turn constant input into a tiny nonzero variance
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) m.mean_x = x[0];
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) m.mean_y = y[0];
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - m.mean_x;
    const double dy = y[i] - m.mean_y;
    m.var_x += dx * dx;
    m.var_y += dy * dy;
    m.cov += dx * dy;
  }
  m.var_x /= n;
  m.var_y /= n;
  m.cov /= n;
  return m;
}

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] = m(r, c);
  return out;
}

}  // namespace

double ccc(std::span<const double> x, std::span<const double> y) {
  const auto m = moments(x, y);
  const double den = m.denominator();
  return den == 0.0 ? 0.0 : 2.0 * m.cov / den;
}

std::vector<double> ccc_gradient(std::span<const double> x, std::span<const double> y) {
  const auto m = moments(x, y);
  const double den = m.denominator();
  std::vector<double> g(x.size(), 0.0);
  if (den == 0.0) return g;
  const auto n = static_cast<double>(x.size());
  const double num = 2.0 * m.cov;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d_num = 2.0 * (y[i] - m.mean_y) / n;
    const double d_den = 2.0 * (x[i] - m.mean_x) / n + 2.0 * (m.mean_x - m.mean_y) / n;
    g[i] = (d_num * den - num * d_den) / (den * den);
  }
  return g;
}

LossResult loss_expr(const Eigen::MatrixXd& probs, std::span<const int> labels,
                     const std::array<double, kNumExpressions>& weights) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size() ||
      static_cast<std::size_t>(probs.cols()) != kNumExpressions)
    throw ShapeError("loss_expr: probs must be B x 8 with B labels");
  LossResult r;
  r.grad = probs;
  const auto b = static_cast<double>(labels.size());
  if (labels.empty()) return r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const int y = labels[i];
    if (y < 0 || y >= static_cast<int>(kNumExpressions)) throw ShapeError("loss_expr: label out of range");
    const double w = weights[static_cast<std::size_t>(y)];
    r.value -= w * std::log(std::max(probs(row, y), kLogClamp));
    r.grad(row, y) -= 1.0;
    r.grad.row(row) *= w / b;
  }
  r.value /= b;
  return r;
}

LossResult loss_va(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& labels) {
  if (predictions.rows() != labels.rows() || predictions.cols() != 2 || labels.cols() != 2)
    throw ShapeError("loss_va: predictions and labels must both be B x 2");
  LossResult r;
  r.grad = Eigen::MatrixXd::Zero(predictions.rows(), 2);
  double total_ccc = 0.0;
  for (Eigen::Index c = 0; c < 2; ++c) {
    const auto pred = column(predictions, c);
    const auto truth = column(labels, c);
    total_ccc += ccc(pred, truth);
    const auto g = ccc_gradient(pred, truth);
    for (Eigen::Index i = 0; i < predictions.rows(); ++i) {
      const double p = pred[static_cast<std::size_t>(i)];
      r.grad(i, c) = -0.5 * g[static_cast<std::size_t>(i)] * (1.0 - p * p);
    }
  }
  r.value = 1.0 - 0.5 * total_ccc;
  return r;
}

LossResult loss_au(const Eigen::MatrixXd& probs, std::span<const AUVector> labels,
                   const std::array<double, kNumActionUnits>& positive_weights) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size() ||
      static_cast<std::size_t>(probs.cols()) != kNumActionUnits)
    throw ShapeError("loss_au: probs must be B x 12 with B labels");
  LossResult r;
  r.grad = Eigen::MatrixXd::Zero(probs.rows(), probs.cols());
  if (labels.empty()) return r;
  const double count = static_cast<double>(labels.size() * kNumActionUnits);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < kNumActionUnits; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      const double p = probs(row, col);
      const double w = positive_weights[j];
      if (labels[i][j]) {
        r.value -= w * std::log(std::max(p, kLogClamp));
        r.grad(row, col) = -w * (1.0 - p) / count;
      } else {
        r.value -= std::log(std::max(1.0 - p, kLogClamp));
        r.grad(row, col) = p / count;
      }
    }
  }
  r.value /= count;
  return r;
}

std::array<double, kNumExpressions> expression_class_weights(std::span<const int> labels) {
  std::array<std::size_t, kNumExpressions> counts{};
  for (int y : labels) {
    if (y < 0 || y >= static_cast<int>(kNumExpressions))
      throw ConfigError("class weights: label " + std::to_string(y) + " out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  std::array<double, kNumExpressions> w{};
  const auto n = static_cast<double>(labels.size());
  for (std::size_t c = 0; c < kNumExpressions; ++c) {
    if (counts[c] == 0)
      throw ConfigError("class weights: expression class " + std::to_string(c) + " (" +
                        std::string(kExpressionNames[c]) +
                        ") has no labeled frames; use uniform weights (--uniform-weights)");
    w[c] = n / (static_cast<double>(kNumExpressions) * static_cast<double>(counts[c]));
  }
  return w;
}

std::array<double, kNumActionUnits> au_positive_weights(std::span<const AUVector> labels) {
  std::array<std::size_t, kNumActionUnits> pos{};
  for (const auto& l : labels)
    for (std::size_t j = 0; j < kNumActionUnits; ++j) pos[j] += l[j] ? 1 : 0;
  std::array<double, kNumActionUnits> w{};
  for (std::size_t j = 0; j < kNumActionUnits; ++j) {
    const std::size_t neg = labels.size() - pos[j];
    if (pos[j] == 0 || neg == 0)
      throw ConfigError("class weights: " + std::string(kActionUnitNames[j]) + " has no " +
                        (pos[j] == 0 ? "positive" : "negative") +
                        " frames; use uniform weights (--uniform-weights)");
    w[j] = static_cast<double>(neg) / static_cast<double>(pos[j]);
  }
  return w;
}

ClassWeights compute_class_weights(const Dataset& dataset, Task task, bool uniform) {
  ClassWeights cw;
  const bool want_expr = task == Task::Expression || task == Task::MultiTask;
  const bool want_au = task == Task::ActionUnits || task == Task::MultiTask;
  std::vector<int> expr;
  std::vector<AUVector> au;
  for (const auto& t : dataset.tracks)
    for (const auto& f : t.frames) {
      if (!f.features.detected) continue;
      if (f.labels.expression) expr.push_back(*f.labels.expression);
      if (f.labels.action_units) au.push_back(*f.labels.action_units);
    }
  // For multi-task training a group without any labels gets no weights; its
  // loss never fires.
  if (want_expr && (task == Task::Expression || !expr.empty())) {
    if (uniform) cw.expr = std::array<double, kNumExpressions>{1, 1, 1, 1, 1, 1, 1, 1};
    else cw.expr = expression_class_weights(expr);
  }
  if (want_au && (task == Task::ActionUnits || !au.empty())) {
    if (uniform) {
      std::array<double, kNumActionUnits> ones{};
      ones.fill(1.0);
      cw.au_pos = ones;
    } else {
      cw.au_pos = au_positive_weights(au);
    }
  }
  return cw;
}

}  // namespace affect
