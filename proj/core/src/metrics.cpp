#include "affect/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "affect/errors.hpp"
#include "affect/losses.hpp"

namespace affect {
namespace {

using Json = nlohmann::ordered_json;

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": predictions and labels differ in length");
  if (a == 0) throw ShapeError(std::string(what) + ": no frames to evaluate");
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

template <typename T>
void put(Json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? Json(*v) : Json(nullptr);
}

template <typename T>
void get(const Json& j, const char* key, std::optional<T>& v) {
  if (j.contains(key) && !j.at(key).is_null()) v = j.at(key).get<T>();
}

}  // namespace

double binary_f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t den = 2 * tp + fp + fn;
  return den == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(den);
}

F1Result macro_f1(std::span<const int> predicted, std::span<const int> truth, std::size_t num_classes) {
  check_lengths(predicted.size(), truth.size(), "macro_f1");
  std::vector<std::size_t> tp(num_classes), fp(num_classes), fn(num_classes);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto p = static_cast<std::size_t>(predicted[i]);
    const auto t = static_cast<std::size_t>(truth[i]);
    if (p >= num_classes || t >= num_classes) throw ShapeError("macro_f1: class id out of range");
    if (p == t) {
      ++tp[p];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  F1Result r;
  r.per_class.resize(num_classes);
  double sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    r.per_class[c] = binary_f1(tp[c], fp[c], fn[c]);
    if (tp[c] + fp[c] + fn[c] == 0) r.undefined_classes.push_back(static_cast<int>(c));
    sum += r.per_class[c];
  }
  r.macro = sum / static_cast<double>(num_classes);
  return r;
}

double unbalanced_accuracy(std::span<const int> predicted, std::span<const int> truth) {
  check_lengths(predicted.size(), truth.size(), "unbalanced_accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

AUF1Result au_f1(std::span<const std::array<double, kNumActionUnits>> probs,
                 std::span<const AUVector> labels, const AUThresholds& thresholds) {
  check_lengths(probs.size(), labels.size(), "au_f1");
  std::array<std::size_t, kNumActionUnits> tp{}, fp{}, fn{};
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto bits = binarize(probs[i], thresholds);
    for (std::size_t j = 0; j < kNumActionUnits; ++j) {
      if (bits[j] && labels[i][j]) ++tp[j];
      else if (bits[j]) ++fp[j];
      else if (labels[i][j]) ++fn[j];
    }
  }
  AUF1Result r;
  double sum = 0.0;
  for (std::size_t j = 0; j < kNumActionUnits; ++j) sum += (r.per_au[j] = binary_f1(tp[j], fp[j], fn[j]));
  r.p_au = sum / static_cast<double>(kNumActionUnits);
  return r;
}

VAMetrics va_metrics(std::span<const ValenceArousal> predicted, std::span<const ValenceArousal> truth) {
  if (predicted.size() != truth.size()) throw ShapeError("va_metrics: predictions and labels differ in length");
  if (predicted.size() < 2) throw ShapeError("va_metrics: need at least 2 labeled frames");
  std::vector<double> pv, pa, tv, ta;
  pv.reserve(predicted.size());
  pa.reserve(predicted.size());
  tv.reserve(predicted.size());
  ta.reserve(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    pv.push_back(predicted[i].valence);
    pa.push_back(predicted[i].arousal);
    tv.push_back(truth[i].valence);
    ta.push_back(truth[i].arousal);
  }
  VAMetrics m;
  m.ccc_v = ccc(pv, tv);
  m.ccc_a = ccc(pa, ta);
  m.p_va = 0.5 * (m.ccc_v + m.ccc_a);
  return m;
}

double p_mtl(std::optional<double> p_expr, std::optional<double> p_va, std::optional<double> p_au) {
  if (!p_expr || !p_va || !p_au)
    throw ConfigError(std::string("P_MTL needs all three components; missing:") + (p_expr ? "" : " P_EXPR") +
                      (p_va ? "" : " P_VA") + (p_au ? "" : " P_AU"));
  return *p_expr + *p_va + *p_au;
}

void MetricsReport::finalize() {
  if (p_expr && p_va && p_au) p_mtl = affect::p_mtl(p_expr, p_va, p_au);
  else p_mtl.reset();
}

std::string MetricsReport::to_text() const {
  std::string s;
  s += "task: " + task + "\n";
  s += "smoothing: " + smoothing_used + "\n";
  s += "frames: " + std::to_string(frames) + "\n";
  if (p_expr) {
    s += "\nexpression\n";
    s += "  P_EXPR (macro F1): " + fmt(*p_expr) + "\n";
    if (accuracy) s += "  accuracy: " + fmt(*accuracy) + "\n";
    if (per_class_f1)
      for (std::size_t c = 0; c < per_class_f1->size(); ++c) {
        const bool undefined =
            std::find(undefined_classes.begin(), undefined_classes.end(), static_cast<int>(c)) !=
            undefined_classes.end();
        s += "  " + std::string(kExpressionNames[c]) + ": " + fmt((*per_class_f1)[c]) +
             (undefined ? "  (never predicted nor present)" : "") + "\n";
      }
  }
  if (p_au) {
    s += "\naction units\n";
    s += "  P_AU (mean F1): " + fmt(*p_au) + "\n";
    if (per_au_f1)
      for (std::size_t j = 0; j < kNumActionUnits; ++j)
        s += "  " + std::string(kActionUnitNames[j]) + ": " + fmt((*per_au_f1)[j]) +
             (thresholds_used ? "  (threshold " + fmt((*thresholds_used)[j], 2) + ")" : "") + "\n";
  }
  if (p_va) {
    s += "\nvalence-arousal\n";
    s += "  CCC_V: " + fmt(*ccc_v) + "\n";
    s += "  CCC_A: " + fmt(*ccc_a) + "\n";
    s += "  P_VA: " + fmt(*p_va) + "\n";
  }
  if (p_mtl) s += "\nP_MTL: " + fmt(*p_mtl) + "\n";
  if (!provenance.empty()) {
    s += "\nprovenance\n";
    for (const auto& [k, v] : provenance) s += "  " + k + ": " + v + "\n";
  }
  return s;
}

std::string MetricsReport::to_json() const {
  Json j;
  j["task"] = task;
  put(j, "p_expr", p_expr);
  put(j, "per_class_f1", per_class_f1);
  j["undefined_classes"] = undefined_classes;
  put(j, "accuracy", accuracy);
  put(j, "per_au_f1", per_au_f1);
  put(j, "p_au", p_au);
  put(j, "ccc_v", ccc_v);
  put(j, "ccc_a", ccc_a);
  put(j, "p_va", p_va);
  put(j, "p_mtl", p_mtl);
  put(j, "thresholds_used", thresholds_used);
  j["smoothing_used"] = smoothing_used;
  j["frames"] = frames;
  j["provenance"] = provenance;
  return j.dump(1) + "\n";
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  try {
    const auto j = Json::parse(text);
    MetricsReport r;
    r.task = j.at("task").get<std::string>();
    get(j, "p_expr", r.p_expr);
    get(j, "per_class_f1", r.per_class_f1);
    if (j.contains("undefined_classes")) r.undefined_classes = j.at("undefined_classes").get<std::vector<int>>();
    get(j, "accuracy", r.accuracy);
    get(j, "per_au_f1", r.per_au_f1);
    get(j, "p_au", r.p_au);
    get(j, "ccc_v", r.ccc_v);
    get(j, "ccc_a", r.ccc_a);
    get(j, "p_va", r.p_va);
    get(j, "p_mtl", r.p_mtl);
    get(j, "thresholds_used", r.thresholds_used);
    if (j.contains("smoothing_used")) r.smoothing_used = j.at("smoothing_used").get<std::string>();
    if (j.contains("frames")) r.frames = j.at("frames").get<std::size_t>();
    if (j.contains("provenance")) r.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
    return r;
  } catch (const Json::exception& e) {
    throw Error(std::string("malformed metrics report: ") + e.what());
  }
}

}  // namespace affect
