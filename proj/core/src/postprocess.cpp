#include "affect/postprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "affect/errors.hpp"
#include "affect/ingest.hpp"

namespace affect {
namespace {

template <std::size_t N>
std::array<double, N> lerp(const std::array<double, N>& a, const std::array<double, N>& b, double alpha) {
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = (1.0 - alpha) * a[i] + alpha * b[i];
  return out;
}

template <std::size_t N>
void renormalize(std::array<double, N>& p) {
  double sum = 0.0;
  for (double v : p) sum += v;
  if (sum > 0.0)
    for (double& v : p) v /= sum;
}

TaskPrediction interpolate(const TaskPrediction& a, const TaskPrediction& b, double alpha) {
  TaskPrediction out;
  if (a.expr_probs && b.expr_probs) {
    out.expr_probs = lerp(*a.expr_probs, *b.expr_probs, alpha);
    renormalize(*out.expr_probs);
  }
  if (a.au_probs && b.au_probs) out.au_probs = lerp(*a.au_probs, *b.au_probs, alpha);
  if (a.va && b.va)
    out.va = ValenceArousal{(1.0 - alpha) * a.va->valence + alpha * b.va->valence,
                            (1.0 - alpha) * a.va->arousal + alpha * b.va->arousal};
  return out;
}

/// Mean anchored at the first value, so a constant window returns that value
/// bit-exactly; clamped to the window range.
double window_mean(std::span<const double> values) {
  const double base = values.front();
  double dev = 0.0, lo = base, hi = base;
  for (double v : values) {
    dev += v - base;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return std::clamp(base + dev / static_cast<double>(values.size()), lo, hi);
}

double window_median(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

std::string describe(const SmoothingConfig& config) {
  if (config.k == 1) return "frame-level";
  std::string s = (config.kind == SmoothingKind::Mean ? "mean," : "median,") + std::to_string(config.k);
  if (config.window_style == WindowStyle::CenteredExclusive) s += ",exclusive";
  return s;
}

SmoothingConfig parse_smoothing(const std::string& text) {
  SmoothingConfig cfg;
  if (text.empty() || text == "none" || text == "frame-level") return cfg;
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(',', start);
    parts.push_back(text.substr(start, pos == std::string::npos ? pos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (parts.size() < 2 || parts.size() > 3)
    throw ConfigError("smoothing must look like mean,5 or median,15[,exclusive], got \"" + text + "\"");
  if (parts[0] == "mean") cfg.kind = SmoothingKind::Mean;
  else if (parts[0] == "median") cfg.kind = SmoothingKind::Median;
  else throw ConfigError("unknown smoothing kind \"" + parts[0] + "\"");
  long k = 0;
  const auto [ptr, ec] = std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), k);
  if (ec != std::errc() || ptr != parts[1].data() + parts[1].size() || k < 1)
    throw ConfigError("smoothing kernel must be an integer >= 1, got \"" + parts[1] + "\"");
  cfg.k = static_cast<std::size_t>(k);
  if (parts.size() == 3) {
    if (parts[2] == "exclusive") cfg.window_style = WindowStyle::CenteredExclusive;
    else if (parts[2] == "centered") cfg.window_style = WindowStyle::CenteredInclusive;
    else throw ConfigError("unknown window style \"" + parts[2] + "\"");
  }
  return cfg;
}

AUThresholds::AUThresholds(const std::array<double, kNumActionUnits>& v) : values(v) {
  for (std::size_t j = 0; j < kNumActionUnits; ++j)
    if (!(v[j] > 0.0 && v[j] < 1.0))
      throw ConfigError("threshold for " + std::string(kActionUnitNames[j]) + " must lie in (0,1)");
}

AUThresholds AUThresholds::uniform(double t) {
  std::array<double, kNumActionUnits> v{};
  v.fill(t);
  return AUThresholds(v);
}

std::string format_thresholds(const AUThresholds& t) {
  std::string s;
  for (std::size_t j = 0; j < kNumActionUnits; ++j) {
    if (j) s += ',';
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, t.values[j]);
    s.append(buf, ptr);
  }
  return s;
}

AUThresholds parse_thresholds(const std::string& text) {
  std::string line = text;
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r' || line.back() == ' '))
    line.pop_back();
  if (line.find('\n') != std::string::npos) throw ParseError("thresholds must be a single line", 2);
  std::array<double, kNumActionUnits> v{};
  std::size_t start = 0, count = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    std::string tok = line.substr(start, pos == std::string::npos ? pos : pos - start);
    while (!tok.empty() && tok.front() == ' ') tok.erase(tok.begin());
    while (!tok.empty() && tok.back() == ' ') tok.pop_back();
    if (count >= kNumActionUnits) throw ParseError("expected 12 thresholds, got more", 1);
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v[count]);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
      throw ParseError("non-numeric threshold \"" + tok + "\"", 1);
    ++count;
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (count != kNumActionUnits) throw ParseError("expected 12 thresholds, got " + std::to_string(count), 1);
  try {
    return AUThresholds(v);
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), 1);
  }
}

AUThresholds read_thresholds(const std::filesystem::path& path) {
  try {
    return parse_thresholds(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

void write_thresholds(const std::filesystem::path& path, const AUThresholds& t) {
  write_text_file(path, format_thresholds(t) + "\n");
}

AUVector binarize(const std::array<double, kNumActionUnits>& probs, const AUThresholds& t) {
  AUVector bits{};
  for (std::size_t j = 0; j < kNumActionUnits; ++j) bits[j] = probs[j] >= t.values[j] ? 1 : 0;
  return bits;
}

std::vector<TaskPrediction> interpolate_missing(std::span<const std::optional<TaskPrediction>> predictions,
                                                std::span<const std::uint32_t> frame_indices,
                                                std::string_view track_id) {
  const std::size_t n = predictions.size();
  if (!frame_indices.empty() && frame_indices.size() != n)
    throw ShapeError("interpolate_missing: frame index count differs from prediction count");
  auto position = [&](std::size_t i) {
    return frame_indices.empty() ? static_cast<double>(i) : static_cast<double>(frame_indices[i]);
  };

  std::vector<std::size_t> detected;
  for (std::size_t i = 0; i < n; ++i)
    if (predictions[i]) detected.push_back(i);
  if (detected.empty() && n > 0)
    throw Error("track " + std::string(track_id.empty() ? "<unnamed>" : track_id) +
                " has no detected frame to interpolate from");

  std::vector<TaskPrediction> out(n);
  std::size_t next = 0;  // index into `detected` of the first detected frame >= i
  for (std::size_t i = 0; i < n; ++i) {
    while (next < detected.size() && detected[next] < i) ++next;
    if (predictions[i]) {
      out[i] = *predictions[i];
      continue;
    }
    if (next == 0) {
      out[i] = *predictions[detected.front()];
    } else if (next == detected.size()) {
      out[i] = *predictions[detected.back()];
    } else {
      const std::size_t p = detected[next - 1], q = detected[next];
      const double alpha = (position(i) - position(p)) / (position(q) - position(p));
      out[i] = interpolate(*predictions[p], *predictions[q], alpha);
    }
  }
  return out;
}

std::vector<std::size_t> smoothing_window(std::size_t t, std::size_t n, const SmoothingConfig& config) {
  if (config.k < 1) throw ConfigError("smoothing kernel k must be >= 1");
  if (config.k == 1 || n == 0) return {t};
  std::vector<std::size_t> w;
  if (config.window_style == WindowStyle::CenteredInclusive) {
    const std::size_t left = (config.k - 1) / 2;
    const std::size_t right = config.k - 1 - left;
    const std::size_t lo = t >= left ? t - left : 0;
    const std::size_t hi = std::min(n - 1, t + right);
    for (std::size_t s = lo; s <= hi; ++s) w.push_back(s);
  } else {
    const std::size_t half = config.k / 2;
    const std::size_t lo = t >= half ? t - half : 0;
    const std::size_t hi = std::min(n - 1, t + half);
    for (std::size_t s = lo; s <= hi; ++s)
      if (s != t) w.push_back(s);
    if (w.empty()) w.push_back(t);
  }
  return w;
}

std::vector<TaskPrediction> smooth(std::span<const TaskPrediction> predictions, const SmoothingConfig& config) {
  if (config.k < 1) throw ConfigError("smoothing kernel k must be >= 1");
  std::vector<TaskPrediction> out(predictions.begin(), predictions.end());
  const std::size_t n = predictions.size();
  if (config.k == 1 || n == 0) return out;

  // Flatten every present coordinate into per-coordinate series.
  std::vector<std::vector<double>> series;
  const auto& first = predictions.front();
  auto coordinates = [&](const TaskPrediction& p, std::vector<double>& dst) {
    dst.clear();
    if (first.expr_probs) dst.insert(dst.end(), p.expr_probs->begin(), p.expr_probs->end());
    if (first.au_probs) dst.insert(dst.end(), p.au_probs->begin(), p.au_probs->end());
    if (first.va) {
      dst.push_back(p.va->valence);
      dst.push_back(p.va->arousal);
    }
  };
  std::vector<double> row;
  for (const auto& p : predictions) {
    if (p.expr_probs.has_value() != first.expr_probs.has_value() ||
        p.au_probs.has_value() != first.au_probs.has_value() || p.va.has_value() != first.va.has_value())
      throw ShapeError("smooth: every frame must carry the same prediction fields");
    coordinates(p, row);
    if (series.empty()) series.resize(row.size(), std::vector<double>(n));
    const auto t = static_cast<std::size_t>(&p - predictions.data());
    for (std::size_t c = 0; c < row.size(); ++c) series[c][t] = row[c];
  }

  std::vector<double> window_values;
  for (std::size_t t = 0; t < n; ++t) {
    const auto window = smoothing_window(t, n, config);
    std::vector<double> smoothed(series.size());
    for (std::size_t c = 0; c < series.size(); ++c) {
      window_values.clear();
      for (std::size_t s : window) window_values.push_back(series[c][s]);
      smoothed[c] = config.kind == SmoothingKind::Mean ? window_mean(window_values)
                                                       : window_median(window_values);
    }
    std::size_t c = 0;
    auto& dst = out[t];
    if (first.expr_probs) {
      for (auto& v : *dst.expr_probs) v = smoothed[c++];
      renormalize(*dst.expr_probs);
    }
    if (first.au_probs)
      for (auto& v : *dst.au_probs) v = smoothed[c++];
    if (first.va) {
      dst.va->valence = smoothed[c++];
      dst.va->arousal = smoothed[c++];
    }
  }
  return out;
}

ThresholdTuning tune_au_thresholds(std::span<const std::array<double, kNumActionUnits>> probs,
                                   std::span<const AUVector> labels) {
  if (probs.size() != labels.size())
    throw ShapeError("tune_au_thresholds: probabilities and labels differ in length");
  ThresholdTuning result;
  for (std::size_t j = 0; j < kNumActionUnits; ++j) {
    std::size_t positives = 0;
    for (const auto& l : labels) positives += l[j] ? 1 : 0;
    if (positives == 0 || positives == labels.size()) {
      result.thresholds.values[j] = 0.5;
      result.defaulted[j] = true;
      continue;
    }
    // Grid positions are compared as integers so 0.3 and 0.7 tie on distance.
    constexpr int kMiddle = 4;  // kThresholdGrid[4] == 0.5
    double best_f1 = -1.0;
    int best = kMiddle;
    for (int g = 0; g < static_cast<int>(kThresholdGrid.size()); ++g) {
      const double thr = kThresholdGrid[static_cast<std::size_t>(g)];
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        const bool predicted = probs[i][j] >= thr;
        const bool actual = labels[i][j] != 0;
        tp += predicted && actual;
        fp += predicted && !actual;
        fn += !predicted && actual;
      }
      const std::size_t den = 2 * tp + fp + fn;
      const double f1 = den == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(den);
      const int dist = std::abs(g - kMiddle), best_dist = std::abs(best - kMiddle);
      if (f1 > best_f1 || (f1 == best_f1 && (dist < best_dist || (dist == best_dist && g < best)))) {
        best_f1 = f1;
        best = g;
      }
    }
    const double best_t = kThresholdGrid[static_cast<std::size_t>(best)];
    result.thresholds.values[j] = best_t;
    result.f1[j] = best_f1;
  }
  return result;
}

}  // namespace affect
