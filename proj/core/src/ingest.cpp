#include "affect/ingest.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "affect/errors.hpp"
#include "affect/postprocess.hpp"

namespace affect {
namespace fs = std::filesystem;

namespace {

// --- little-endian primitives -------------------------------------------------

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xFF));
}

void put_f32(std::vector<std::uint8_t>& out, float value) {
  put_le(out, std::bit_cast<std::uint32_t>(value));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<T>(static_cast<T>(bytes[offset + i]) << (8 * i));
  return value;
}

float get_f32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset));
}

// --- text helpers --------------------------------------------------------------

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct AnnotationText {
  std::string_view header;
  std::vector<std::string_view> body;  // one entry per frame
  std::size_t first_body_line = 2;
};

AnnotationText split_annotation(const std::string& text) {
  AnnotationText out;
  std::vector<std::string_view> lines;
  std::string_view all(text);
  std::size_t start = 0;
  while (start < all.size()) {
    const auto pos = all.find('\n', start);
    auto line = all.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (lines.empty()) return out;
  out.header = lines.front();
  out.body.assign(lines.begin() + 1, lines.end());
  for (std::size_t i = 0; i < out.body.size(); ++i)
    if (trim(out.body[i]).empty()) throw ParseError("empty annotation line", i + 2);
  return out;
}

template <typename T>
bool parse_number(std::string_view token, T& value) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  return ec == std::errc() && ptr == end && !token.empty();
}

/// Maps header column i to a canonical index when the header names a
/// permutation of `names`; identity otherwise.
template <std::size_t N>
std::array<std::size_t, N> header_order(std::string_view header,
                                        const std::array<std::string_view, N>& names) {
  std::array<std::size_t, N> order{};
  for (std::size_t i = 0; i < N; ++i) order[i] = i;
  const auto cols = split(header, ',');
  if (cols.size() != N) return order;
  std::array<std::size_t, N> mapped{};
  std::array<bool, N> seen{};
  for (std::size_t i = 0; i < N; ++i) {
    auto it = std::find_if(names.begin(), names.end(), [&](std::string_view n) {
      return n.size() == cols[i].size() &&
             std::equal(n.begin(), n.end(), cols[i].begin(), [](char a, char b) {
               return std::tolower(static_cast<unsigned char>(a)) ==
                      std::tolower(static_cast<unsigned char>(b));
             });
    });
    if (it == names.end()) return order;
    const auto idx = static_cast<std::size_t>(it - names.begin());
    if (seen[idx]) return order;
    seen[idx] = true;
    mapped[i] = idx;
  }
  return mapped;
}

std::string join_names(std::span<const std::string_view> names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ',';
    out += names[i];
  }
  return out;
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

const std::string kVaHeader = "valence,arousal";

}  // namespace

// --- binary feature files --------------------------------------------------------

std::vector<std::uint8_t> encode_feature_file(std::span<const FrameFeatures> frames,
                                              std::uint32_t embedding_dim) {
  std::vector<std::uint8_t> out;
  const std::size_t row = 4 + 1 + 4 * (embedding_dim + kNumScores);
  out.reserve(kFeatureHeaderBytes + frames.size() * row);
  out.insert(out.end(), kFeatureMagic.begin(), kFeatureMagic.end());
  put_le<std::uint16_t>(out, kFeatureVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(frames.size()));
  put_le<std::uint32_t>(out, embedding_dim);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(kNumScores));
  put_le<std::uint16_t>(out, kFlagHasScores);

  for (const auto& f : frames) {
    put_le<std::uint32_t>(out, f.frame_index);
    out.push_back(f.detected ? 1 : 0);
    if (f.detected) {
      if (f.embedding.size() != embedding_dim || f.scores.size() != kNumScores)
        throw ShapeError("frame " + std::to_string(f.frame_index) +
                         ": embedding/scores size does not match the file header");
      for (float v : f.embedding) put_f32(out, v);
      for (float v : f.scores) put_f32(out, v);
    } else {
      out.insert(out.end(), 4 * (embedding_dim + kNumScores), 0);
    }
  }
  return out;
}

FeatureFile decode_feature_file(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFeatureHeaderBytes)
    throw FormatError("truncated header: " + std::to_string(bytes.size()) + " bytes", bytes.size());
  if (!std::equal(kFeatureMagic.begin(), kFeatureMagic.end(), bytes.begin()))
    throw FormatError("bad magic, expected \"AFFR\"", 0);

  FeatureFile file;
  auto& h = file.header;
  h.version = get_le<std::uint16_t>(bytes, 4);
  h.frame_count = get_le<std::uint32_t>(bytes, 6);
  h.embedding_dim = get_le<std::uint32_t>(bytes, 10);
  h.num_scores = get_le<std::uint32_t>(bytes, 14);
  h.flags = get_le<std::uint16_t>(bytes, 18);
  if (h.version != kFeatureVersion)
    throw FormatError("unsupported version " + std::to_string(h.version), 4);
  if (h.num_scores != kNumScores)
    throw FormatError("score count must be 8, got " + std::to_string(h.num_scores), 14);
  if (!(h.flags & kFlagHasScores)) throw FormatError("files without scores are not supported", 18);

  const std::size_t row = 4 + 1 + 4 * (static_cast<std::size_t>(h.embedding_dim) + kNumScores);
  const std::size_t body = bytes.size() - kFeatureHeaderBytes;
  const std::size_t complete = body / row;
  if (complete < h.frame_count)
    throw FormatError("truncated: header declares " + std::to_string(h.frame_count) +
                          " rows, file holds " + std::to_string(complete),
                      kFeatureHeaderBytes + complete * row);
  if (body != static_cast<std::size_t>(h.frame_count) * row)
    throw FormatError("trailing bytes after " + std::to_string(h.frame_count) + " rows",
                      kFeatureHeaderBytes + h.frame_count * row);

  file.frames.resize(h.frame_count);
  std::size_t at = kFeatureHeaderBytes;
  for (auto& f : file.frames) {
    f.frame_index = get_le<std::uint32_t>(bytes, at);
    const auto detected = bytes[at + 4];
    if (detected > 1) throw FormatError("detected flag must be 0 or 1", at + 4);
    f.detected = detected == 1;
    std::size_t p = at + 5;
    if (f.detected) {
      f.embedding.resize(h.embedding_dim);
      for (auto& v : f.embedding) v = get_f32(bytes, p), p += 4;
      f.scores.resize(kNumScores);
      for (auto& v : f.scores) v = get_f32(bytes, p), p += 4;
    }
    at += row;
  }
  return file;
}

void write_feature_file(const fs::path& path, std::span<const FrameFeatures> frames,
                        std::uint32_t embedding_dim) {
  const auto bytes = encode_feature_file(frames, embedding_dim);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

FeatureFile read_feature_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_feature_file(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

// --- annotation parsing -------------------------------------------------------------

std::vector<std::optional<int>> parse_expression_text(const std::string& text) {
  const auto doc = split_annotation(text);
  const auto order = header_order(doc.header, kExpressionNames);
  std::vector<std::optional<int>> out;
  out.reserve(doc.body.size());
  for (std::size_t i = 0; i < doc.body.size(); ++i) {
    int v = 0;
    if (!parse_number(trim(doc.body[i]), v) || v < -1 || v >= static_cast<int>(kNumExpressions))
      throw ParseError("expression label must be -1..7, got \"" + std::string(doc.body[i]) + "\"",
                       i + doc.first_body_line);
    out.push_back(v < 0 ? std::nullopt : std::optional<int>(static_cast<int>(order[v])));
  }
  return out;
}

std::vector<std::optional<ValenceArousal>> parse_va_text(const std::string& text) {
  const auto doc = split_annotation(text);
  std::vector<std::optional<ValenceArousal>> out;
  out.reserve(doc.body.size());
  for (std::size_t i = 0; i < doc.body.size(); ++i) {
    const auto cols = split(doc.body[i], ',');
    const auto line = i + doc.first_body_line;
    if (cols.size() != 2) throw ParseError("expected \"valence,arousal\"", line);
    double v = 0, a = 0;
    if (!parse_number(cols[0], v) || !parse_number(cols[1], a))
      throw ParseError("non-numeric valence/arousal \"" + std::string(doc.body[i]) + "\"", line);
    const bool valid = v >= -1.0 && v <= 1.0 && a >= -1.0 && a <= 1.0;
    out.push_back(valid ? std::optional<ValenceArousal>({v, a}) : std::nullopt);
  }
  return out;
}

std::vector<std::optional<AUVector>> parse_au_text(const std::string& text) {
  const auto doc = split_annotation(text);
  const auto order = header_order(doc.header, kActionUnitNames);
  std::vector<std::optional<AUVector>> out;
  out.reserve(doc.body.size());
  for (std::size_t i = 0; i < doc.body.size(); ++i) {
    const auto cols = split(doc.body[i], ',');
    const auto line = i + doc.first_body_line;
    if (cols.size() != kNumActionUnits)
      throw ParseError("expected 12 AU values, got " + std::to_string(cols.size()), line);
    AUVector bits{};
    bool invalid = false;
    for (std::size_t j = 0; j < kNumActionUnits; ++j) {
      int v = 0;
      if (!parse_number(cols[j], v) || v < -1 || v > 1)
        throw ParseError("AU value must be -1, 0 or 1, got \"" + std::string(cols[j]) + "\"", line);
      if (v < 0) invalid = true;
      else bits[order[j]] = static_cast<std::uint8_t>(v);
    }
    out.push_back(invalid ? std::nullopt : std::optional<AUVector>(bits));
  }
  return out;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
}

namespace {
template <typename F>
auto with_path(const fs::path& path, F&& parse) {
  try {
    return parse(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}
}  // namespace

std::vector<std::optional<int>> parse_expression_annotations(const fs::path& path) {
  return with_path(path, parse_expression_text);
}
std::vector<std::optional<ValenceArousal>> parse_va_annotations(const fs::path& path) {
  return with_path(path, parse_va_text);
}
std::vector<std::optional<AUVector>> parse_au_annotations(const fs::path& path) {
  return with_path(path, parse_au_text);
}

// --- annotation writing -------------------------------------------------------------

void write_expression_annotations(const fs::path& path, std::span<const std::optional<int>> labels) {
  std::string text = join_names(kExpressionNames) + "\n";
  for (const auto& l : labels) text += std::to_string(l ? *l : -1) + "\n";
  write_text_file(path, text);
}

void write_va_annotations(const fs::path& path,
                          std::span<const std::optional<ValenceArousal>> labels) {
  std::string text = kVaHeader + "\n";
  for (const auto& l : labels)
    text += l ? shortest(l->valence) + "," + shortest(l->arousal) + "\n" : "-5,-5\n";
  write_text_file(path, text);
}

void write_au_annotations(const fs::path& path, std::span<const std::optional<AUVector>> labels) {
  std::string text = join_names(kActionUnitNames) + "\n";
  for (const auto& l : labels) {
    for (std::size_t j = 0; j < kNumActionUnits; ++j) {
      if (j) text += ',';
      text += l ? std::to_string((*l)[j]) : std::string("-1");
    }
    text += '\n';
  }
  write_text_file(path, text);
}

std::string_view annotation_subdir(Task task) {
  switch (task) {
    case Task::Expression: return "EXPR";
    case Task::ValenceArousal: return "VA";
    case Task::ActionUnits: return "AU";
    case Task::MultiTask: return "MTL";
  }
  return "";
}

namespace {

std::vector<Task> covered_tasks(Task task) {
  if (task == Task::MultiTask) return {Task::Expression, Task::ValenceArousal, Task::ActionUnits};
  return {task};
}

template <typename T, typename Assign>
void join_labels(VideoTrack& track, const std::vector<std::optional<T>>& labels, Task task,
                 Assign assign) {
  const std::size_t expected =
      track.frames.empty() ? 0 : static_cast<std::size_t>(track.frames.back().features.frame_index) + 1;
  if (labels.size() != expected)
    throw JoinError("video " + track.video_id + ": " + std::string(annotation_subdir(task)) +
                    " annotation has " + std::to_string(labels.size()) + " frames, features cover " +
                    std::to_string(expected));
  for (auto& frame : track.frames) {
    const auto idx = frame.features.frame_index;
    if (idx >= labels.size())
      throw JoinError("video " + track.video_id + ": frame " + std::to_string(idx) +
                      " has no annotation line");
    assign(frame.labels, labels[idx]);
  }
}

}  // namespace

Dataset load_features(const fs::path& features, const fs::path& annotations, Task task, Split split) {
  std::vector<fs::path> files;
  if (fs::is_regular_file(features)) {
    files.push_back(features);
  } else if (fs::is_directory(features)) {
    for (const auto& entry : fs::directory_iterator(features))
      if (entry.is_regular_file() && entry.path().extension() == ".affr") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
  } else {
    throw Error("feature path does not exist: " + features.string());
  }
  if (files.empty()) throw Error("no .affr feature files in " + features.string());

  Dataset dataset;
  dataset.split = split;
  bool have_dim = false;
  for (const auto& file : files) {
    auto parsed = read_feature_file(file);
    if (!have_dim) {
      dataset.embedding_dim = parsed.header.embedding_dim;
      have_dim = true;
    } else if (parsed.header.embedding_dim != dataset.embedding_dim) {
      throw FormatError(file.string() + ": D=" + std::to_string(parsed.header.embedding_dim) +
                            " differs from D=" + std::to_string(dataset.embedding_dim),
                        10);
    }
    VideoTrack track;
    track.video_id = file.stem().string();
    track.frames.reserve(parsed.frames.size());
    for (auto& f : parsed.frames) track.frames.push_back({std::move(f), {}});

    for (Task t : covered_tasks(task)) {
      const auto path = annotations / annotation_subdir(t) / (track.video_id + ".txt");
      if (annotations.empty() || !fs::exists(path)) continue;
      switch (t) {
        case Task::Expression:
          join_labels(track, parse_expression_annotations(path), t,
                      [](FrameLabels& l, const std::optional<int>& v) { l.expression = v; });
          break;
        case Task::ValenceArousal:
          join_labels(track, parse_va_annotations(path), t,
                      [](FrameLabels& l, const std::optional<ValenceArousal>& v) { l.va = v; });
          break;
        case Task::ActionUnits:
          join_labels(track, parse_au_annotations(path), t,
                      [](FrameLabels& l, const std::optional<AUVector>& v) { l.action_units = v; });
          break;
        case Task::MultiTask: break;
      }
    }
    dataset.tracks.push_back(std::move(track));
  }
  return dataset;
}

void save_dataset(const Dataset& dataset, const fs::path& root) {
  for (const auto& track : dataset.tracks) {
    std::vector<FrameFeatures> features;
    features.reserve(track.frames.size());
    for (const auto& f : track.frames) features.push_back(f.features);
    write_feature_file(root / "features" / (track.video_id + ".affr"), features,
                       static_cast<std::uint32_t>(dataset.embedding_dim));

    const std::size_t lines =
        track.frames.empty() ? 0 : static_cast<std::size_t>(track.frames.back().features.frame_index) + 1;
    std::vector<std::optional<int>> expr(lines);
    std::vector<std::optional<ValenceArousal>> va(lines);
    std::vector<std::optional<AUVector>> au(lines);
    bool any_expr = false, any_va = false, any_au = false;
    for (const auto& f : track.frames) {
      const auto i = f.features.frame_index;
      expr[i] = f.labels.expression;
      va[i] = f.labels.va;
      au[i] = f.labels.action_units;
      any_expr |= f.labels.expression.has_value();
      any_va |= f.labels.va.has_value();
      any_au |= f.labels.action_units.has_value();
    }
    const auto ann = root / "annotations";
    if (any_expr) write_expression_annotations(ann / "EXPR" / (track.video_id + ".txt"), expr);
    if (any_va) write_va_annotations(ann / "VA" / (track.video_id + ".txt"), va);
    if (any_au) write_au_annotations(ann / "AU" / (track.video_id + ".txt"), au);
  }
}

// --- predictions ----------------------------------------------------------------------

namespace {

std::string render_predictions(const PredictedTrack& track, Task task, const AUThresholds& thresholds) {
  std::string text;
  switch (task) {
    case Task::Expression: text = join_names(kExpressionNames); break;
    case Task::ValenceArousal: text = kVaHeader; break;
    default: text = join_names(kActionUnitNames); break;
  }
  text += '\n';
  for (std::size_t i = 0; i < track.frames.size(); ++i) {
    const auto& p = track.frames[i];
    auto missing = [&] {
      return Error("video " + track.video_id + ": missing " + std::string(task_name(task)) +
                   " prediction for frame " + std::to_string(i));
    };
    if (!p) throw missing();
    switch (task) {
      case Task::Expression:
        if (!p->expr_probs) throw missing();
        text += std::to_string(argmax(*p->expr_probs));
        break;
      case Task::ValenceArousal:
        if (!p->va) throw missing();
        text += fixed6(p->va->valence) + "," + fixed6(p->va->arousal);
        break;
      default: {
        if (!p->au_probs) throw missing();
        const auto bits = binarize(*p->au_probs, thresholds);
        for (std::size_t j = 0; j < kNumActionUnits; ++j) {
          if (j) text += ',';
          text += bits[j] ? '1' : '0';
        }
      }
    }
    text += '\n';
  }
  return text;
}

}  // namespace

void write_predictions(std::span<const PredictedTrack> tracks, Task task, const fs::path& out_dir,
                       const AUThresholds& thresholds) {
  // Render everything first so a missing prediction leaves no partial output.
  std::vector<std::pair<fs::path, std::string>> files;
  for (Task t : covered_tasks(task)) {
    const auto dir = task == Task::MultiTask ? out_dir / annotation_subdir(t) : out_dir;
    for (const auto& track : tracks)
      files.emplace_back(dir / (track.video_id + ".txt"), render_predictions(track, t, thresholds));
  }
  for (const auto& [path, text] : files) write_text_file(path, text);
}

}  // namespace affect
