#include <doctest.h>

#include <cstring>
#include <random>

#include "affect/errors.hpp"
#include "affect/ingest.hpp"
#include "affect/postprocess.hpp"
#include "affect/synthetic.hpp"
#include "support/fixtures.hpp"

using namespace affect;
namespace fs = std::filesystem;

namespace {

const std::string kExprHeader = "Neutral,Anger,Disgust,Fear,Happiness,Sadness,Surprise,Other\n";
const std::string kAuHeader = "AU1,AU2,AU4,AU6,AU7,AU10,AU12,AU15,AU23,AU24,AU25,AU26\n";

std::vector<FrameFeatures> random_frames(std::size_t n, std::size_t dim, std::uint64_t seed,
                                         double drop = 0.0) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution missing(drop);
  std::vector<FrameFeatures> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(missing(rng) ? fixture::missing_frame(static_cast<std::uint32_t>(i))
                               : fixture::detected_frame(static_cast<std::uint32_t>(i), dim, rng));
  return out;
}

template <typename F>
std::size_t format_error_offset(F&& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.offset();
  }
  FAIL("no FormatError thrown");
  return 0;
}

template <typename F>
std::size_t parse_error_line(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.line();
  }
  FAIL("no ParseError thrown");
  return 0;
}

}  // namespace

TEST_CASE("feature file round-trips bit-exactly") {
  const auto frames = random_frames(57, 13, 11, 0.2);
  const auto bytes = encode_feature_file(frames, 13);
  CHECK(bytes.size() == kFeatureHeaderBytes + 57 * (4 + 1 + 4 * (13 + 8)));
  CHECK(std::memcmp(bytes.data(), "AFFR", 4) == 0);
  const auto back = decode_feature_file(bytes);
  CHECK(back.header.frame_count == 57);
  CHECK(back.header.embedding_dim == 13);
  CHECK(back.header.num_scores == 8);
  CHECK(back.frames == frames);
}

TEST_CASE("feature file stores little-endian header fields") {
  const auto bytes = encode_feature_file(random_frames(3, 1280, 5), 1280);
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 3);
  CHECK(bytes[10] == (1280 & 0xFF));
  CHECK(bytes[11] == (1280 >> 8));
  CHECK(bytes[14] == 8);
  CHECK(bytes[18] == 1);
}

TEST_CASE("100-row file with D=1280 and matching annotations loads as 100 frames") {
  fixture::TempDir dir("load100");
  write_feature_file(dir.path / "features" / "vid.affr", random_frames(100, 1280, 3), 1280);
  std::vector<std::optional<int>> labels(100, 2);
  write_expression_annotations(dir.path / "annotations" / "EXPR" / "vid.txt", labels);
  const auto ds = load_features(dir.path / "features", dir.path / "annotations", Task::Expression);
  REQUIRE(ds.tracks.size() == 1);
  CHECK(ds.embedding_dim == 1280);
  CHECK(ds.tracks[0].video_id == "vid");
  CHECK(ds.tracks[0].total_frames() == 100);
  CHECK(ds.tracks[0].frames[99].labels.expression == 2);
  CHECK(validate_dataset(ds).empty());
}

TEST_CASE("header declaring 100 rows over 99 rows names the truncation point") {
  auto bytes = encode_feature_file(random_frames(100, 16, 4), 16);
  const std::size_t row = 4 + 1 + 4 * (16 + 8);
  bytes.resize(bytes.size() - row);
  const auto at = format_error_offset([&] { decode_feature_file(bytes); });
  CHECK(at == kFeatureHeaderBytes + 99 * row);
  try {
    decode_feature_file(bytes);
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("100") != std::string::npos);
    CHECK(std::string(e.what()).find("99") != std::string::npos);
  }
  // partial last row: still 99 complete rows
  bytes.push_back(0);
  CHECK(format_error_offset([&] { decode_feature_file(bytes); }) == kFeatureHeaderBytes + 99 * row);
}

TEST_CASE("malformed headers report the byte offset of the bad field") {
  const auto good = encode_feature_file(random_frames(2, 4, 9), 4);
  auto broken = [&](std::size_t at, std::uint8_t v) {
    auto b = good;
    b[at] = v;
    return b;
  };
  CHECK(format_error_offset([&] { decode_feature_file(broken(0, 'X')); }) == 0);
  CHECK(format_error_offset([&] { decode_feature_file(broken(4, 2)); }) == 4);
  CHECK(format_error_offset([&] { decode_feature_file(broken(14, 7)); }) == 14);
  CHECK(format_error_offset([&] { decode_feature_file(broken(18, 0)); }) == 18);
  CHECK(format_error_offset([&] { decode_feature_file(broken(kFeatureHeaderBytes + 4, 3)); }) ==
        kFeatureHeaderBytes + 4);
  std::vector<std::uint8_t> tiny(good.begin(), good.begin() + 10);
  CHECK(format_error_offset([&] { decode_feature_file(tiny); }) == 10);
  auto extra = good;
  extra.push_back(0);
  CHECK(format_error_offset([&] { decode_feature_file(extra); }) == good.size());
}

TEST_CASE("expression annotations") {
  SUBCASE("header then 0, 4, -1") {
    const auto l = parse_expression_text(kExprHeader + "0\n4\n-1\n");
    REQUIRE(l.size() == 3);
    CHECK(l[0] == static_cast<int>(Expression::Neutral));
    CHECK(l[1] == static_cast<int>(Expression::Happiness));
    CHECK_FALSE(l[2].has_value());
  }
  SUBCASE("empty body") {
    CHECK(parse_expression_text(kExprHeader).empty());
    CHECK(parse_expression_text("").empty());
  }
  SUBCASE("9 is an error at its line") {
    CHECK(parse_error_line([] { parse_expression_text(kExprHeader + "0\n9\n"); }) == 3);
  }
  SUBCASE("non-integer and blank lines are errors") {
    CHECK(parse_error_line([] { parse_expression_text(kExprHeader + "x\n"); }) == 2);
    CHECK(parse_error_line([] { parse_expression_text(kExprHeader + "1\n\n2\n"); }) == 3);
  }
  SUBCASE("no trailing newline and CRLF") {
    CHECK(parse_expression_text(kExprHeader + "3\n5").size() == 2);
    const auto l = parse_expression_text("a,b\r\n1\r\n");
    REQUIRE(l.size() == 1);
    CHECK(l[0] == 1);
  }
  SUBCASE("header in another order maps ids to canonical classes") {
    const auto l = parse_expression_text("Other,Neutral,Anger,Disgust,Fear,Happiness,Sadness,Surprise\n0\n1\n");
    CHECK(l[0] == static_cast<int>(Expression::Other));
    CHECK(l[1] == static_cast<int>(Expression::Neutral));
  }
}

TEST_CASE("valence-arousal annotations") {
  const auto l = parse_va_text("valence,arousal\n0.5,-0.25\n-5.0,-5.0\n0.0,0.0\n1,2\n");
  REQUIRE(l.size() == 4);
  CHECK(*l[0] == ValenceArousal{0.5, -0.25});
  CHECK_FALSE(l[1].has_value());
  REQUIRE(l[2].has_value());
  CHECK(*l[2] == ValenceArousal{0.0, 0.0});
  CHECK_FALSE(l[3].has_value());
  CHECK(parse_error_line([] { parse_va_text("v,a\n0.1,0.2\n0.1,abc\n"); }) == 3);
  CHECK(parse_error_line([] { parse_va_text("v,a\n0.1\n"); }) == 2);
}

TEST_CASE("AU annotations") {
  const auto l = parse_au_text(kAuHeader + "0,1,0,0,0,0,1,0,0,0,1,0\n-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1\n");
  REQUIRE(l.size() == 2);
  REQUIRE(l[0].has_value());
  AUVector expected{};
  expected[1] = expected[6] = expected[10] = 1;  // AU2, AU12, AU25
  CHECK(*l[0] == expected);
  CHECK_FALSE(l[1].has_value());
  CHECK(parse_error_line([] { parse_au_text(kAuHeader + "0,1,0,0,0,0,1,0,0,0,1\n"); }) == 2);
  CHECK(parse_error_line([] { parse_au_text(kAuHeader + "0,1,0,0,0,0,1,0,0,0,1,2\n"); }) == 2);
  // a single -1 invalidates the frame
  CHECK_FALSE(parse_au_text(kAuHeader + "0,1,0,0,0,0,1,0,0,0,1,-1\n")[0].has_value());
}

TEST_CASE("AU header permutation maps columns to canonical order") {
  const auto l = parse_au_text("AU26,AU1,AU2,AU4,AU6,AU7,AU10,AU12,AU15,AU23,AU24,AU25\n1,0,0,0,0,0,0,0,0,0,0,0\n");
  AUVector expected{};
  expected[11] = 1;
  CHECK(*l[0] == expected);
}

TEST_CASE("annotation writers round-trip through the parsers") {
  fixture::TempDir dir("roundtrip");
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<std::optional<int>> expr;
  std::vector<std::optional<ValenceArousal>> va;
  std::vector<std::optional<AUVector>> au;
  for (int i = 0; i < 300; ++i) {
    const bool absent = rng() % 5 == 0;
    expr.push_back(absent ? std::nullopt : std::optional<int>(static_cast<int>(rng() % 8)));
    va.push_back(absent ? std::nullopt : std::optional<ValenceArousal>({u(rng), u(rng)}));
    AUVector bits{};
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() % 2);
    au.push_back(absent ? std::nullopt : std::optional<AUVector>(bits));
  }
  va.push_back(ValenceArousal{-1.0, 1.0});
  write_expression_annotations(dir.path / "e.txt", expr);
  write_va_annotations(dir.path / "v.txt", va);
  write_au_annotations(dir.path / "a.txt", au);
  CHECK(parse_expression_annotations(dir.path / "e.txt") == expr);
  CHECK(parse_va_annotations(dir.path / "v.txt") == va);
  CHECK(parse_au_annotations(dir.path / "a.txt") == au);
}

TEST_CASE("parse errors from files carry the path and line") {
  fixture::TempDir dir("perr");
  write_text_file(dir.path / "bad.txt", kExprHeader + "1\n12\n");
  try {
    parse_expression_annotations(dir.path / "bad.txt");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("bad.txt") != std::string::npos);
  }
}

TEST_CASE("load_features joins labels by frame index and flags undetected frames") {
  fixture::TempDir dir("join");
  auto frames = random_frames(6, 3, 8);
  frames[2] = fixture::missing_frame(2);
  write_feature_file(dir.path / "f" / "v1.affr", frames, 3);
  write_text_file(dir.path / "ann" / "EXPR" / "v1.txt", kExprHeader + "0\n1\n2\n-1\n4\n5\n");
  const auto ds = load_features(dir.path / "f", dir.path / "ann", Task::Expression);
  const auto& t = ds.tracks[0];
  CHECK_FALSE(t.frames[2].features.detected);
  CHECK(t.frames[2].labels.expression == 2);
  CHECK_FALSE(t.frames[3].labels.expression.has_value());
  CHECK(t.frames[5].labels.expression == 5);
}

TEST_CASE("annotation line count mismatch is a join error naming the video") {
  fixture::TempDir dir("mismatch");
  write_feature_file(dir.path / "f" / "clip7.affr", random_frames(5, 3, 8), 3);
  write_text_file(dir.path / "ann" / "EXPR" / "clip7.txt", kExprHeader + "0\n1\n2\n");
  try {
    load_features(dir.path / "f", dir.path / "ann", Task::Expression);
    FAIL("expected JoinError");
  } catch (const JoinError& e) {
    CHECK(std::string(e.what()).find("clip7") != std::string::npos);
  }
}

TEST_CASE("tracks with different D are rejected") {
  fixture::TempDir dir("mixed");
  write_feature_file(dir.path / "a.affr", random_frames(3, 4, 1), 4);
  write_feature_file(dir.path / "b.affr", random_frames(3, 5, 1), 5);
  CHECK(format_error_offset([&] { load_features(dir.path, {}, Task::Expression); }) == 10);
}

TEST_CASE("missing or empty feature locations are errors") {
  fixture::TempDir dir("empty");
  CHECK_THROWS_AS(load_features(dir.path, {}, Task::Expression), Error);
  CHECK_THROWS_AS(load_features(dir.path / "nope", {}, Task::Expression), Error);
}

TEST_CASE("save_dataset and load_features round-trip a synthetic dataset") {
  fixture::TempDir dir("dsround");
  SyntheticSpec spec;
  spec.seed = 4;
  spec.num_tracks = 2;
  spec.frames_per_track = 60;
  spec.embedding_dim = 9;
  spec.dropout_rate = 0.2;
  const auto data = generate_synthetic(spec);
  save_dataset(data.train, dir.path);
  auto back = load_features(dir.path / "features", dir.path / "annotations", Task::MultiTask);
  CHECK(back == data.train);
}

TEST_CASE("prediction files") {
  fixture::TempDir dir("pred");
  TaskPrediction p;
  p.expr_probs = std::array<double, 8>{0.05, 0.05, 0.05, 0.05, 0.6, 0.1, 0.05, 0.05};
  std::array<double, 12> au{};
  au.fill(0.1);
  au[0] = 0.9;
  p.au_probs = au;
  p.va = ValenceArousal{0.5, -0.25};
  std::vector<PredictedTrack> tracks = {{"v", {p, p}}};

  write_predictions(tracks, Task::Expression, dir.path / "e", AUThresholds{});
  CHECK(read_text_file(dir.path / "e" / "v.txt") == kExprHeader + "4\n4\n");
  write_predictions(tracks, Task::ActionUnits, dir.path / "a", AUThresholds{});
  const auto au_text = read_text_file(dir.path / "a" / "v.txt");
  CHECK(au_text.substr(kAuHeader.size(), 4) == "1,0,");
  write_predictions(tracks, Task::ValenceArousal, dir.path / "va", AUThresholds{});
  const auto va_text = read_text_file(dir.path / "va" / "v.txt");
  CHECK(va_text.find("\n0.500000,-0.250000\n") != std::string::npos);

  write_predictions(tracks, Task::MultiTask, dir.path / "m", AUThresholds{});
  for (const char* sub : {"EXPR", "VA", "AU"}) CHECK(fs::exists(dir.path / "m" / sub / "v.txt"));

  // prediction files parse back as annotations
  CHECK(parse_expression_annotations(dir.path / "e" / "v.txt").size() == 2);
  CHECK(parse_va_annotations(dir.path / "va" / "v.txt")[0] == ValenceArousal{0.5, -0.25});
}

TEST_CASE("a missing prediction is refused without partial output") {
  fixture::TempDir dir("refuse");
  TaskPrediction p;
  p.va = ValenceArousal{0.1, 0.2};
  std::vector<PredictedTrack> tracks = {{"ok", {p, p}}, {"gap", {p, std::nullopt, p}}};
  try {
    write_predictions(tracks, Task::ValenceArousal, dir.path / "out", AUThresholds{});
    FAIL("expected refusal");
  } catch (const Error& e) {
    const std::string what = e.what();
    CHECK(what.find("gap") != std::string::npos);
    CHECK(what.find("frame 1") != std::string::npos);
  }
  CHECK_FALSE(fs::exists(dir.path / "out" / "ok.txt"));
}
