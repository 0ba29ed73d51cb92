#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affect/datamodel.hpp"

namespace affect {

inline constexpr std::array<char, 4> kFeatureMagic = {'A', 'F', 'F', 'R'};
inline constexpr std::uint16_t kFeatureVersion = 1;
inline constexpr std::uint16_t kFlagHasScores = 0x1;
inline constexpr std::size_t kFeatureHeaderBytes = 20;

struct FeatureFileHeader {
  std::uint16_t version = kFeatureVersion;
  std::uint32_t frame_count = 0;
  std::uint32_t embedding_dim = 0;
  std::uint32_t num_scores = kNumScores;
  std::uint16_t flags = kFlagHasScores;
};

/// Frames of one video as stored in a binary feature file.
struct FeatureFile {
  FeatureFileHeader header;
  std::vector<FrameFeatures> frames;
};

/// Little-endian "AFFR" layout: 20-byte header, then per row
/// (frame_index u32, detected u8, D x f32, 8 x f32). Undetected rows are
/// written zero-filled and read back with empty embedding/scores.
void write_feature_file(const std::filesystem::path& path, std::span<const FrameFeatures> frames,
                        std::uint32_t embedding_dim);
FeatureFile read_feature_file(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_feature_file(std::span<const FrameFeatures> frames,
                                              std::uint32_t embedding_dim);
FeatureFile decode_feature_file(std::span<const std::uint8_t> bytes);

// Challenge-style annotation files: a header line followed by one line per
// frame. -1 marks an invalid EXPR/AU label; an out-of-range VA pair is invalid.

std::vector<std::optional<int>> parse_expression_annotations(const std::filesystem::path& path);
std::vector<std::optional<ValenceArousal>> parse_va_annotations(const std::filesystem::path& path);
std::vector<std::optional<AUVector>> parse_au_annotations(const std::filesystem::path& path);

std::vector<std::optional<int>> parse_expression_text(const std::string& text);
std::vector<std::optional<ValenceArousal>> parse_va_text(const std::string& text);
std::vector<std::optional<AUVector>> parse_au_text(const std::string& text);

void write_expression_annotations(const std::filesystem::path& path,
                                  std::span<const std::optional<int>> labels);
void write_va_annotations(const std::filesystem::path& path,
                          std::span<const std::optional<ValenceArousal>> labels);
void write_au_annotations(const std::filesystem::path& path,
                          std::span<const std::optional<AUVector>> labels);

/// Subdirectory of an annotation root that holds a task's files.
std::string_view annotation_subdir(Task task);

/// Loads every `*.affr` under `features` (or the single file) and joins labels
/// from `annotations/{EXPR,VA,AU}/<video_id>.txt` for the tasks `task` covers.
Dataset load_features(const std::filesystem::path& features,
                      const std::filesystem::path& annotations, Task task,
                      Split split = Split::Train);

/// Writes features/ and annotations/ for a dataset (annotations only for
/// tasks that have at least one label in a track).
void save_dataset(const Dataset& dataset, const std::filesystem::path& root);

struct AUThresholds;

struct PredictedTrack {
  std::string video_id;
  std::vector<std::optional<TaskPrediction>> frames;
};

/// One `<video_id>.txt` per track in `out_dir` (for MultiTask, one file per
/// task under EXPR/, VA/ and AU/).
void write_predictions(std::span<const PredictedTrack> tracks, Task task,
                       const std::filesystem::path& out_dir, const AUThresholds& thresholds);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace affect
