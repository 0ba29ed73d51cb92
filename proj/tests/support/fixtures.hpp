#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "affect/datamodel.hpp"

namespace fixture {

inline affect::FrameFeatures detected_frame(std::uint32_t index, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  affect::FrameFeatures f;
  f.frame_index = index;
  f.detected = true;
  for (std::size_t i = 0; i < dim; ++i) f.embedding.push_back(n(rng));
  float total = 0;
  for (int c = 0; c < 8; ++c) {
    f.scores.push_back(std::uniform_real_distribution<float>(0.01f, 1.0f)(rng));
    total += f.scores.back();
  }
  for (auto& s : f.scores) s /= total;
  return f;
}

inline affect::FrameFeatures missing_frame(std::uint32_t index) {
  affect::FrameFeatures f;
  f.frame_index = index;
  return f;
}

/// Track of `n` detected frames with random labels for every task.
inline affect::VideoTrack labeled_track(const std::string& id, std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  affect::VideoTrack t;
  t.video_id = id;
  for (std::size_t i = 0; i < n; ++i) {
    affect::Frame fr;
    fr.features = detected_frame(static_cast<std::uint32_t>(i), dim, rng);
    fr.labels.expression = static_cast<int>(rng() % 8);
    affect::AUVector au{};
    for (auto& b : au) b = static_cast<std::uint8_t>(rng() % 2);
    fr.labels.action_units = au;
    std::uniform_real_distribution<double> u(-1, 1);
    fr.labels.va = affect::ValenceArousal{u(rng), u(rng)};
    t.frames.push_back(fr);
  }
  return t;
}

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("affect_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace fixture
