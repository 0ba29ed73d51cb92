#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace affect::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Records how an output directory was produced.
struct RunManifest {
  std::string command;
  std::string config_snapshot;  // effective options, one "key=value" per line
  std::map<std::string, std::string> input_digests;  // path -> sha256
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;

  std::string to_json() const;
  void write(const std::filesystem::path& dir) const;
};

std::string sha256_file(const std::filesystem::path& path);

/// Digests every regular file under each path (recursively, sorted).
std::map<std::string, std::string> digest_inputs(const std::vector<std::filesystem::path>& paths);

std::string version_string();

}  // namespace affect::cli
