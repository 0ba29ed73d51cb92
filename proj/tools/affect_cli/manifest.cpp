#include "affect_cli/manifest.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include <json.hpp>

#include "affect/errors.hpp"
#include "affect/ingest.hpp"

namespace affect::cli {
namespace fs = std::filesystem;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

std::map<std::string, std::string> digest_inputs(const std::vector<fs::path>& paths) {
  std::map<std::string, std::string> out;
  for (const auto& p : paths) {
    if (p.empty() || !fs::exists(p)) continue;
    if (fs::is_regular_file(p)) {
      out[p.string()] = sha256_file(p);
      continue;
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p))
      if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out[f.string()] = sha256_file(f);
  }
  return out;
}

std::string version_string() {
  return std::string("affect ") + kToolVersion +
         " (feature format AFFR v1, checkpoint format v1, metrics report v1)";
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["tool_version"] = version_string();
  j["seed"] = seed;
  j["config"] = config_snapshot;
  j["inputs"] = input_digests;
  j["outputs"] = outputs;
  j["wall_time_s"] = wall_seconds;
  return j.dump(1) + "\n";
}

void RunManifest::write(const fs::path& dir) const { write_text_file(dir / "manifest.json", to_json()); }

}  // namespace affect::cli
