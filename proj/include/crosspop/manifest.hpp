#ifndef CROSSPOP_MANIFEST_HPP
#define CROSSPOP_MANIFEST_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace crosspop {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a 64-bit content digest, hex encoded.
std::string file_digest(const std::filesystem::path& path);

// Everything needed to reproduce an artifact-producing run: the resolved
// configuration, all seeds, and content digests of the inputs.
struct RunManifest {
  std::string subcommand;
  std::string timestamp; // UTC, ISO 8601
  std::uint64_t seed = 0;
  bool seed_was_sampled = false;
  int threads = 0;
  std::map<std::string, std::string> config;
  std::map<std::string, std::string> inputs; // path -> digest
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;

  void add_input(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const; // JSON
};

std::string utc_timestamp();

} // namespace crosspop

#endif
