#include "crosspop/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include <json.hpp>

#include "crosspop/errors.hpp"

namespace crosspop {

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for hashing");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const auto n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs[path.string()] = file_digest(path);
}

void RunManifest::write(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["tool"] = "crosspop";
  j["version"] = kToolVersion;
  j["subcommand"] = subcommand;
  j["timestamp"] = timestamp;
  j["seed"] = seed;
  j["seed_was_sampled"] = seed_was_sampled;
  j["threads"] = threads;
  j["config"] = config;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["warnings"] = warnings;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

} // namespace crosspop
