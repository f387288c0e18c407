#pragma once

// Run manifests written next to every artifact the CLI produces.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dummf::tools {

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::filesystem::path& path);

// SOURCE_DATE_EPOCH when set (reproducible runs), wall clock otherwise.
std::string timestamp_utc();

struct Manifest {
  std::string command;
  std::vector<std::string> args;
  std::string config_sha256;  // empty when the command takes no config
  std::uint64_t seed = 0;
  bool has_seed = false;
  unsigned threads = 1;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  std::string started;

  std::string to_json() const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace dummf::tools
