#include "manifest.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>

#include "dummf/error.hpp"
#include "dummf/scene_io.hpp"
#include "json.hpp"
#include "version.hpp"

namespace dummf::tools {

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  std::string hex;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(read_text_file(path)); }

std::string timestamp_utc() {
  std::time_t t;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env)
    t = static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
  else
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string Manifest::to_json() const {
  nlohmann::ordered_json j;
  j["tool"] = "dummf";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["args"] = args;
  if (!config_sha256.empty()) j["config_sha256"] = config_sha256;
  if (has_seed) j["seed"] = seed;
  j["threads"] = threads;
  auto digests = [](const std::vector<std::filesystem::path>& paths) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : paths) arr.push_back({{"path", p.generic_string()}, {"sha256", file_sha256(p)}});
    return arr;
  };
  j["inputs"] = digests(inputs);
  j["outputs"] = digests(outputs);
  j["started"] = started;
  j["finished"] = timestamp_utc();
  return j.dump(2) + "\n";
}

void Manifest::write(const std::filesystem::path& path) const { write_file_atomic(path, to_json()); }

}  // namespace dummf::tools
