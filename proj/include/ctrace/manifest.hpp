#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace ctrace {

inline constexpr const char* kToolName = "ctrace";
inline constexpr const char* kToolVersion = "0.1.0";

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view data);

struct RunManifest {
  std::string subcommand;
  std::vector<std::string> inputs;
  nlohmann::json parameters = nlohmann::json::object();
  std::vector<std::uint64_t> seeds;
  bool in_memory = false;
  std::vector<std::string> outputs;  // file names relative to the run dir

  // Digests every output under dir and writes dir/manifest.json.
  void write(const std::filesystem::path& dir) const;
  nlohmann::json to_json(const std::filesystem::path& dir) const;
};

}  // namespace ctrace
