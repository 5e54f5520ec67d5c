#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctrace {

// Splits one CSV row on commas. Quoting is not supported; clusterdata rows
// never quote (user names are hashed to base64 without commas).
std::vector<std::string_view> split_fields(std::string_view row);

std::optional<std::uint64_t> parse_u64(std::string_view s);
std::optional<long> parse_long(std::string_view s);
std::optional<double> parse_double(std::string_view s);

// Shortest representation that parses back to the same double.
std::string format_double(double v);

// Reads lines from a plain or gzip-compressed file, or from a stream.
class LineReader {
 public:
  static std::unique_ptr<LineReader> open(const std::filesystem::path& path);
  static std::unique_ptr<LineReader> from_stream(std::istream& in);

  virtual ~LineReader() = default;

  // Strips the trailing newline (and carriage return). False at end.
  virtual bool next(std::string& line) = 0;
};

}  // namespace ctrace
