#include "ctrace/text.hpp"

#include <zlib.h>

#include <charconv>
#include <system_error>

#include "ctrace/error.hpp"

namespace ctrace {

std::vector<std::string_view> split_fields(std::string_view row) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = row.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(row.substr(start));
      break;
    }
    fields.push_back(row.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::optional<std::uint64_t> parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    return std::nullopt;
  }
  return v;
}

std::optional<long> parse_long(std::string_view s) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    return std::nullopt;
  }
  return v;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    return std::nullopt;
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

namespace {

void strip_eol(std::string& line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) {
    line.pop_back();
  }
}

// gzread passes uncompressed files through unchanged, so one reader serves
// both plain and compressed inputs.
class GzLineReader final : public LineReader {
 public:
  explicit GzLineReader(const std::filesystem::path& path)
      : file_(gzopen(path.c_str(), "rb")) {
    if (file_ == nullptr) {
      throw InputError("cannot open " + path.string());
    }
    gzbuffer(file_, 1 << 17);
  }
  ~GzLineReader() override { gzclose(file_); }
  GzLineReader(const GzLineReader&) = delete;
  GzLineReader& operator=(const GzLineReader&) = delete;

  bool next(std::string& line) override {
    line.clear();
    char buf[4096];
    while (gzgets(file_, buf, sizeof(buf)) != nullptr) {
      line.append(buf);
      if (!line.empty() && line.back() == '\n') {
        strip_eol(line);
        return true;
      }
    }
    int err = 0;
    const char* msg = gzerror(file_, &err);
    if (err != Z_OK && err != Z_STREAM_END) {
      throw InputError(std::string("read error: ") + msg);
    }
    strip_eol(line);
    return !line.empty();
  }

 private:
  gzFile file_;
};

class StreamLineReader final : public LineReader {
 public:
  explicit StreamLineReader(std::istream& in) : in_(in) {}

  bool next(std::string& line) override {
    if (!std::getline(in_, line)) return false;
    strip_eol(line);
    return true;
  }

 private:
  std::istream& in_;
};

}  // namespace

std::unique_ptr<LineReader> LineReader::open(
    const std::filesystem::path& path) {
  return std::make_unique<GzLineReader>(path);
}

std::unique_ptr<LineReader> LineReader::from_stream(std::istream& in) {
  return std::make_unique<StreamLineReader>(in);
}

}  // namespace ctrace
