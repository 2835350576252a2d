#ifndef SKYLINE_REPORT_HPP_
#define SKYLINE_REPORT_HPP_

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "skyline/error.hpp"

namespace skyline {

using json = nlohmann::ordered_json;

/// Shortest round-trip decimal form; non-finite values and nullopt become "".
inline std::string format_number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

/// null for non-finite values, so the JSON stays valid.
inline json json_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json json_number(const std::optional<double>& v) { return v ? json_number(*v) : json(nullptr); }

/**
 * Minimal CSV writer. Cells are written as given; text cells containing a
 * comma, quote or newline are quoted.
 */
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw argument_error("cannot open '" + path.string() + "' for writing");
  }

  CsvWriter& row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << quote(cells[i]);
    }
    out_ << '\n';
    if (!out_) throw argument_error("write failed on '" + path_.string() + "'");
    return *this;
  }

 private:
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  }

  std::filesystem::path path_;
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw argument_error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw argument_error("write failed on '" + path.string() + "'");
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw argument_error("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(0, "invalid JSON in '" + path.string() + "': " + e.what());
  }
}

/// Creates the directory if needed and checks that it accepts files.
inline void prepare_out_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw argument_error("output directory '" + dir.string() + "' cannot be created");
  const auto probe = dir / ".skyline-write-probe";
  {
    std::ofstream t(probe);
    if (!t) throw argument_error("output directory '" + dir.string() + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
}

}  // namespace skyline

#endif  // SKYLINE_REPORT_HPP_
