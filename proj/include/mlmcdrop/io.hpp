#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlmcdrop {

/// Shortest round-trip decimal form used in every CSV and JSON number we
/// emit; identical inputs therefore produce identical bytes.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Minimal CSV writer with a pinned header. Cells are preformatted strings;
/// rows must match the header width.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header)
      : width_(header.size()) {
    append_row(header);
  }

  void append_row(const std::vector<std::string>& cells) {
    if (cells.size() != width_)
      throw std::logic_error("csv: row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) body_ << ',';
      body_ << cells[i];
    }
    body_ << '\n';
  }

  std::string str() const { return body_.str(); }

  void write(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << body_.str();
  }

 private:
  std::size_t width_;
  std::ostringstream body_;
};

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace mlmcdrop
