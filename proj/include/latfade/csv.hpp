#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace latfade {

/// Ten significant digits, printf "%.10g".
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string fmt(std::uint64_t v) { return std::to_string(v); }

/// RFC 4180 style table: LF line endings, fields quoted only when needed,
/// preceded by one '#' metadata line.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void set_metadata(std::string meta) { meta_ = std::move(meta); }

  void add_row(std::vector<std::string> row) {
    if (row.size() != columns_.size())
      throw std::invalid_argument("csv: row has " + std::to_string(row.size()) + " fields, expected " +
                                  std::to_string(columns_.size()));
    rows_.push_back(std::move(row));
  }

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  std::string str() const {
    std::ostringstream os;
    if (!meta_.empty()) os << "# " << meta_ << '\n';
    write_line(os, columns_);
    for (const auto& r : rows_) write_line(os, r);
    return os.str();
  }

  void write_file(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("csv: cannot open '" + path + "' for writing");
    f << str();
    if (!f) throw std::runtime_error("csv: write failed for '" + path + "'");
  }

  static std::string escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + '"';
  }

 private:
  static void write_line(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) os << ',';
      os << escape(fields[i]);
    }
    os << '\n';
  }

  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
  std::string meta_;
};

}  // namespace latfade
